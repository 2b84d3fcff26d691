#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ausc/pcg_io.hpp"
#include "ausc/tensor.hpp"

namespace ausc {

/// Cardiac cycle states. The only legal successor of each state is the next
/// one in declaration order, wrapping Diastole -> S1.
enum class HeartState : std::uint8_t { S1 = 0, Systole = 1, S2 = 2, Diastole = 3 };

inline constexpr std::size_t kNumStates = 4;
inline constexpr double kDecodeFrameRate = 50.0;
inline constexpr double kLikelihoodFloor = 1e-9;

constexpr HeartState next_state(HeartState s) { return HeartState((std::uint8_t(s) + 1) % kNumStates); }
constexpr HeartState prev_state(HeartState s) { return HeartState((std::uint8_t(s) + kNumStates - 1) % kNumStates); }

/// "S1", "SYS", "S2", "DIA" (annotation file spelling).
std::string_view to_string(HeartState s);
HeartState parse_state(std::string_view s);

struct StateDuration {
    double mean = 0, std = 0, min = 0, max = 0;  // seconds
};

struct DurationPrior {
    std::array<StateDuration, kNumStates> states;

    /// Resting-rate physiology: S1 0.12 s, systole 0.20 s, S2 0.10 s,
    /// diastole 0.50 s; std 30% of the mean; bounds mean -/+ 3 std.
    static DurationPrior defaults();
    /// Throws ConfigError unless 0 < min <= mean <= max and std > 0.
    void validate() const;

    const StateDuration& operator[](HeartState s) const { return states[std::size_t(s)]; }
};

/// Per-frame envelope features, frames x 3: low-passed rectified amplitude,
/// its first difference, and 25-150 Hz band power.
struct EnvelopeFeatures {
    double frame_rate = kDecodeFrameRate;
    std::size_t samples_per_frame = 0;
    Tensor<double> values;

    std::size_t frames() const { return values.empty() ? 0 : values.dim(0); }
    std::size_t channels() const { return values.empty() ? 0 : values.dim(1); }
    std::span<const double> row(std::size_t t) const {
        return values.span().subspan(t * channels(), channels());
    }
};

EnvelopeFeatures compute_envelope_features(const PcgRecording& rec, double frame_rate = kDecodeFrameRate);

/// Maps one feature row to four non-negative state likelihoods.
class EmissionModel {
public:
    virtual ~EmissionModel() = default;
    virtual std::array<double, kNumStates> likelihoods(std::span<const double> features) const = 0;
};

/// frames x 4 likelihood matrix for a whole recording.
Tensor<double> emission_matrix(const EmissionModel& model, const EnvelopeFeatures& features);

/// Multinomial logistic regression over standardized features. Likelihoods
/// are posteriors divided by the training class priors.
class LogisticEmissionModel final : public EmissionModel {
public:
    LogisticEmissionModel(std::vector<double> mean, std::vector<double> scale, std::vector<double> weights,
                          std::array<double, kNumStates> priors);

    std::array<double, kNumStates> posteriors(std::span<const double> features) const;
    HeartState predict(std::span<const double> features) const;
    std::array<double, kNumStates> likelihoods(std::span<const double> features) const override;

    std::size_t feature_count() const { return mean_.size(); }
    const std::array<double, kNumStates>& priors() const { return priors_; }

private:
    std::vector<double> mean_, scale_;
    std::vector<double> weights_;  // kNumStates x (features + 1), bias last
    std::array<double, kNumStates> priors_;
};

struct LabeledFrames {
    Tensor<double> features;         // frames x channels
    std::vector<HeartState> labels;  // one per frame
};

struct EmissionFitOptions {
    int iterations = 2000;
    double learning_rate = 0.5;
    double l2 = 1e-4;
};

/// Fits the logistic emission model. Throws FitError when a state is missing
/// from the labels or when training accuracy does not beat the majority rate.
LogisticEmissionModel fit_default_emissions(const LabeledFrames& data, const EmissionFitOptions& opt = {});

/// Emission model fitted on annotated recordings from the synthetic PCG
/// generator (fixed seed). Used when no annotation file is supplied.
const LogisticEmissionModel& default_emission_model();

struct StateSequence {
    double frame_rate = kDecodeFrameRate;
    int sample_rate = kCanonicalRate;
    std::vector<HeartState> states;
    std::vector<std::size_t> s1_onsets;  // sample indices, ascending
    double log_score = 0;
};

/// Integer frame bounds and Gaussian parameters of one state's duration.
struct FrameDuration {
    std::size_t min = 1, max = 1;
    double mean = 1, std = 1;
    /// -(d - mean)^2 / (2 std^2); -inf outside [min, max].
    double log_score(std::size_t d) const;
};
std::array<FrameDuration, kNumStates> frame_durations(const DurationPrior& prior, double frame_rate);

/// Log-score of a state path under the decoder's objective: summed floored
/// log-likelihoods plus duration terms for every complete segment. The first
/// and last segments are censored (length 1..max, no duration term).
/// Returns -inf for paths that break the cyclic order or a duration bound.
double path_log_score(const Tensor<double>& likelihoods, const DurationPrior& prior, double frame_rate,
                      std::span<const HeartState> states);

/// Explicit-duration Viterbi decode of the S1 -> Systole -> S2 -> Diastole
/// cycle. Returns the maximum of path_log_score over all legal paths.
/// Throws DecodeError when no legal path exists.
StateSequence hsmm_decode(const Tensor<double>& likelihoods, const DurationPrior& prior,
                          double frame_rate = kDecodeFrameRate, int sample_rate = kCanonicalRate);

/// S1 onset sample indices of a state path.
std::vector<std::size_t> s1_onsets_of(std::span<const HeartState> states, double frame_rate, int sample_rate);

struct Segment {
    std::string source_id;
    std::size_t start_sample = 0;
    std::vector<double> samples;
    Label label = Label::Unknown;
    Quality quality = Quality::Unknown;
};

/// One segment of `seconds` per S1 onset with enough signal left. If that
/// yields nothing, the first onset's segment is returned zero-padded.
/// Throws SegmentationEmpty when there are no onsets.
std::vector<Segment> extract_segments(const PcgRecording& rec, const StateSequence& seq, double seconds = 3.0);

/// Envelope features -> emissions -> decode.
StateSequence segment_states(const PcgRecording& rec, const EmissionModel& model, const DurationPrior& prior);

// --- file formats ----------------------------------------------------------

/// `record_id,frame_index,state` with state in {S1,SYS,S2,DIA}.
std::map<std::string, std::vector<HeartState>> read_annotations(std::istream& in);
void write_annotations(std::ostream& out, const std::string& record_id, std::span<const HeartState> states);

/// Debug dump `record_id,onset_sample`. The header is written when `header` is set.
void write_onsets(std::ostream& out, const std::string& record_id, std::span<const std::size_t> onsets,
                  bool header);

}  // namespace ausc
