#pragma once

// Subject-disjoint splitting, Adam training on the SeSp objective, and
// recording-level prediction by averaging segment probabilities.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ausc/features.hpp"
#include "ausc/network.hpp"
#include "ausc/pcg_io.hpp"
#include "ausc/segmentation.hpp"

namespace ausc {

// --- splitting ----------------------------------------------------------------

struct SplitFractions {
    double train = 0.8, validation = 0.1, holdout = 0.1;
};

struct SplitPlan {
    std::vector<std::string> train, validation, holdout;  // recording ids, input order
};

struct SubjectRef {
    std::string record_id;
    std::string subject_id;
};

/// Orders subjects by a seeded hash of subject_id and cuts the ordering into
/// largest-remainder counts. Every split with a positive fraction gets at
/// least one subject. Throws SplitError when that is impossible.
SplitPlan split_dataset(std::span<const SubjectRef> records, const SplitFractions& fractions, std::uint64_t seed);
SplitPlan split_dataset(std::span<const PcgRecording> records, const SplitFractions& fractions, std::uint64_t seed);

// --- optimizer ----------------------------------------------------------------

template <typename T>
struct AdamState {
    ParamTensors<T> m, v;
    std::uint64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState zeros_like(const ParamTensors<T>& params);
};

/// One bias-corrected Adam update. Throws ShapeError on mismatched tensors.
template <typename T>
void adam_step(ParamTensors<T>& params, const ParamTensors<T>& grads, AdamState<T>& state, double lr);

// --- training -----------------------------------------------------------------

/// Standardized maps stacked for the network, with class indices
/// (0 normal, 1 abnormal).
struct TrainingSet {
    Tensor<float> maps;  // N x rows x cols
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

/// Throws TrainError if any map has an unknown label or the shapes differ.
TrainingSet make_training_set(std::span<const MfccHeatMap> maps);

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0;
    double val_se = 0, val_sp = 0, val_score = 0;
};

struct TrainOptions {
    Architecture arch;
    MfccConfig mfcc;
    NormalizationStats norm;  // stored in the checkpoints
    /// When set: best.ckpt, last.ckpt and train_log.csv are written here.
    std::optional<std::filesystem::path> run_dir;
    /// Called with the training-set indices of every mini-batch, in order.
    std::function<void(std::size_t epoch, std::span<const std::size_t> batch)> on_batch;
    /// Called after every epoch.
    std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
    NetworkParams<float> best;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
};

/// Per-segment hard-decision validation metrics (argmax, ties to normal).
/// A class with no rows scores 1.
EpochLog evaluate_segments(const NetworkParams<float>& params, const TrainingSet& set);

/// Data-dependent start for the output layer. Over (up to 512 of) the
/// training maps it rescales the layer so the logit difference has unit
/// spread, then orients and shifts it to the threshold with the best balanced
/// accuracy (the median when only one class is present). train() calls this
/// once after init_params.
void calibrate_output_layer(NetworkParams<float>& params, const TrainingSet& set);

/// Mini-batch Adam on -(Se + Sp) + lambda R(W); keeps the parameters with the
/// best validation (Se + Sp) / 2 and stops after `patience` epochs without
/// improvement (0 disables early stopping). Throws TrainError on empty sets.
TrainResult train(const TrainingSet& train_set, const TrainingSet& val_set, const Hyperparams& hyper,
                  const TrainOptions& options);

/// Eval-mode class probabilities for a stack of standardized maps, N x 2.
Tensor<float> predict_probabilities(const NetworkParams<float>& params, const Tensor<float>& maps);

// --- prediction ---------------------------------------------------------------

struct RecordingPrediction {
    std::string record_id;
    std::vector<std::array<double, 2>> segment_probabilities;
    std::array<double, 2> mean{0, 0};
    Label label = Label::Normal;
};

/// Averages segment probabilities; argmax with ties to Normal. Throws
/// StitchError on an empty list.
RecordingPrediction stitch_prediction(std::span<const std::array<double, 2>> segments, std::string record_id = {});

struct SegmenterSetup {
    const EmissionModel* model = nullptr;  // null: default_emission_model()
    DurationPrior prior = DurationPrior::defaults();
};

/// Segments every recording and computes its raw heat maps. Recordings
/// shorter than one mean cardiac cycle of the prior count as unsegmentable. Output keeps
/// recording order, then segment order. Recordings that cannot be segmented
/// are skipped and their ids collected in `skipped` when given.
std::vector<MfccHeatMap> recordings_to_heatmaps(std::span<const PcgRecording> recs, const MfccConfig& cfg,
                                                const SegmenterSetup& seg = {},
                                                std::vector<std::string>* skipped = nullptr);

/// Segment, featurize, standardize with the checkpoint stats, classify each
/// segment and stitch. Segmentation failures surface as PredictError.
RecordingPrediction predict_recording(const PcgRecording& rec, const NetworkParams<float>& params,
                                      const SegmenterSetup& seg = {});

// --- run files ----------------------------------------------------------------

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const EpochLog& row);

}  // namespace ausc
