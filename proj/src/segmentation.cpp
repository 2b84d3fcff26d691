#include "ausc/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>

#include "ausc/error.hpp"
#include "ausc/synth.hpp"
#include "ausc/text.hpp"

namespace ausc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// RBJ biquad, Butterworth Q.
struct Biquad {
    double b0, b1, b2, a1, a2;

    static Biquad lowpass(double fc, double fs) {
        const double w = 2.0 * std::numbers::pi * fc / fs, c = std::cos(w), alpha = std::sin(w) / std::sqrt(2.0);
        const double a0 = 1.0 + alpha;
        return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
    }
    static Biquad highpass(double fc, double fs) {
        const double w = 2.0 * std::numbers::pi * fc / fs, c = std::cos(w), alpha = std::sin(w) / std::sqrt(2.0);
        const double a0 = 1.0 + alpha;
        return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
    }

    void run(std::vector<double>& x) const {
        double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
        for (auto& v : x) {
            const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = v;
            y2 = y1;
            y1 = y;
            v = y;
        }
    }
};

// Zero-phase: forward pass, then backward pass.
void filtfilt(const Biquad& f, std::vector<double>& x) {
    f.run(x);
    std::reverse(x.begin(), x.end());
    f.run(x);
    std::reverse(x.begin(), x.end());
}

std::vector<double> frame_means(const std::vector<double>& x, std::size_t spf, std::size_t frames) {
    std::vector<double> out(frames, 0.0);
    for (std::size_t f = 0; f < frames; ++f) {
        double s = 0;
        for (std::size_t i = 0; i < spf; ++i) s += x[f * spf + i];
        out[f] = s / double(spf);
    }
    return out;
}

void scale_to_unit_max(std::vector<double>& v) {
    const double mx = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
    if (mx > 0) for (auto& e : v) e /= mx;
}

}  // namespace

std::string_view to_string(HeartState s) {
    switch (s) {
        case HeartState::S1: return "S1";
        case HeartState::Systole: return "SYS";
        case HeartState::S2: return "S2";
        default: return "DIA";
    }
}

HeartState parse_state(std::string_view s) {
    const auto v = text::trim(s);
    if (v == "S1") return HeartState::S1;
    if (v == "SYS") return HeartState::Systole;
    if (v == "S2") return HeartState::S2;
    if (v == "DIA") return HeartState::Diastole;
    throw FormatError("unknown heart state '" + v + "'");
}

DurationPrior DurationPrior::defaults() {
    DurationPrior p;
    const std::array<double, kNumStates> means = {0.12, 0.20, 0.10, 0.50};
    for (std::size_t s = 0; s < kNumStates; ++s) {
        const double m = means[s], sd = 0.3 * m;
        p.states[s] = {m, sd, std::max(m - 3 * sd, 1e-3), m + 3 * sd};
    }
    return p;
}

void DurationPrior::validate() const {
    for (std::size_t s = 0; s < kNumStates; ++s) {
        const auto& d = states[s];
        if (!(d.min > 0 && d.min <= d.mean && d.mean <= d.max && d.std > 0)) {
            throw ConfigError("duration prior for state " + std::string(to_string(HeartState(s))) +
                              " must satisfy 0 < min <= mean <= max and std > 0");
        }
    }
}

// --- envelope features -------------------------------------------------------

EnvelopeFeatures compute_envelope_features(const PcgRecording& rec, double frame_rate) {
    if (frame_rate <= 0 || rec.sample_rate <= 0) throw ConfigError("frame and sample rates must be positive");
    const double spf_real = rec.sample_rate / frame_rate;
    const auto spf = static_cast<std::size_t>(std::llround(spf_real));
    if (spf == 0 || std::abs(spf_real - double(spf)) > 1e-9) {
        throw ConfigError("sample rate must be an integer multiple of the frame rate");
    }
    if (rec.samples.size() < spf) throw TooShort("recording '" + rec.id + "' is shorter than one frame");
    const std::size_t frames = rec.samples.size() / spf;
    const double fs = rec.sample_rate;

    std::vector<double> env(rec.samples.size());
    std::transform(rec.samples.begin(), rec.samples.end(), env.begin(), [](double v) { return std::abs(v); });
    filtfilt(Biquad::lowpass(std::min(20.0, 0.45 * fs), fs), env);
    for (auto& v : env) v = std::max(v, 0.0);  // filter ringing can dip below zero

    std::vector<double> band = rec.samples;
    filtfilt(Biquad::highpass(25.0, fs), band);
    filtfilt(Biquad::lowpass(std::min(150.0, 0.45 * fs), fs), band);
    for (auto& v : band) v *= v;

    auto e = frame_means(env, spf, frames);
    auto p = frame_means(band, spf, frames);
    scale_to_unit_max(e);
    scale_to_unit_max(p);

    EnvelopeFeatures out;
    out.frame_rate = frame_rate;
    out.samples_per_frame = spf;
    out.values = Tensor<double>({frames, 3});
    for (std::size_t f = 0; f < frames; ++f) {
        out.values.at(f, 0) = e[f];
        out.values.at(f, 1) = f == 0 ? 0.0 : e[f] - e[f - 1];
        out.values.at(f, 2) = p[f];
    }
    return out;
}

Tensor<double> emission_matrix(const EmissionModel& model, const EnvelopeFeatures& features) {
    Tensor<double> out({features.frames(), kNumStates});
    for (std::size_t t = 0; t < features.frames(); ++t) {
        const auto l = model.likelihoods(features.row(t));
        std::copy(l.begin(), l.end(), out.data() + t * kNumStates);
    }
    return out;
}

// --- logistic emission model ------------------------------------------------

LogisticEmissionModel::LogisticEmissionModel(std::vector<double> mean, std::vector<double> scale,
                                             std::vector<double> weights, std::array<double, kNumStates> priors)
    : mean_(std::move(mean)), scale_(std::move(scale)), weights_(std::move(weights)), priors_(priors) {
    if (scale_.size() != mean_.size() || weights_.size() != kNumStates * (mean_.size() + 1)) {
        throw ConfigError("logistic emission model: inconsistent parameter sizes");
    }
}

std::array<double, kNumStates> LogisticEmissionModel::posteriors(std::span<const double> x) const {
    const std::size_t d = mean_.size();
    if (x.size() != d) throw ShapeError("emission model expects " + std::to_string(d) + " features");
    std::array<double, kNumStates> z{};
    for (std::size_t k = 0; k < kNumStates; ++k) {
        const double* w = weights_.data() + k * (d + 1);
        double s = w[d];
        for (std::size_t i = 0; i < d; ++i) s += w[i] * (x[i] - mean_[i]) / scale_[i];
        z[k] = s;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (auto& v : z) sum += (v = std::exp(v - mx));
    for (auto& v : z) v /= sum;
    return z;
}

HeartState LogisticEmissionModel::predict(std::span<const double> x) const {
    const auto p = posteriors(x);
    return HeartState(std::max_element(p.begin(), p.end()) - p.begin());
}

std::array<double, kNumStates> LogisticEmissionModel::likelihoods(std::span<const double> x) const {
    auto p = posteriors(x);
    for (std::size_t k = 0; k < kNumStates; ++k) p[k] /= priors_[k];
    return p;
}

LogisticEmissionModel fit_default_emissions(const LabeledFrames& data, const EmissionFitOptions& opt) {
    const auto& X = data.features;
    if (X.rank() != 2 || X.dim(0) != data.labels.size()) {
        throw FitError("features and labels disagree on the frame count");
    }
    const std::size_t n = X.dim(0), d = X.dim(1);
    std::array<double, kNumStates> counts{};
    for (auto s : data.labels) counts[std::size_t(s)] += 1;
    for (std::size_t k = 0; k < kNumStates; ++k) {
        if (counts[k] == 0) throw FitError("state " + std::string(to_string(HeartState(k))) + " absent from labels");
    }
    std::array<double, kNumStates> priors{};
    for (std::size_t k = 0; k < kNumStates; ++k) priors[k] = counts[k] / double(n);

    std::vector<double> mean(d, 0.0), scale(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += X.at(i, j) / double(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) scale[j] += (X.at(i, j) - mean[j]) * (X.at(i, j) - mean[j]) / double(n);
    for (auto& s : scale) s = std::max(std::sqrt(s), 1e-12);

    std::vector<double> Z(n * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) Z[i * d + j] = (X.at(i, j) - mean[j]) / scale[j];

    // Full-batch gradient descent on mean cross-entropy; biases start at log priors.
    const std::size_t stride = d + 1;
    std::vector<double> w(kNumStates * stride, 0.0), grad(w.size());
    for (std::size_t k = 0; k < kNumStates; ++k) w[k * stride + d] = std::log(priors[k]);
    std::array<double, kNumStates> p{};
    for (int it = 0; it < opt.iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* z = Z.data() + i * d;
            double mx = kNegInf;
            for (std::size_t k = 0; k < kNumStates; ++k) {
                double s = w[k * stride + d];
                for (std::size_t j = 0; j < d; ++j) s += w[k * stride + j] * z[j];
                p[k] = s;
                mx = std::max(mx, s);
            }
            double sum = 0;
            for (auto& v : p) sum += (v = std::exp(v - mx));
            const auto y = std::size_t(data.labels[i]);
            for (std::size_t k = 0; k < kNumStates; ++k) {
                const double r = p[k] / sum - (k == y ? 1.0 : 0.0);
                for (std::size_t j = 0; j < d; ++j) grad[k * stride + j] += r * z[j];
                grad[k * stride + d] += r;
            }
        }
        double gnorm = 0;
        for (std::size_t q = 0; q < w.size(); ++q) {
            const bool is_bias = q % stride == d;
            const double g = grad[q] / double(n) + (is_bias ? 0.0 : opt.l2 * w[q]);
            w[q] -= opt.learning_rate * g;
            gnorm += g * g;
        }
        if (gnorm < 1e-14) break;
    }

    LogisticEmissionModel model(std::move(mean), std::move(scale), std::move(w), priors);

    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> row(X.data() + i * d, d);
        if (model.predict(row) == data.labels[i]) ++correct;
    }
    const double acc = double(correct) / double(n);
    const double majority = *std::max_element(priors.begin(), priors.end());
    if (!(acc > majority)) {
        throw FitError("emission model accuracy " + std::to_string(acc) + " does not beat the majority rate " +
                       std::to_string(majority));
    }
    return model;
}

const LogisticEmissionModel& default_emission_model() {
    static const LogisticEmissionModel model = [] {
        constexpr int kRecordings = 16;
        LabeledFrames data;
        std::vector<double> rows;
        for (int r = 0; r < kRecordings; ++r) {
            const auto label = r % 2 == 0 ? Label::Normal : Label::Abnormal;
            SynthOptions opt;
            opt.period_jitter = 0.1;
            const auto syn = synthesize(label, 0xE1A5'0000ULL + r, opt);
            const auto feats = compute_envelope_features(syn.recording);
            const std::size_t frames = std::min(feats.frames(), syn.frame_states.size());
            for (std::size_t t = 0; t < frames; ++t) {
                const auto row = feats.row(t);
                rows.insert(rows.end(), row.begin(), row.end());
                data.labels.push_back(syn.frame_states[t]);
            }
        }
        data.features = Tensor<double>({data.labels.size(), 3}, std::move(rows));
        return fit_default_emissions(data);
    }();
    return model;
}

// --- decoder -------------------------------------------------------------------

double FrameDuration::log_score(std::size_t d) const {
    if (d < min || d > max) return kNegInf;
    const double z = (double(d) - mean) / std;
    return -0.5 * z * z;
}

std::array<FrameDuration, kNumStates> frame_durations(const DurationPrior& prior, double frame_rate) {
    prior.validate();
    std::array<FrameDuration, kNumStates> out;
    for (std::size_t s = 0; s < kNumStates; ++s) {
        const auto& p = prior.states[s];
        FrameDuration fd;
        fd.min = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(p.min * frame_rate - 1e-9)));
        fd.max = static_cast<std::size_t>(std::floor(p.max * frame_rate + 1e-9));
        fd.mean = p.mean * frame_rate;
        fd.std = p.std * frame_rate;
        if (fd.max < fd.min) {
            throw ConfigError("duration bounds of state " + std::string(to_string(HeartState(s))) +
                              " contain no whole frame");
        }
        out[s] = fd;
    }
    return out;
}

namespace {

void check_likelihoods(const Tensor<double>& lik) {
    if (lik.rank() != 2 || lik.dim(1) != kNumStates) throw ShapeError("likelihoods must be frames x 4");
}

double floored_log(double v) { return std::log(std::max(v, kLikelihoodFloor)); }

}  // namespace

double path_log_score(const Tensor<double>& likelihoods, const DurationPrior& prior, double frame_rate,
                      std::span<const HeartState> states) {
    check_likelihoods(likelihoods);
    if (states.size() != likelihoods.dim(0) || states.empty()) return kNegInf;
    const auto dur = frame_durations(prior, frame_rate);

    double score = 0;
    for (std::size_t t = 0; t < states.size(); ++t) score += floored_log(likelihoods.at(t, std::size_t(states[t])));

    // run-length segments
    std::vector<std::pair<HeartState, std::size_t>> runs;
    for (auto s : states) {
        if (!runs.empty() && runs.back().first == s) ++runs.back().second;
        else runs.emplace_back(s, 1);
    }
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto [s, d] = runs[r];
        if (r > 0 && s != next_state(runs[r - 1].first)) return kNegInf;
        const auto& fd = dur[std::size_t(s)];
        if (d > fd.max) return kNegInf;
        const bool censored = r == 0 || r + 1 == runs.size();
        if (!censored) score += fd.log_score(d);
        if (score == kNegInf) return kNegInf;
    }
    return score;
}

StateSequence hsmm_decode(const Tensor<double>& likelihoods, const DurationPrior& prior, double frame_rate,
                          int sample_rate) {
    check_likelihoods(likelihoods);
    const std::size_t T = likelihoods.dim(0);
    if (T == 0) throw DecodeError("no frames to decode");
    const auto dur = frame_durations(prior, frame_rate);

    // cum[s][t] = sum of log-likelihoods of state s over frames [0, t)
    std::array<std::vector<double>, kNumStates> cum;
    for (std::size_t s = 0; s < kNumStates; ++s) {
        cum[s].assign(T + 1, 0.0);
        for (std::size_t t = 0; t < T; ++t) cum[s][t + 1] = cum[s][t] + floored_log(likelihoods.at(t, s));
    }
    auto emit = [&](std::size_t s, std::size_t a, std::size_t b) { return cum[s][b + 1] - cum[s][a]; };

    // best[t][s]: best score of frames [0, t] whose last segment is state s
    // ending exactly at t; seg_len records that segment's length.
    std::vector<std::array<double, kNumStates>> best(T);
    std::vector<std::array<std::size_t, kNumStates>> seg_len(T);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t s = 0; s < kNumStates; ++s) {
            const auto& fd = dur[s];
            double b = kNegInf;
            std::size_t bl = 0;
            if (t + 1 <= fd.max) {  // censored first segment
                b = emit(s, 0, t);
                bl = t + 1;
            }
            const std::size_t p = std::size_t(prev_state(HeartState(s)));
            for (std::size_t d = fd.min; d <= fd.max && d <= t; ++d) {
                const std::size_t start = t + 1 - d;
                const double prev = best[start - 1][p];
                if (prev == kNegInf) continue;
                const double c = prev + emit(s, start, t) + fd.log_score(d);
                if (c > b) {
                    b = c;
                    bl = d;
                }
            }
            best[t][s] = b;
            seg_len[t][s] = bl;
        }
    }

    // censored last segment
    double total = kNegInf;
    std::size_t last_state = 0, last_len = 0;
    for (std::size_t s = 0; s < kNumStates; ++s) {
        const std::size_t p = std::size_t(prev_state(HeartState(s)));
        for (std::size_t d = 1; d <= dur[s].max && d <= T; ++d) {
            const std::size_t start = T - d;
            double c;
            if (start == 0) c = emit(s, 0, T - 1);
            else if (best[start - 1][p] == kNegInf) continue;
            else c = best[start - 1][p] + emit(s, start, T - 1);
            if (c > total) {
                total = c;
                last_state = s;
                last_len = d;
            }
        }
    }
    if (total == kNegInf) throw DecodeError("no path satisfies the duration bounds");

    StateSequence seq;
    seq.frame_rate = frame_rate;
    seq.sample_rate = sample_rate;
    seq.log_score = total;
    seq.states.assign(T, HeartState::S1);
    std::size_t end = T, s = last_state, len = last_len;
    while (true) {
        const std::size_t start = end - len;
        std::fill(seq.states.begin() + static_cast<std::ptrdiff_t>(start),
                  seq.states.begin() + static_cast<std::ptrdiff_t>(end), HeartState(s));
        if (start == 0) break;
        end = start;
        s = std::size_t(prev_state(HeartState(s)));
        len = seg_len[end - 1][s];
    }
    seq.s1_onsets = s1_onsets_of(seq.states, frame_rate, sample_rate);
    return seq;
}

std::vector<std::size_t> s1_onsets_of(std::span<const HeartState> states, double frame_rate, int sample_rate) {
    std::vector<std::size_t> onsets;
    const double spf = sample_rate / frame_rate;
    for (std::size_t t = 0; t < states.size(); ++t) {
        if (states[t] != HeartState::S1) continue;
        if (t == 0 || states[t - 1] == HeartState::Diastole) {
            onsets.push_back(static_cast<std::size_t>(std::llround(double(t) * spf)));
        }
    }
    return onsets;
}

// --- segments ------------------------------------------------------------------

std::vector<Segment> extract_segments(const PcgRecording& rec, const StateSequence& seq, double seconds) {
    if (seq.s1_onsets.empty()) throw SegmentationEmpty("no S1 onsets detected in '" + rec.id + "'");
    const auto len = static_cast<std::size_t>(std::llround(seconds * rec.sample_rate));
    std::vector<Segment> out;
    auto make = [&](std::size_t start) {
        Segment s{rec.id, start, std::vector<double>(len, 0.0), rec.label, rec.quality};
        const std::size_t avail = start < rec.samples.size() ? std::min(len, rec.samples.size() - start) : 0;
        std::copy_n(rec.samples.begin() + static_cast<std::ptrdiff_t>(start), avail, s.samples.begin());
        return s;
    };
    for (auto onset : seq.s1_onsets) {
        if (onset + len <= rec.samples.size()) out.push_back(make(onset));
    }
    if (out.empty()) out.push_back(make(seq.s1_onsets.front()));
    return out;
}

StateSequence segment_states(const PcgRecording& rec, const EmissionModel& model, const DurationPrior& prior) {
    const auto feats = compute_envelope_features(rec, kDecodeFrameRate);
    return hsmm_decode(emission_matrix(model, feats), prior, feats.frame_rate, rec.sample_rate);
}

// --- file formats -----------------------------------------------------------------

std::map<std::string, std::vector<HeartState>> read_annotations(std::istream& in) {
    std::map<std::string, std::vector<std::pair<std::size_t, HeartState>>> raw;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        const auto t = text::trim(line);
        if (t.empty()) continue;
        if (first) {
            first = false;
            if (t == "record_id,frame_index,state") continue;
        }
        const auto f = text::split(t, ',');
        if (f.size() != 3) throw FormatError("annotation line needs record_id,frame_index,state: " + t);
        std::size_t idx = 0;
        try {
            idx = std::stoul(f[1]);
        } catch (const std::exception&) {
            throw FormatError("bad frame index '" + f[1] + "'");
        }
        raw[text::trim(f[0])].emplace_back(idx, parse_state(f[2]));
    }
    std::map<std::string, std::vector<HeartState>> out;
    for (auto& [id, v] : raw) {
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        auto& states = out[id];
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i].first != i) throw FormatError("annotation frames of '" + id + "' are not contiguous from 0");
            states.push_back(v[i].second);
        }
    }
    return out;
}

void write_annotations(std::ostream& out, const std::string& record_id, std::span<const HeartState> states) {
    for (std::size_t t = 0; t < states.size(); ++t) out << record_id << ',' << t << ',' << to_string(states[t]) << '\n';
}

void write_onsets(std::ostream& out, const std::string& record_id, std::span<const std::size_t> onsets, bool header) {
    if (header) out << "record_id,onset_sample\n";
    for (auto o : onsets) out << record_id << ',' << o << '\n';
}

}  // namespace ausc
