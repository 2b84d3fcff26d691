#include "ausc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "ausc/layers.hpp"
#include "ausc/sesp_loss.hpp"

namespace ausc {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Largest-remainder apportionment of n items, then topped up so that every
// positive share gets at least one item (taken from the largest share).
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& f) {
    std::array<std::size_t, 3> count{};
    std::array<double, 3> rem{};
    std::size_t used = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = f[i] * double(n);
        count[i] = static_cast<std::size_t>(std::floor(exact));
        rem[i] = exact - double(count[i]);
        used += count[i];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; used < n; ++k, ++used) ++count[order[k % 3]];
    for (int i = 0; i < 3; ++i) {
        if (f[i] > 0 && count[i] == 0) {
            auto big = std::max_element(count.begin(), count.end()) - count.begin();
            if (count[big] <= 1) throw SplitError("too few subjects for the requested split");
            --count[big];
            ++count[i];
        }
    }
    return count;
}

}  // namespace

SplitPlan split_dataset(std::span<const SubjectRef> records, const SplitFractions& fr, std::uint64_t seed) {
    const std::array<double, 3> f{fr.train, fr.validation, fr.holdout};
    double total = 0;
    for (double v : f) {
        if (!(v >= 0)) throw SplitError("split fractions must be non-negative");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw SplitError("split fractions must sum to 1");

    std::vector<std::string> subjects;
    for (const auto& r : records) subjects.push_back(r.subject_id.empty() ? r.record_id : r.subject_id);
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
    const auto positive = std::count_if(f.begin(), f.end(), [](double v) { return v > 0; });
    if (subjects.size() < static_cast<std::size_t>(positive)) throw SplitError("fewer subjects than splits");

    std::stable_sort(subjects.begin(), subjects.end(), [seed](const std::string& a, const std::string& b) {
        return splitmix64(fnv1a(a) ^ seed) < splitmix64(fnv1a(b) ^ seed);
    });
    const auto count = apportion(subjects.size(), f);
    std::map<std::string, int> where;
    std::size_t k = 0;
    for (int s = 0; s < 3; ++s) {
        for (std::size_t i = 0; i < count[s]; ++i) where[subjects[k++]] = s;
    }

    SplitPlan plan;
    std::vector<std::string>* dest[3] = {&plan.train, &plan.validation, &plan.holdout};
    for (const auto& r : records) dest[where.at(r.subject_id.empty() ? r.record_id : r.subject_id)]->push_back(r.record_id);
    return plan;
}

SplitPlan split_dataset(std::span<const PcgRecording> records, const SplitFractions& fractions, std::uint64_t seed) {
    std::vector<SubjectRef> refs;
    refs.reserve(records.size());
    for (const auto& r : records) refs.push_back({r.id, r.subject_id});
    return split_dataset(refs, fractions, seed);
}

// --- Adam -----------------------------------------------------------------------

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const ParamTensors<T>& params) {
    AdamState s;
    for (const auto& e : ParamTensors<T>::entries) {
        s.m.*e.member = Tensor<T>((params.*e.member).shape());
        s.v.*e.member = Tensor<T>((params.*e.member).shape());
    }
    return s;
}

template <typename T>
void adam_step(ParamTensors<T>& params, const ParamTensors<T>& grads, AdamState<T>& s, double lr) {
    for (const auto& e : ParamTensors<T>::entries) {
        require_shape((grads.*e.member).shape(), (params.*e.member).shape(), "adam gradient");
        require_shape((s.m.*e.member).shape(), (params.*e.member).shape(), "adam first moment");
        require_shape((s.v.*e.member).shape(), (params.*e.member).shape(), "adam second moment");
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(s.beta1, double(s.t));
    const double c2 = 1.0 - std::pow(s.beta2, double(s.t));
    for (const auto& e : ParamTensors<T>::entries) {
        T* w = (params.*e.member).data();
        const T* g = (grads.*e.member).data();
        T* m = (s.m.*e.member).data();
        T* v = (s.v.*e.member).data();
        const auto n = static_cast<std::ptrdiff_t>((params.*e.member).size());
#pragma omp parallel for schedule(static) if (n > 65536)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const double gi = double(g[i]);
            const double mi = s.beta1 * double(m[i]) + (1.0 - s.beta1) * gi;
            const double vi = s.beta2 * double(v[i]) + (1.0 - s.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            w[i] = static_cast<T>(double(w[i]) - lr * (mi / c1) / (std::sqrt(vi / c2) + s.eps));
        }
    }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(ParamTensors<float>&, const ParamTensors<float>&, AdamState<float>&, double);
template void adam_step(ParamTensors<double>&, const ParamTensors<double>&, AdamState<double>&, double);

// --- training -------------------------------------------------------------------

TrainingSet make_training_set(std::span<const MfccHeatMap> maps) {
    TrainingSet set;
    if (maps.empty()) return set;
    const std::size_t rows = maps.front().values.dim(0), cols = maps.front().values.dim(1);
    set.maps = Tensor<float>({maps.size(), rows, cols});
    set.labels.reserve(maps.size());
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const auto& m = maps[i];
        if (m.values.shape() != Shape{rows, cols}) throw TrainError("heat maps have differing shapes");
        if (m.label == Label::Unknown) throw TrainError("heat map from " + m.source_id + " has no label");
        set.labels.push_back(m.label == Label::Abnormal ? 1 : 0);
        std::transform(m.values.vec().begin(), m.values.vec().end(), set.maps.data() + i * rows * cols,
                       [](double v) { return static_cast<float>(v); });
    }
    return set;
}

namespace {

constexpr std::size_t kEvalChunk = 64;

Tensor<float> gather(const TrainingSet& set, std::span<const std::size_t> idx) {
    const std::size_t per = set.maps.size() / set.size();
    Shape shape = set.maps.shape();
    shape[0] = idx.size();
    Tensor<float> out(shape);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy_n(set.maps.data() + idx[i] * per, per, out.data() + i * per);
    }
    return out;
}

std::vector<int> gather_labels(const TrainingSet& set, std::span<const std::size_t> idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(set.labels[i]);
    return out;
}

void write_run_files(const std::filesystem::path& dir, const NetworkParams<float>& params, const char* name) {
    save_checkpoint(dir / name, params);
}

}  // namespace

Tensor<float> eval_logits(const NetworkParams<float>& params, const Tensor<float>& maps) {
    const std::size_t n = maps.dim(0), per = n ? maps.size() / n : 0;
    Tensor<float> out({n, params.arch.classes});
    Rng unused(0);
    for (std::size_t start = 0; start < n; start += kEvalChunk) {
        const std::size_t len = std::min(kEvalChunk, n - start);
        Shape shape = maps.shape();
        shape[0] = len;
        Tensor<float> chunk(shape, std::vector<float>(maps.data() + start * per, maps.data() + (start + len) * per));
        const auto tr = network_forward(chunk, params, Mode::Eval, unused);
        std::copy(tr.logits.vec().begin(), tr.logits.vec().end(), out.data() + start * params.arch.classes);
    }
    return out;
}

Tensor<float> predict_probabilities(const NetworkParams<float>& params, const Tensor<float>& maps) {
    return softmax(eval_logits(params, maps));
}

void calibrate_output_layer(NetworkParams<float>& params, const TrainingSet& set) {
    constexpr std::size_t kProbe = 512;
    const std::size_t step = std::max<std::size_t>(1, set.size() / kProbe);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < set.size() && idx.size() < kProbe; i += step) idx.push_back(i);
    const auto logits = eval_logits(params, gather(set, idx));

    struct Probe {
        double d;
        int label;
    };
    std::vector<Probe> probe;
    double pos = 0, neg = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        probe.push_back({double(logits.at(i, 1)) - double(logits.at(i, 0)), set.labels[idx[i]]});
        (set.labels[idx[i]] ? pos : neg) += 1;
    }
    double mean = 0, var = 0;
    for (const auto& p : probe) mean += p.d;
    mean /= double(probe.size());
    for (const auto& p : probe) var += (p.d - mean) * (p.d - mean);
    const double sd = std::sqrt(var / double(probe.size()));
    const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;

    // Scan thresholds between sorted logit differences, both orientations,
    // for the best balanced accuracy. Falls back to the median when the
    // probe holds a single class.
    std::stable_sort(probe.begin(), probe.end(), [](const Probe& a, const Probe& b) { return a.d < b.d; });
    double threshold = probe[probe.size() / 2].d;
    double sign = 1;
    if (pos > 0 && neg > 0) {
        double best = -1, below_pos = 0, below_neg = 0;
        for (std::size_t k = 0; k <= probe.size(); ++k) {
            // rows [0, k) fall below the threshold
            const double t = k == 0 ? probe[0].d - 1
                             : k == probe.size() ? probe.back().d + 1
                                                 : (probe[k - 1].d + probe[k].d) / 2;
            const double up = ((pos - below_pos) / pos + below_neg / neg) / 2;  // above -> abnormal
            const double down = (below_pos / pos + (neg - below_neg) / neg) / 2;
            if (up > best) {
                best = up;
                threshold = t;
                sign = 1;
            }
            if (down > best) {
                best = down;
                threshold = t;
                sign = -1;
            }
            if (k < probe.size()) (probe[k].label ? below_pos : below_neg) += 1;
        }
    }

    auto& w = params.tensors.out_w;
    auto& b = params.tensors.out_b;
    for (auto& v : w.vec()) v = static_cast<float>(double(v) * scale);
    for (auto& v : b.vec()) v = static_cast<float>(double(v) * scale);
    if (sign < 0) {
        for (std::size_t r = 0; r < w.dim(0); ++r) std::swap(w.at(r, 0), w.at(r, 1));
        std::swap(b[0], b[1]);
    }
    b[0] = static_cast<float>(double(b[0]) + sign * threshold * scale / 2);
    b[1] = static_cast<float>(double(b[1]) - sign * threshold * scale / 2);
}

EpochLog evaluate_segments(const NetworkParams<float>& params, const TrainingSet& set) {
    EpochLog log;
    const auto probs = predict_probabilities(params, set.maps);
    std::size_t pos = 0, neg = 0, tp = 0, tn = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto pred = predicted_class(probs, i);
        if (set.labels[i] == 1) {
            ++pos;
            tp += pred == kAbnormal;
        } else {
            ++neg;
            tn += pred == kNormal;
        }
    }
    log.val_se = pos ? double(tp) / double(pos) : 1.0;
    log.val_sp = neg ? double(tn) / double(neg) : 1.0;
    log.val_score = (log.val_se + log.val_sp) / 2;
    return log;
}

TrainResult train(const TrainingSet& train_set, const TrainingSet& val_set, const Hyperparams& hyper,
                  const TrainOptions& opt) {
    hyper.validate();
    opt.arch.validate();
    if (train_set.size() == 0) throw TrainError("training set is empty");
    if (val_set.size() == 0) throw TrainError("validation set is empty");
    const Shape want{opt.arch.in_h, opt.arch.in_w};
    for (const auto* s : {&train_set, &val_set}) {
        if (s->maps.rank() != 3 || Shape{s->maps.dim(1), s->maps.dim(2)} != want) {
            throw TrainError("training maps must be N x " + shape_string(want));
        }
    }
    if (opt.run_dir) std::filesystem::create_directories(*opt.run_dir);

    NetworkParams<float> params{opt.arch, init_params<float>(opt.arch, hyper.seed), opt.norm, hyper, opt.mfcc};
    calibrate_output_layer(params, train_set);
    auto adam = AdamState<float>::zeros_like(params.tensors);
    Rng shuffle_rng(hyper.seed);
    Rng dropout_rng(splitmix64(hyper.seed));

    std::ofstream log_file;
    if (opt.run_dir) {
        log_file.open(*opt.run_dir / "train_log.csv");
        if (!log_file) throw TrainError("cannot write training log in " + opt.run_dir->string());
        write_log_header(log_file);
    }

    TrainResult result;
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::span<const std::size_t> idx(order.data() + start,
                                                   std::min(hyper.batch_size, order.size() - start));
            if (opt.on_batch) opt.on_batch(epoch, idx);
            const auto trace = network_forward(gather(train_set, idx), params, Mode::Train, dropout_rng);
            const auto batch = make_batch(trace.logits, gather_labels(train_set, idx));
            const auto loss = sesp_loss(batch, params.tensors, hyper.lambda);
            auto grads = network_backward(trace, loss.logit_gradient, params);
            add_l2_gradient(grads, params.tensors, hyper.lambda);
            adam_step(params.tensors, grads, adam, hyper.learning_rate);
            loss_sum += loss.total;
            ++batches;
        }

        EpochLog row = evaluate_segments(params, val_set);
        row.epoch = epoch;
        row.train_loss = loss_sum / double(batches);
        result.log.push_back(row);
        if (log_file.is_open()) {
            write_log_row(log_file, row);
            log_file.flush();
        }
        if (opt.on_epoch) opt.on_epoch(row);

        if (row.val_score > best_score) {
            best_score = row.val_score;
            result.best = params;
            result.best_epoch = epoch;
            since_best = 0;
            if (opt.run_dir) write_run_files(*opt.run_dir, params, "best.ckpt");
        } else {
            ++since_best;
        }
        if (opt.run_dir) write_run_files(*opt.run_dir, params, "last.ckpt");
        if (hyper.patience > 0 && since_best >= hyper.patience) break;
    }
    return result;
}

// --- prediction -------------------------------------------------------------------

RecordingPrediction stitch_prediction(std::span<const std::array<double, 2>> segments, std::string record_id) {
    if (segments.empty()) throw StitchError("no segment probabilities to stitch");
    RecordingPrediction p;
    p.record_id = std::move(record_id);
    p.segment_probabilities.assign(segments.begin(), segments.end());
    for (const auto& s : segments) {
        p.mean[0] += s[0];
        p.mean[1] += s[1];
    }
    p.mean[0] /= double(segments.size());
    p.mean[1] /= double(segments.size());
    p.label = p.mean[1] > p.mean[0] ? Label::Abnormal : Label::Normal;
    return p;
}

namespace {

const EmissionModel& model_of(const SegmenterSetup& seg) {
    return seg.model ? *seg.model : default_emission_model();
}

std::vector<Segment> segments_of(const PcgRecording& rec, const MfccConfig& cfg, const SegmenterSetup& seg) {
    // Less than one mean cardiac cycle cannot hold a heartbeat to anchor on.
    double cycle = 0;
    for (const auto& d : seg.prior.states) cycle += d.mean;
    if (rec.duration() < cycle) {
        throw TooShort("recording '" + rec.id + "' is shorter than one heartbeat");
    }
    const auto states = segment_states(rec, model_of(seg), seg.prior);
    return extract_segments(rec, states, cfg.segment_seconds);
}

}  // namespace

std::vector<MfccHeatMap> recordings_to_heatmaps(std::span<const PcgRecording> recs, const MfccConfig& cfg,
                                                const SegmenterSetup& seg, std::vector<std::string>* skipped) {
    model_of(seg);  // build the shared default model before fanning out
    const int rate = recs.empty() ? kCanonicalRate : recs.front().sample_rate;
    for (const auto& r : recs) {
        if (r.sample_rate != rate) throw ConfigError("recordings must share one sample rate");
    }
    const MfccExtractor extract(cfg, rate);

    std::vector<std::vector<MfccHeatMap>> per(recs.size());
    std::vector<char> failed(recs.size(), 0);
    std::vector<std::exception_ptr> errors(recs.size());
    const auto n = static_cast<std::ptrdiff_t>(recs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            for (const auto& s : segments_of(recs[i], cfg, seg)) per[i].push_back(extract(s));
        } catch (const SegmentationEmpty&) {
            failed[i] = 1;
        } catch (const DecodeError&) {
            failed[i] = 1;
        } catch (const TooShort&) {
            failed[i] = 1;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    std::vector<MfccHeatMap> out;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        if (failed[i] && skipped) skipped->push_back(recs[i].id);
        for (auto& m : per[i]) out.push_back(std::move(m));
    }
    return out;
}

RecordingPrediction predict_recording(const PcgRecording& rec, const NetworkParams<float>& params,
                                      const SegmenterSetup& seg) {
    std::vector<Segment> segments;
    try {
        segments = segments_of(rec, params.mfcc, seg);
    } catch (const SegmentationEmpty& e) {
        throw PredictError(rec.id + ": " + e.what());
    } catch (const DecodeError& e) {
        throw PredictError(rec.id + ": " + e.what());
    } catch (const TooShort& e) {
        throw PredictError(rec.id + ": " + e.what());
    }
    const MfccExtractor extract(params.mfcc, rec.sample_rate);
    std::vector<MfccHeatMap> maps;
    for (const auto& s : segments) maps.push_back(extract(s));
    maps = standardize(std::move(maps), params.norm).first;

    const std::size_t rows = params.arch.in_h, cols = params.arch.in_w;
    Tensor<float> stack({maps.size(), rows, cols});
    for (std::size_t i = 0; i < maps.size(); ++i) {
        require_shape(maps[i].values.shape(), {rows, cols}, "heat map");
        std::transform(maps[i].values.vec().begin(), maps[i].values.vec().end(), stack.data() + i * rows * cols,
                       [](double v) { return static_cast<float>(v); });
    }
    const auto probs = predict_probabilities(params, stack);
    std::vector<std::array<double, 2>> seg_probs;
    for (std::size_t i = 0; i < maps.size(); ++i) seg_probs.push_back({probs.at(i, 0), probs.at(i, 1)});
    return stitch_prediction(seg_probs, rec.id);
}

void write_log_header(std::ostream& out) { out << "epoch,train_loss,val_se,val_sp,val_score\n"; }

void write_log_row(std::ostream& out, const EpochLog& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss, r.val_se, r.val_sp,
                  r.val_score);
    out << buf;
}

}  // namespace ausc
