#include "ausc/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "ausc/config.hpp"
#include "ausc/error.hpp"
#include "ausc/features.hpp"
#include "ausc/network.hpp"
#include "ausc/pcg_io.hpp"
#include "ausc/scoring.hpp"
#include "ausc/segmentation.hpp"
#include "ausc/synth.hpp"
#include "ausc/trainer.hpp"

namespace ausc::cli {

namespace fs = std::filesystem;

namespace {

// Flags and overrides shared by the subcommands. Overrides are collected
// as text and applied on top of the optional --config file.
struct Options {
    std::string manifest, data_dir = ".", out, checkpoint, config, input, predictions;
    std::size_t scale = 1;
    std::optional<double> se, sp;
    double val_fraction = 0.1, holdout_fraction = 0.1;
    std::size_t count = 20;
    double abnormal_fraction = 0.2, duration = 8.0;
    std::map<std::string, std::string> overrides;
};

struct Settings {
    Hyperparams hyper;
    MfccConfig mfcc;
};

void add_data_flags(CLI::App* c, Options& o, bool need_out) {
    c->add_option("--manifest", o.manifest, "Dataset manifest CSV")->required();
    c->add_option("--data-dir", o.data_dir, "Directory the manifest paths are relative to");
    auto* out = c->add_option("--out", o.out, "Output path");
    if (need_out) out->required();
}

void add_override_flags(CLI::App* c, Options& o, bool hyper) {
    c->add_option("--config", o.config, "Flat key = value settings file");
    auto add = [&](const KeyValues& defaults) {
        for (const auto& [key, value] : defaults) {
            c->add_option_function<std::string>(
                "--" + key, [&o, key = key](const std::string& v) { o.overrides[key] = v; },
                "Override (default " + value + ")");
        }
    };
    add(to_key_values(MfccConfig{}));
    if (hyper) add(to_key_values(Hyperparams{}));
}

Settings resolve_settings(const Options& o) {
    KeyValues kv;
    if (!o.config.empty()) kv = read_key_values(o.config);
    for (const auto& [k, v] : o.overrides) kv[k] = v;
    Settings s;
    for (const auto& [k, v] : kv) {
        if (!assign(s.hyper, k, v) && !assign(s.mfcc, k, v)) throw ConfigError("unknown setting '" + k + "'");
    }
    s.hyper.validate();
    s.mfcc.validate(kCanonicalRate);
    return s;
}

std::vector<PcgRecording> load(const Options& o, DatasetManifest* manifest_out = nullptr) {
    auto manifest = read_manifest(o.manifest);
    auto recs = load_dataset(manifest, o.data_dir, kCanonicalRate);
    if (manifest_out) *manifest_out = std::move(manifest);
    return recs;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write " + path.string());
    return f;
}

std::vector<RecordingPrediction> predict_all(std::span<const PcgRecording> recs, const NetworkParams<float>& params) {
    std::vector<RecordingPrediction> out(recs.size());
    std::vector<std::exception_ptr> errors(recs.size());
    const auto n = static_cast<std::ptrdiff_t>(recs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[i] = predict_recording(recs[i], params);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

std::vector<PredictionRow> to_rows(const std::vector<RecordingPrediction>& preds) {
    std::vector<PredictionRow> rows;
    for (const auto& p : preds) rows.push_back({p.record_id, verdict_of(p.label)});
    return rows;
}

// --- subcommands ---------------------------------------------------------------

void cmd_ingest(const Options& o, std::ostream& out) {
    DatasetManifest manifest;
    const auto recs = load(o, &manifest);
    std::map<std::string, std::size_t> labels, qualities;
    std::set<std::string> subjects;
    double seconds = 0, shortest = 0, longest = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        ++labels[std::string(to_string(r.label))];
        ++qualities[std::string(to_string(r.quality))];
        subjects.insert(r.subject_id);
        const double d = r.duration();
        seconds += d;
        shortest = i ? std::min(shortest, d) : d;
        longest = i ? std::max(longest, d) : d;
    }
    nlohmann::ordered_json j;
    j["recordings"] = recs.size();
    j["subjects"] = subjects.size();
    j["sample_rate"] = kCanonicalRate;
    j["total_seconds"] = seconds;
    j["shortest_seconds"] = shortest;
    j["longest_seconds"] = longest;
    j["labels"] = labels;
    j["quality"] = qualities;
    const auto text = j.dump(2) + "\n";
    if (o.out.empty()) {
        out << text;
    } else {
        open_out(o.out) << text;
    }
}

void cmd_segment(const Options& o, std::ostream& out) {
    const auto recs = load(o);
    auto f = open_out(o.out);
    bool header = true;
    std::size_t onsets = 0;
    for (const auto& r : recs) {
        const auto seq = segment_states(r, default_emission_model(), DurationPrior::defaults());
        write_onsets(f, r.id, seq.s1_onsets, header);
        header = false;
        onsets += seq.s1_onsets.size();
    }
    out << "segmented " << recs.size() << " recordings, " << onsets << " S1 onsets\n";
}

void cmd_featurize(const Options& o, std::ostream& out) {
    const auto s = resolve_settings(o);
    const auto recs = load(o);
    std::vector<std::string> skipped;
    const auto maps = recordings_to_heatmaps(recs, s.mfcc, {}, &skipped);
    fs::create_directories(o.out);
    std::map<std::string, std::size_t> next;
    for (const auto& m : maps) {
        const auto k = next[m.source_id]++;
        save_heatmap(fs::path(o.out) / (m.source_id + "_" + std::to_string(k) + ".mfhm"), m);
    }
    out << "wrote " << maps.size() << " heat maps from " << recs.size() - skipped.size() << " recordings\n";
    for (const auto& id : skipped) out << "skipped " << id << " (no usable segment)\n";
}

void cmd_render(const Options& o, std::ostream& out) {
    if (o.scale == 0) throw ConfigError("--scale must be at least 1");
    const auto map = load_heatmap(o.input);
    const auto bytes = render_ppm(map, o.scale);
    open_out(o.out).write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out << "wrote " << map.values.dim(1) * o.scale << "x" << map.values.dim(0) * o.scale << " image\n";
}

void cmd_train(const Options& o, std::ostream& out) {
    const auto s = resolve_settings(o);
    const auto recs = load(o);
    const double train_fraction = 1.0 - o.val_fraction - o.holdout_fraction;
    const auto plan = split_dataset(std::span<const PcgRecording>(recs),
                                    {train_fraction, o.val_fraction, o.holdout_fraction}, s.hyper.seed);
    auto pick = [&](const std::vector<std::string>& ids) {
        std::set<std::string> want(ids.begin(), ids.end());
        std::vector<PcgRecording> sel;
        for (const auto& r : recs) {
            if (want.count(r.id)) sel.push_back(r);
        }
        return sel;
    };
    const auto train_recs = pick(plan.train), val_recs = pick(plan.validation);
    auto [train_maps, stats] = standardize(recordings_to_heatmaps(train_recs, s.mfcc), std::nullopt);
    auto val_maps = standardize(recordings_to_heatmaps(val_recs, s.mfcc), stats).first;

    const fs::path run = o.out;
    fs::create_directories(run);
    {
        auto f = open_out(run / "split.csv");
        f << "record_id,split\n";
        for (const auto& id : plan.train) f << id << ",train\n";
        for (const auto& id : plan.validation) f << id << ",validation\n";
        for (const auto& id : plan.holdout) f << id << ",holdout\n";
    }
    {
        auto f = open_out(run / "settings.txt");
        KeyValues kv = to_key_values(s.hyper);
        kv.merge(to_key_values(s.mfcc));
        write_key_values(f, kv);
    }

    TrainOptions opt;
    opt.mfcc = s.mfcc;
    opt.norm = stats;
    opt.run_dir = run;
    opt.on_epoch = [&out](const EpochLog& e) {
        out << "epoch " << e.epoch << " loss " << e.train_loss << " val Se " << e.val_se << " Sp " << e.val_sp
            << " score " << e.val_score << "\n";
    };
    const auto result =
        train(make_training_set(train_maps), make_training_set(val_maps), s.hyper, opt);
    out << "best epoch " << result.best_epoch << ", checkpoint " << (run / "best.ckpt").string() << "\n";
}

std::vector<PredictionRow> run_predict(const Options& o, DatasetManifest& manifest) {
    if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
    const auto params = load_checkpoint(o.checkpoint);
    const auto recs = load(o, &manifest);
    return to_rows(predict_all(recs, params));
}

void cmd_predict(const Options& o, std::ostream& out) {
    DatasetManifest manifest;
    const auto rows = run_predict(o, manifest);
    auto f = open_out(o.out);
    write_predictions(f, rows);
    out << "wrote " << rows.size() << " predictions\n";
}

void cmd_evaluate(const Options& o, std::ostream& out) {
    DatasetManifest manifest;
    const auto rows = run_predict(o, manifest);
    if (!o.out.empty()) {
        auto f = open_out(o.out);
        write_predictions(f, rows);
    }
    const auto t = tally(join_predictions(rows, manifest));
    out << format_report(challenge_score(t.counts, t.weights)) << "\n";
}

void cmd_score(const Options& o, std::ostream& out) {
    if (o.se || o.sp) {
        if (!o.se || !o.sp) throw ConfigError("--se and --sp go together");
        out << format_report(score_from(*o.se, *o.sp)) << "\n";
        return;
    }
    if (o.predictions.empty() || o.manifest.empty()) {
        throw ConfigError("score needs --se/--sp or --predictions with --manifest");
    }
    const auto rows = read_predictions(o.predictions);
    const auto t = tally(join_predictions(rows, read_manifest(o.manifest)));
    out << format_report(challenge_score(t.counts, t.weights)) << "\n";
}

void cmd_synth(const Options& o, std::ostream& out) {
    const auto s = resolve_settings(o);
    const fs::path dir = o.out;
    fs::create_directories(dir);
    DatasetManifest manifest;
    SynthOptions opt;
    opt.duration = o.duration;
    const auto abnormal = static_cast<std::size_t>(std::llround(o.abnormal_fraction * double(o.count)));
    for (std::size_t i = 0; i < o.count; ++i) {
        const Label label = i < abnormal ? Label::Abnormal : Label::Normal;
        auto rec = synthesize(label, s.hyper.seed * 1000003ULL + i, opt).recording;
        char id[32];
        std::snprintf(id, sizeof(id), "syn%05zu", i);
        rec.id = id;
        write_wav(dir / (rec.id + ".wav"), rec);
        manifest.entries.push_back({rec.id, rec.id + ".wav", label, Quality::Good, std::string("subj_") + id});
    }
    auto f = open_out(dir / "manifest.csv");
    write_manifest(f, manifest);
    out << "wrote " << o.count << " recordings (" << abnormal << " abnormal) to " << dir.string() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Heart-sound classification from MFCC heat maps"};
    app.require_subcommand(1, 1);
    Options o;

    auto* ingest = app.add_subcommand("ingest", "Validate WAVs and manifest; print a dataset summary");
    add_data_flags(ingest, o, false);

    auto* segment = app.add_subcommand("segment", "Write S1 onsets as CSV");
    add_data_flags(segment, o, true);

    auto* featurize = app.add_subcommand("featurize", "Write one .mfhm heat map per segment");
    add_data_flags(featurize, o, true);
    add_override_flags(featurize, o, false);

    auto* render = app.add_subcommand("render", "Render a heat map as a PPM image");
    render->add_option("--input", o.input, "Heat map (.mfhm)")->required();
    render->add_option("--out", o.out, "Output .ppm")->required();
    render->add_option("--scale", o.scale, "Integer upscaling factor");

    auto* train_cmd = app.add_subcommand("train", "Train; writes best.ckpt, last.ckpt and train_log.csv");
    add_data_flags(train_cmd, o, true);
    add_override_flags(train_cmd, o, true);
    train_cmd->add_option("--val-fraction", o.val_fraction, "Share of subjects for validation");
    train_cmd->add_option("--holdout-fraction", o.holdout_fraction, "Share of subjects held out");

    auto* predict = app.add_subcommand("predict", "Write record_id,predicted CSV");
    add_data_flags(predict, o, true);
    predict->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Predict a labeled set and print the challenge score");
    add_data_flags(evaluate, o, false);
    evaluate->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();

    auto* score = app.add_subcommand("score", "Score a predictions CSV, or combine --se and --sp");
    score->add_option("--se", o.se, "Sensitivity");
    score->add_option("--sp", o.sp, "Specificity");
    score->add_option("--predictions", o.predictions, "Predictions CSV");
    score->add_option("--manifest", o.manifest, "Manifest with truth and quality");

    auto* synth = app.add_subcommand("synth", "Write a synthetic labeled dataset");
    synth->add_option("--out", o.out, "Output directory")->required();
    synth->add_option("--count", o.count, "Number of recordings");
    synth->add_option("--abnormal-fraction", o.abnormal_fraction, "Share of abnormal recordings");
    synth->add_option("--duration", o.duration, "Seconds per recording");
    synth->add_option_function<std::string>("--seed", [&o](const std::string& v) { o.overrides["seed"] = v; },
                                            "Generator seed");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*ingest) cmd_ingest(o, out);
        else if (*segment) cmd_segment(o, out);
        else if (*featurize) cmd_featurize(o, out);
        else if (*render) cmd_render(o, out);
        else if (*train_cmd) cmd_train(o, out);
        else if (*predict) cmd_predict(o, out);
        else if (*evaluate) cmd_evaluate(o, out);
        else if (*score) cmd_score(o, out);
        else if (*synth) cmd_synth(o, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}

}  // namespace ausc::cli
