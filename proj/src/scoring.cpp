#include "ausc/scoring.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "ausc/error.hpp"
#include "ausc/text.hpp"

namespace ausc {

char to_char(Verdict v) {
    switch (v) {
        case Verdict::Abnormal: return 'a';
        case Verdict::Unsure: return 'q';
        case Verdict::Normal: return 'n';
    }
    return '?';
}

Verdict parse_verdict(const std::string& s) {
    const auto t = text::lower(text::trim(s));
    if (t == "a") return Verdict::Abnormal;
    if (t == "q") return Verdict::Unsure;
    if (t == "n") return Verdict::Normal;
    throw FormatError("prediction must be a, q or n, got '" + s + "'");
}

Verdict verdict_of(Label predicted) {
    if (predicted == Label::Unknown) throw TallyError("a prediction cannot be unknown");
    return predicted == Label::Abnormal ? Verdict::Abnormal : Verdict::Normal;
}

Tally tally(std::span<const ScoredItem> items) {
    Tally t;
    auto& c = t.counts;
    std::size_t a_good = 0, a_poor = 0, n_good = 0, n_poor = 0;
    for (const auto& it : items) {
        if (it.truth == Label::Unknown) throw TallyError("scoring needs a known label for every recording");
        if (it.quality == Quality::Unknown) throw TallyError("scoring needs a known quality for every recording");
        const bool good = it.quality == Quality::Good;
        if (it.truth == Label::Abnormal) {
            ++(good ? a_good : a_poor);
            switch (it.predicted) {
                case Verdict::Abnormal: ++(good ? c.Aa1 : c.Aa2); break;
                case Verdict::Unsure: ++(good ? c.Aq1 : c.Aq2); break;
                case Verdict::Normal: ++(good ? c.An1 : c.An2); break;
            }
        } else {
            ++(good ? n_good : n_poor);
            switch (it.predicted) {
                case Verdict::Abnormal: ++(good ? c.Na1 : c.Na2); break;
                case Verdict::Unsure: ++(good ? c.Nq1 : c.Nq2); break;
                case Verdict::Normal: ++(good ? c.Nn1 : c.Nn2); break;
            }
        }
    }
    const double a = double(a_good + a_poor), n = double(n_good + n_poor);
    if (a > 0) {
        t.weights.wa1 = double(a_good) / a;
        t.weights.wa2 = double(a_poor) / a;
    }
    if (n > 0) {
        t.weights.wn1 = double(n_good) / n;
        t.weights.wn2 = double(n_poor) / n;
    }
    return t;
}

namespace {

double term(double weight, std::size_t num, std::size_t den, const char* what) {
    if (weight == 0) return 0;
    if (den == 0) throw ScoreError(std::string("zero denominator for weighted term ") + what);
    return weight * double(num) / double(den);
}

}  // namespace

ScoreReport challenge_score(const ChallengeCounts& c, const QualityWeights& w) {
    const double se = term(w.wa1, c.Aa1, c.Aa1 + c.Aq1 + c.An1, "wa1") +
                      term(w.wa2, c.Aa2 + c.Aq2, c.Aa2 + c.Aq2 + c.An2, "wa2");
    const double sp = term(w.wn1, c.Nn1, c.Na1 + c.Nq1 + c.Nn1, "wn1") +
                      term(w.wn2, c.Nn2 + c.Nq2, c.Na2 + c.Nq2 + c.Nn2, "wn2");
    return score_from(se, sp);
}

ScoreReport score_from(double se, double sp) { return {se, sp, (se + sp) / 2}; }

double truncate4(double v) {
    const double t = std::trunc(v * 1e4 + (v >= 0 ? 1e-9 : -1e-9)) / 1e4;
    return t == 0 ? 0.0 : t;
}

std::string format_report(const ScoreReport& r) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "Se %.4f Sp %.4f Overall %.4f", truncate4(r.se), truncate4(r.sp),
                  truncate4(r.overall));
    return buf;
}

std::vector<PredictionRow> read_predictions(std::istream& in) {
    std::vector<PredictionRow> rows;
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "record_id,predicted") {
        throw FormatError("predictions file must start with record_id,predicted");
    }
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        const auto f = text::split(text::trim(line), ',');
        if (f.size() != 2) throw FormatError("predictions line " + std::to_string(n) + ": expected 2 fields");
        rows.push_back({text::trim(f[0]), parse_verdict(f[1])});
    }
    return rows;
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open predictions " + path.string());
    return read_predictions(in);
}

void write_predictions(std::ostream& out, std::span<const PredictionRow> rows) {
    out << "record_id,predicted\n";
    for (const auto& r : rows) out << r.record_id << ',' << to_char(r.predicted) << '\n';
}

std::vector<ScoredItem> join_predictions(std::span<const PredictionRow> rows, const DatasetManifest& manifest) {
    std::vector<ScoredItem> items;
    items.reserve(rows.size());
    for (const auto& r : rows) {
        const auto* e = manifest.find(r.record_id);
        if (!e) throw TallyError("prediction for '" + r.record_id + "' has no manifest entry");
        items.push_back({e->label, e->quality, r.predicted});
    }
    return items;
}

}  // namespace ausc
