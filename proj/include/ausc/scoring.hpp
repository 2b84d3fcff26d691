#pragma once

// Challenge scoring with quality-weighted sensitivity and specificity:
//   Se = wa1 Aa1 / (Aa1 + Aq1 + An1) + wa2 (Aa2 + Aq2) / (Aa2 + Aq2 + An2)
//   Sp = wn1 Nn1 / (Na1 + Nq1 + Nn1) + wn2 (Nn2 + Nq2) / (Na2 + Nq2 + Nn2)
// An unsure answer counts as correct only on poor-quality recordings.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ausc/pcg_io.hpp"

namespace ausc {

enum class Verdict { Abnormal, Unsure, Normal };

char to_char(Verdict v);
Verdict parse_verdict(const std::string& s);  // "a", "q" or "n"; throws FormatError
Verdict verdict_of(Label predicted);

struct ScoredItem {
    Label truth = Label::Unknown;
    Quality quality = Quality::Unknown;
    Verdict predicted = Verdict::Normal;
};

struct ChallengeCounts {
    std::size_t Aa1 = 0, Aq1 = 0, An1 = 0, Aa2 = 0, Aq2 = 0, An2 = 0;
    std::size_t Na1 = 0, Nq1 = 0, Nn1 = 0, Na2 = 0, Nq2 = 0, Nn2 = 0;
    friend bool operator==(const ChallengeCounts&, const ChallengeCounts&) = default;
};

struct QualityWeights {
    double wa1 = 0, wa2 = 0, wn1 = 0, wn2 = 0;
};

struct Tally {
    ChallengeCounts counts;
    QualityWeights weights;
};

/// Counts plus weights from the true label/quality marginals. Throws
/// TallyError for an item with unknown label or quality.
Tally tally(std::span<const ScoredItem> items);

struct ScoreReport {
    double se = 0, sp = 0, overall = 0;
};

/// Throws ScoreError when a term with nonzero weight has a zero denominator.
ScoreReport challenge_score(const ChallengeCounts& c, const QualityWeights& w);
ScoreReport score_from(double se, double sp);

/// Truncation toward zero at 4 decimals. A 1e-9 guard absorbs binary
/// representation error, so 0.7057 stays 0.7057.
double truncate4(double v);

/// "Se 0.7278 Sp 0.9521 Overall 0.8399"
std::string format_report(const ScoreReport& r);

// --- predictions file: `record_id,predicted` ----------------------------------

struct PredictionRow {
    std::string record_id;
    Verdict predicted = Verdict::Normal;
};

std::vector<PredictionRow> read_predictions(std::istream& in);
std::vector<PredictionRow> read_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, std::span<const PredictionRow> rows);

/// Joins predictions with manifest truth/quality. Throws TallyError for a
/// prediction whose id is not in the manifest.
std::vector<ScoredItem> join_predictions(std::span<const PredictionRow> rows, const DatasetManifest& manifest);

}  // namespace ausc
