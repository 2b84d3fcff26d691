#include <doctest.h>

#include <sstream>

#include "ausc/error.hpp"
#include "ausc/scoring.hpp"

using namespace ausc;

TEST_CASE("reported overall scores") {
    CHECK(format_report(score_from(0.7278, 0.9521)) == "Se 0.7278 Sp 0.9521 Overall 0.8399");
    CHECK(format_report(score_from(0.6545, 0.7569)) == "Se 0.6545 Sp 0.7569 Overall 0.7057");
    CHECK(format_report(score_from(1, 1)) == "Se 1.0000 Sp 1.0000 Overall 1.0000");
    CHECK(format_report(score_from(0, 0)) == "Se 0.0000 Sp 0.0000 Overall 0.0000");
    CHECK(truncate4(0.83995) == 0.8399);
    CHECK(truncate4(0.70570) == 0.7057);
    CHECK(truncate4(0.99999) == 0.9999);
}

TEST_CASE("tally weights and cells") {
    std::vector<ScoredItem> items{{Label::Abnormal, Quality::Good, Verdict::Abnormal},
                                  {Label::Abnormal, Quality::Good, Verdict::Normal},
                                  {Label::Abnormal, Quality::Good, Verdict::Unsure},
                                  {Label::Abnormal, Quality::Poor, Verdict::Unsure}};
    const auto t = tally(items);
    CHECK(t.weights.wa1 == 0.75);
    CHECK(t.weights.wa2 == 0.25);
    CHECK(t.counts.Aa1 == 1);
    CHECK(t.counts.An1 == 1);
    CHECK(t.counts.Aq1 == 1);
    CHECK(t.counts.Aq2 == 1);
    // unsure counts as correct only on the poor recording
    const auto s = challenge_score(t.counts, t.weights);
    CHECK(s.se == doctest::Approx(0.75 / 3 + 0.25));

    const std::vector<ScoredItem> one{{Label::Abnormal, Quality::Good, Verdict::Abnormal}};
    ChallengeCounts want;
    want.Aa1 = 1;
    CHECK(tally(one).counts == want);

    const std::vector<ScoredItem> bad{{Label::Normal, Quality::Unknown, Verdict::Normal}};
    CHECK_THROWS_AS(tally(bad), TallyError);
}

TEST_CASE("all correct scores one") {
    std::vector<ScoredItem> items{{Label::Abnormal, Quality::Good, Verdict::Abnormal},
                                  {Label::Abnormal, Quality::Poor, Verdict::Abnormal},
                                  {Label::Normal, Quality::Good, Verdict::Normal},
                                  {Label::Normal, Quality::Poor, Verdict::Normal},
                                  {Label::Normal, Quality::Poor, Verdict::Normal}};
    const auto t = tally(items);
    const auto s = challenge_score(t.counts, t.weights);
    CHECK(s.se == 1.0);
    CHECK(s.sp == 1.0);
    CHECK(s.overall == 1.0);

    QualityWeights w{1, 0, 1, 0};
    CHECK_THROWS_AS(challenge_score(ChallengeCounts{}, w), ScoreError);
}

TEST_CASE("predictions file") {
    const std::vector<PredictionRow> rows{{"a", Verdict::Abnormal}, {"b", Verdict::Unsure}, {"c", Verdict::Normal}};
    std::stringstream io;
    write_predictions(io, rows);
    CHECK(io.str() == "record_id,predicted\na,a\nb,q\nc,n\n");
    const auto back = read_predictions(io);
    REQUIRE(back.size() == 3);
    CHECK(back[1].predicted == Verdict::Unsure);

    std::stringstream bad("record_id,predicted\nx,z\n");
    CHECK_THROWS_AS(read_predictions(bad), FormatError);

    DatasetManifest m{{{"a", "a.wav", Label::Abnormal, Quality::Good, "s"}}};
    const std::vector<PredictionRow> known{{"a", Verdict::Abnormal}};
    CHECK(join_predictions(known, m).size() == 1);
    CHECK_THROWS_AS(join_predictions(rows, m), TallyError);
    CHECK(verdict_of(Label::Abnormal) == Verdict::Abnormal);
}
