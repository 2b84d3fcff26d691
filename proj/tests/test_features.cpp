#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ausc/error.hpp"
#include "ausc/features.hpp"
#include "naive_mfcc.hpp"

using namespace ausc;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("window geometry") {
    const MfccConfig cfg;
    CHECK(cfg.window_count() == 300);
    CHECK(cfg.window_samples(2000) == 50);
    CHECK(cfg.step_samples(2000) == 20);
    CHECK(cfg.segment_samples(2000) == 6000);
    CHECK(cfg.dft_size(2000) == 64);
    const auto w = frame_windows(std::vector<double>(6000, 1.0), cfg, 2000);
    CHECK(w.shape() == Shape{300, 50});
    CHECK(w.at(299, 0) == 1.0);
    CHECK(w.at(299, 49) == 0.0);  // past the end of the segment
}

TEST_CASE("dft power") {
    const MfccConfig cfg;
    const auto h = hamming_window(50);
    std::vector<double> impulse(50, 0.0);
    impulse[17] = 1.0;
    const auto p = dft_power(impulse, cfg, 2000);
    REQUIRE(p.size() == 64);
    for (double v : p) CHECK(v == doctest::Approx(h[17] * h[17] / 50).epsilon(1e-12));

    for (double v : dft_power(std::vector<double>(50, 0.0), cfg, 2000)) CHECK(v == 0.0);

    const oracle::NaiveMfcc naive;
    const auto x = random_vector(50, 11);
    const auto got = dft_power(x, cfg, 2000);
    const auto want = naive.power(x);
    for (std::size_t k = 0; k < 64; ++k) CHECK(std::abs(got[k] - want[k]) <= 1e-10 * std::max(1.0, std::abs(want[k])));
}

TEST_CASE("mel scale and filterbank") {
    CHECK(hz_to_mel(0) == 0.0);
    CHECK(hz_to_mel(700) == doctest::Approx(1125 * std::log(2.0)).epsilon(1e-14));
    CHECK(hz_to_mel(700) == doctest::Approx(779.8).epsilon(1e-4));
    CHECK(mel_to_hz(hz_to_mel(123.4)) == doctest::Approx(123.4).epsilon(1e-12));

    const MfccConfig cfg;
    const auto fb = build_mel_filterbank(cfg, 2000);
    REQUIRE(fb.shape() == Shape{26, 64});
    const oracle::NaiveMfcc naive;
    for (std::size_t j = 0; j < 26; ++j) {
        for (std::size_t k = 0; k < 64; ++k) {
            CHECK(fb.at(j, k) >= 0.0);
            CHECK(fb.at(j, k) <= 1.0);
            CHECK(std::abs(fb.at(j, k) - naive.weight(j, k)) < 1e-12);
        }
    }
    const auto e = log_filter_energies(std::vector<double>(64, 1.0), fb);
    for (std::size_t j = 0; j < 26; ++j) {
        double row = 0;
        for (std::size_t k = 0; k < 64; ++k) row += fb.at(j, k);
        CHECK(e[j] == std::log(row + kLogFloor));
    }
    for (double v : log_filter_energies(std::vector<double>(64, 0.0), fb)) CHECK(v == std::log(kLogFloor));

    const auto p = random_vector(64, 5, 0, 3);
    const auto got = log_filter_energies(p, fb);
    const auto want = naive.log_energies(p);
    for (std::size_t j = 0; j < 26; ++j) CHECK(std::abs(got[j] - want[j]) < 1e-12);

    MfccConfig bad;
    bad.freq_high = 1500;
    CHECK_THROWS_AS(build_mel_filterbank(bad, 2000), ConfigError);
}

TEST_CASE("dct") {
    const auto flat = dct_coefficients(std::vector<double>(26, 2.5), 26, 1);
    REQUIRE(flat.size() == 26);
    for (double v : flat) CHECK(std::abs(v) < 1e-12);

    oracle::NaiveMfcc naive;
    naive.kept = 26;
    const auto e = random_vector(26, 9, -5, 5);
    const auto got = dct_coefficients(e, 26, 1);
    const auto want = naive.dct(e);
    for (std::size_t k = 0; k < 26; ++k) CHECK(std::abs(got[k] - want[k]) < 1e-12);
}

TEST_CASE("heat map matches the naive pipeline") {
    const MfccConfig cfg;
    const MfccExtractor ex(cfg, 2000);
    const oracle::NaiveMfcc naive;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto x = random_vector(6000, 100 + seed);
        const auto got = ex.compute(x);
        REQUIRE(got.shape() == Shape{6, 300});
        const auto want = naive.heatmap(x);
        double worst = 0;
        for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("heat map of silence and of a steady tone") {
    const MfccConfig cfg;
    const MfccExtractor ex(cfg, 2000);
    const auto zero = ex.compute(std::vector<double>(6000, 0.0));
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t c = 1; c < 300; ++c) CHECK(zero.at(r, c) == zero.at(r, 0));

    std::vector<double> tone(6000);
    for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = 0.5 * std::sin(2 * std::numbers::pi * 100 * double(i) / 2000);
    const auto t = ex.compute(tone);
    double lo = t[0], hi = t[0], dev = 0;
    for (double v : t.vec()) lo = std::min(lo, v), hi = std::max(hi, v);
    // the last windows run past the segment end and are zero-padded
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t c = 1; c < 298; ++c) dev = std::max(dev, std::abs(t.at(r, c) - t.at(r, 0)));
    CHECK(dev < 0.1 * (hi - lo));
}

TEST_CASE("segment_to_heatmap carries metadata") {
    Segment s{"rec", 40, std::vector<double>(6000, 0.1), Label::Abnormal, Quality::Poor};
    const auto m = segment_to_heatmap(s, MfccConfig{}, 2000);
    CHECK(m.rows() == 6);
    CHECK(m.cols() == 300);
    CHECK(m.source_id == "rec");
    CHECK(m.start_sample == 40);
    CHECK(m.label == Label::Abnormal);
    CHECK(m.quality == Quality::Poor);
}

TEST_CASE("standardize") {
    MfccHeatMap a{Tensor<double>({2, 2}, std::vector<double>{5, 5, 0, 2})};
    MfccHeatMap b{Tensor<double>({2, 2}, std::vector<double>{5, 5, 2, 0})};
    auto [out, stats] = standardize({a, b}, std::nullopt);
    CHECK(stats.mean[1] == 1.0);
    CHECK(stats.std[1] == 1.0);
    CHECK(out[0].values.at(1, 0) == -1.0);
    CHECK(out[0].values.at(1, 1) == 1.0);
    CHECK(stats.std[0] == 0.0);
    CHECK(out[1].values.at(0, 0) == 0.0);

    std::vector<MfccHeatMap> maps;
    for (std::uint64_t s = 0; s < 4; ++s) maps.push_back({Tensor<double>({3, 10}, random_vector(30, s, -4, 7))});
    auto [fit, st] = standardize(maps, std::nullopt);
    auto [applied, st2] = standardize(maps, st);
    CHECK(st2 == st);
    for (std::size_t r = 0; r < 3; ++r) {
        double m = 0;
        for (const auto& x : applied)
            for (std::size_t c = 0; c < 10; ++c) m += x.values.at(r, c);
        CHECK(std::abs(m / 40) < 1e-9);
    }
}

TEST_CASE("heat map file round trip and rendering") {
    auto v = random_vector(1800, 4);
    for (auto& x : v) x = double(float(x));  // the file stores float32
    MfccHeatMap m{Tensor<double>({6, 300}, v), "id_7", 120, Label::Abnormal, Quality::Good};
    std::stringstream io;
    write_heatmap(io, m);
    CHECK(io.str().size() == 4 + 2 + 4 + 4 + 1 + 1 + 1800 * 4);
    const auto back = read_heatmap(io);
    CHECK(back.values == m.values);
    CHECK(back.label == Label::Abnormal);
    CHECK(back.quality == Quality::Good);

    std::stringstream junk("NOPE");
    CHECK_THROWS_AS(read_heatmap(junk), FormatError);

    const auto ppm = render_ppm(m, 1);
    const std::string head(ppm.begin(), ppm.begin() + 13);
    CHECK(head == "P6\n300 6\n255\n");
    CHECK(ppm.size() == 13 + 300 * 6 * 3);
    const auto big = render_ppm(m, 3);
    CHECK(std::string(big.begin(), big.begin() + 14) == "P6\n900 18\n255\n");
    CHECK(color_ramp(-1) == color_ramp(0));
    CHECK(color_ramp(2) == color_ramp(1));
}
