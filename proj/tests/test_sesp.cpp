#include <doctest.h>

#include <cmath>
#include <random>

#include "ausc/error.hpp"
#include "ausc/sesp_loss.hpp"
#include "finite_diff.hpp"

using namespace ausc;

namespace {

Architecture tiny_arch() {
    Architecture a;
    a.in_h = 3;
    a.in_w = 6;
    a.conv1_channels = a.conv2_channels = 2;
    a.conv1_kh = a.conv1_kw = a.conv2_kh = a.conv2_kw = 2;
    a.pool1 = a.pool2 = {1, 2, 1, 2};
    a.fc1_units = 4;
    a.fc2_units = 3;
    return a;
}

Tensor<double> logits_for(const std::vector<std::array<double, 2>>& probs) {
    Tensor<double> z({probs.size(), 2});
    for (std::size_t r = 0; r < probs.size(); ++r) {
        z.at(r, 0) = std::log(probs[r][0]);
        z.at(r, 1) = std::log(probs[r][1]);
    }
    return z;
}

// Frozen-mask objective written from the definition with its own softmax.
struct FrozenObjective {
    std::vector<int> labels;
    std::vector<bool> correct;
    double n_abn = 0, n_nor = 0;

    FrozenObjective(const Tensor<double>& z, std::vector<int> y) : labels(std::move(y)) {
        for (std::size_t r = 0; r < labels.size(); ++r) {
            const int pred = z.at(r, 1) > z.at(r, 0) ? 1 : 0;
            correct.push_back(pred == labels[r]);
            (labels[r] ? n_abn : n_nor) += 1;
        }
    }
    double operator()(const Tensor<double>& z) const {
        double se = 0, sp = 0;
        for (std::size_t r = 0; r < labels.size(); ++r) {
            if (!correct[r]) continue;
            const double e0 = std::exp(z.at(r, 0)), e1 = std::exp(z.at(r, 1));
            if (labels[r]) se += e1 / (e0 + e1);
            else sp += e0 / (e0 + e1);
        }
        se = n_abn > 0 ? se / n_abn : 1.0;
        sp = n_nor > 0 ? sp / n_nor : 1.0;
        return -(se + sp);
    }
};

}  // namespace

TEST_CASE("mask entries") {
    const auto b = make_batch(logits_for({{0.1, 0.9}, {0.7, 0.3}, {0.5, 0.5}}), {1, 1, 0});
    const auto m = build_masks(b);
    CHECK(m.aa[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(m.nn[0] == 0.0);
    CHECK(m.aa[1] == 0.0);
    CHECK(m.nn[1] == 0.0);
    CHECK(m.nn[2] == 0.5);
    CHECK(m.aa[2] == 0.0);
    CHECK(predicted_class(b.probabilities, 2) == kNormal);
}

TEST_CASE("softmax sensitivity and specificity") {
    auto v = sesp_values(make_batch(logits_for({{0.9, 0.1}, {0.1, 0.9}}), {0, 1}));
    CHECK(v.sp == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(v.se == doctest::Approx(0.9).epsilon(1e-12));

    v = sesp_values(make_batch(logits_for({{0.2, 0.8}, {0.6, 0.4}}), {0, 1}));
    CHECK(v.se == 0.0);
    CHECK(v.sp == 0.0);

    Tensor<double> z({4, 2});
    for (std::size_t r = 0; r < 4; ++r) z.at(r, 1) = 60;
    v = sesp_values(make_batch(z, {1, 1, 1, 1}));
    CHECK(v.se == 1.0);
    CHECK(v.abnormal_rows == 4);
    CHECK(v.normal_rows == 0);

    CHECK_THROWS_AS(make_batch(z, {1, 1, 2, 1}), ShapeError);
    CHECK_THROWS_AS(make_batch(z, {1, 1}), ShapeError);
}

TEST_CASE("l2 penalty") {
    const Architecture a = tiny_arch();
    auto p = ParamTensors<double>::zeros(a);
    CHECK(l2_value(p, 0.1) == 0.0);
    p.fc1_w[0] = 3;
    p.conv1_w[0] = 5;  // conv weights carry no penalty
    const auto r = l2_penalty(p, 0.1);
    CHECK(r.value == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(r.gradient.fc1_w[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r.gradient.conv1_w[0] == 0.0);
    CHECK(l2_value(p, 0.1) == r.value);
    auto g = ParamTensors<double>::zeros(a);
    add_l2_gradient(g, p, 0.1);
    CHECK(g == r.gradient);
}

TEST_CASE("loss extremes") {
    const Architecture a = tiny_arch();
    auto p = ParamTensors<double>::zeros(a);
    Tensor<double> perfect({4, 2});
    perfect.at(0, 0) = 50, perfect.at(1, 0) = 50, perfect.at(2, 1) = 50, perfect.at(3, 1) = 50;
    CHECK(sesp_loss(make_batch(perfect, {0, 0, 1, 1}), p, 0.0).total == -2.0);
    CHECK(sesp_loss(make_batch(perfect, {1, 1, 0, 0}), p, 0.0).total == 0.0);

    p.out_w[1] = 2;
    const double lr = l2_value(p, 0.01);
    CHECK(lr > 0);
    CHECK(sesp_loss(make_batch(perfect, {0, 0, 1, 1}), p, 0.01).total == -2.0 + lr);
    CHECK(sesp_loss(make_batch(perfect, {1, 1, 0, 0}), p, 0.01).total == lr);
}

TEST_CASE("loss stays in range on random batches") {
    const Architecture a = tiny_arch();
    const auto p = ParamTensors<double>::zeros(a);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-8, 8);
    std::uniform_int_distribution<std::size_t> n(1, 40);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t rows = n(rng);
        Tensor<double> z({rows, 2});
        std::vector<int> y(rows);
        for (auto& v : z.vec()) v = u(rng);
        for (auto& l : y) l = int(rng() % 2);
        const auto r = sesp_loss(make_batch(z, y), p, 0.5);
        CHECK(r.total - r.penalty >= -2.0);
        CHECK(r.total - r.penalty <= 0.0);
    }
}

TEST_CASE("logit gradient matches finite differences with frozen masks") {
    const Architecture a = tiny_arch();
    const auto p = ParamTensors<double>::zeros(a);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-3, 3);
    std::uniform_int_distribution<std::size_t> n(1, 12);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t rows = n(rng);
        Tensor<double> z({rows, 2});
        std::vector<int> y(rows);
        for (auto& v : z.vec()) v = u(rng);
        for (auto& l : y) l = int(rng() % 2);
        const FrozenObjective f(z, y);
        const auto r = sesp_loss(make_batch(z, y), p, 0.0);
        CHECK(r.total == doctest::Approx(f(z)).epsilon(1e-12));
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double num = oracle::central_difference([&] { return f(z); }, z[i], 1e-5);
            CHECK(oracle::rel_error(r.logit_gradient[i], num, 1e-8) < 1e-6);
        }
    }
}
