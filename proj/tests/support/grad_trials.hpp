#pragma once

// Randomized finite-difference trials for every layer, the composed network
// and the frozen-mask loss. Each returns the worst relative error seen.

#include <cmath>
#include <random>

#include "ausc/layers.hpp"
#include "ausc/network.hpp"
#include "ausc/sesp_loss.hpp"
#include "finite_diff.hpp"

namespace oracle {

using ausc::Shape;
using ausc::Tensor;

inline Tensor<double> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<double> t(std::move(s));
    for (auto& v : t.vec()) v = u(rng);
    return t;
}

inline double inner(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

template <typename F>
double worst_error(Tensor<double>& x, const Tensor<double>& analytic, F&& loss, double h = 1e-6) {
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double num = central_difference(loss, x[i], h);
        worst = std::max(worst, rel_error(analytic[i], num, 1e-7));
    }
    return worst;
}

inline double conv_trials(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> d(1, 3), wd(2, 8);
    double worst = 0;
    for (int t = 0; t < n; ++t) {
        const std::size_t cin = d(rng), cout = d(rng), h = d(rng) + 1, w = wd(rng);
        auto x = random_tensor({cin, h, w}, rng);
        auto k = random_tensor({cout, cin, std::min(d(rng), h), std::min(d(rng) + 1, w)}, rng);
        auto b = random_tensor({cout}, rng);
        const auto up = random_tensor({cout, h, w}, rng);
        auto loss = [&] { return inner(ausc::conv2d(x, k, b), up); };
        const auto g = ausc::conv2d_backward(x, k, up);
        worst = std::max({worst, worst_error(x, g.input, loss), worst_error(k, g.kernels, loss),
                          worst_error(b, g.bias, loss)});
    }
    return worst;
}

inline double pool_trials(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> d(1, 3), wd(3, 16);
    double worst = 0;
    for (int t = 0; t < n; ++t) {
        auto x = random_tensor({d(rng), d(rng), wd(rng)}, rng);
        const ausc::PoolSpec p{d(rng), d(rng) + 1, d(rng), d(rng)};
        const auto fwd = ausc::maxpool2d(x, p);
        const auto up = random_tensor(fwd.output.shape(), rng);
        const auto g = ausc::maxpool2d_backward(fwd, up);
        worst = std::max(worst, worst_error(x, g, [&] { return inner(ausc::maxpool2d(x, p).output, up); }));
    }
    return worst;
}

inline double dense_trials(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> d(1, 6);
    double worst = 0;
    for (int t = 0; t < n; ++t) {
        const std::size_t bs = d(rng), in = d(rng), out = d(rng);
        auto x = random_tensor({bs, in}, rng), w = random_tensor({in, out}, rng), b = random_tensor({out}, rng);
        const auto up = random_tensor({bs, out}, rng);
        const auto g = ausc::dense_backward(x, w, up);
        auto loss = [&] { return inner(ausc::dense(x, w, b), up); };
        worst = std::max({worst, worst_error(x, g.input, loss), worst_error(w, g.weights, loss),
                          worst_error(b, g.bias, loss)});
    }
    return worst;
}

inline double relu_trials(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0;
    for (int t = 0; t < n; ++t) {
        auto x = random_tensor({10}, rng);
        for (auto& v : x.vec())
            if (std::abs(v) < 1e-6) v = 0.5;
        const auto up = random_tensor({10}, rng);
        const auto g = ausc::relu_backward(x, up);
        worst = std::max(worst, worst_error(x, g, [&] { return inner(ausc::relu(x), up); }, 1e-7));
    }
    return worst;
}

inline double dropout_trials(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0;
    for (int t = 0; t < n; ++t) {
        auto x = random_tensor({12}, rng);
        const auto up = random_tensor({12}, rng);
        auto fwd = [&] {
            ausc::Rng r(seed + std::uint64_t(t));
            return ausc::dropout(x, 0.7, ausc::Mode::Train, r);
        };
        const auto g = ausc::dropout_backward(fwd().mask, up);
        worst = std::max(worst, worst_error(x, g, [&] { return inner(fwd().output, up); }));
    }
    return worst;
}

inline double softmax_trials(int n, std::uint64_t seed) {
    // d/dz <softmax(z), u> = p * (u - <p, u>)
    std::mt19937_64 rng(seed);
    double worst = 0;
    for (int t = 0; t < n; ++t) {
        auto z = random_tensor({3, 2}, rng, -3, 3);
        const auto up = random_tensor({3, 2}, rng);
        const auto p = ausc::softmax(z);
        Tensor<double> g(z.shape());
        for (std::size_t r = 0; r < 3; ++r) {
            const double pu = p.at(r, 0) * up.at(r, 0) + p.at(r, 1) * up.at(r, 1);
            for (std::size_t c = 0; c < 2; ++c) g.at(r, c) = p.at(r, c) * (up.at(r, c) - pu);
        }
        worst = std::max(worst, worst_error(z, g, [&] { return inner(ausc::softmax(z), up); }));
    }
    return worst;
}

inline ausc::Architecture tiny_architecture() {
    ausc::Architecture a;
    a.in_h = 3;
    a.in_w = 6;
    a.conv1_channels = a.conv2_channels = 2;
    a.conv1_kh = a.conv1_kw = a.conv2_kh = a.conv2_kw = 2;
    a.pool1 = a.pool2 = {1, 2, 1, 2};
    a.fc1_units = 4;
    a.fc2_units = 3;
    a.classes = 2;
    return a;
}

inline double network_trials(int n, std::uint64_t seed) {
    const auto a = tiny_architecture();
    double worst = 0;
    for (int t = 0; t < n; ++t) {
        std::mt19937_64 rng(seed + std::uint64_t(t));
        ausc::NetworkParams<double> p{a, ausc::ParamTensors<double>::zeros(a), {}, {}, {}};
        p.hyper.keep_prob = 0.75;
        p.tensors.for_each([&](auto, Tensor<double>& w, bool) { w = random_tensor(w.shape(), rng); });
        const auto x = random_tensor({2, 3, 6}, rng);
        const auto up = random_tensor({2, 2}, rng);
        auto forward = [&] {
            ausc::Rng r(seed + std::uint64_t(t));
            return ausc::network_forward(x, p, ausc::Mode::Train, r);
        };
        const auto grads = ausc::network_backward(forward(), up, p);
        for (const auto& e : ausc::ParamTensors<double>::entries) {
            worst = std::max(worst, worst_error(p.tensors.*e.member, grads.*e.member,
                                                [&] { return inner(forward().logits, up); }));
        }
    }
    return worst;
}

inline double loss_trials(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> rows(1, 10);
    const auto params = ausc::ParamTensors<double>::zeros(tiny_architecture());
    double worst = 0;
    for (int t = 0; t < n; ++t) {
        const std::size_t r = rows(rng);
        auto z = random_tensor({r, 2}, rng, -3, 3);
        std::vector<int> y(r);
        for (auto& v : y) v = int(rng() % 2);
        // frozen masks: correctness from the unperturbed logits
        std::vector<bool> ok(r);
        double na = 0, nn = 0;
        for (std::size_t i = 0; i < r; ++i) {
            ok[i] = (z.at(i, 1) > z.at(i, 0) ? 1 : 0) == y[i];
            (y[i] ? na : nn) += 1;
        }
        auto objective = [&] {
            double se = 0, sp = 0;
            for (std::size_t i = 0; i < r; ++i) {
                if (!ok[i]) continue;
                const double e0 = std::exp(z.at(i, 0)), e1 = std::exp(z.at(i, 1));
                (y[i] ? se : sp) += (y[i] ? e1 : e0) / (e0 + e1);
            }
            return -((na > 0 ? se / na : 1.0) + (nn > 0 ? sp / nn : 1.0));
        };
        const auto rep = ausc::sesp_loss(ausc::make_batch(z, y), params, 0.0);
        double w = 0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double num = central_difference(objective, z[i], 1e-5);
            w = std::max(w, rel_error(rep.logit_gradient[i], num, 1e-8));
        }
        worst = std::max(worst, w);
    }
    return worst;
}

}  // namespace oracle
