#include "ausc/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ausc {

void Architecture::validate() const {
    const std::size_t dims[] = {in_h, in_w, conv1_channels, conv1_kh, conv1_kw, conv2_channels, conv2_kh, conv2_kw,
                                fc1_units, fc2_units, classes, pool1.ph, pool1.pw, pool1.sh, pool1.sw,
                                pool2.ph, pool2.pw, pool2.sh, pool2.sw};
    for (auto d : dims) {
        if (d == 0) throw ConfigError("architecture extents must be positive");
    }
}

template <typename T>
ParamTensors<T> ParamTensors<T>::zeros(const Architecture& a) {
    a.validate();
    ParamTensors p;
    p.conv1_w = Tensor<T>({a.conv1_channels, 1, a.conv1_kh, a.conv1_kw});
    p.conv1_b = Tensor<T>({a.conv1_channels});
    p.conv2_w = Tensor<T>({a.conv2_channels, a.conv1_channels, a.conv2_kh, a.conv2_kw});
    p.conv2_b = Tensor<T>({a.conv2_channels});
    p.fc1_w = Tensor<T>({a.flatten_size(), a.fc1_units});
    p.fc1_b = Tensor<T>({a.fc1_units});
    p.fc2_w = Tensor<T>({a.fc1_units, a.fc2_units});
    p.fc2_b = Tensor<T>({a.fc2_units});
    p.out_w = Tensor<T>({a.fc2_units, a.classes});
    p.out_b = Tensor<T>({a.classes});
    return p;
}

template <typename T>
ParamTensors<T> init_params(const Architecture& arch, std::uint64_t seed) {
    auto p = ParamTensors<T>::zeros(arch);
    Rng rng(seed);
    auto fill = [&](Tensor<T>& w, std::size_t fan_in) {
        const double limit = std::sqrt(6.0 / double(fan_in));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (auto& v : w.vec()) v = static_cast<T>(u(rng));
    };
    fill(p.conv1_w, arch.conv1_kh * arch.conv1_kw);
    fill(p.conv2_w, arch.conv1_channels * arch.conv2_kh * arch.conv2_kw);
    fill(p.fc1_w, arch.flatten_size());
    fill(p.fc2_w, arch.fc1_units);
    fill(p.out_w, arch.fc2_units);
    return p;
}

namespace {

template <typename T>
Tensor<T> slice(const Tensor<T>& batch, std::size_t b, Shape shape) {
    const std::size_t n = shape_size(shape);
    return Tensor<T>(std::move(shape), std::vector<T>(batch.data() + b * n, batch.data() + (b + 1) * n));
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
    for (auto& v : t.vec()) v = v > T{0} ? v : T{0};
}

}  // namespace

template <typename T>
ForwardTrace<T> network_forward(const Tensor<T>& maps, const NetworkParams<T>& params, Mode mode, Rng& rng) {
    const auto& a = params.arch;
    const auto& w = params.tensors;
    std::size_t B;
    if (maps.rank() == 2) {
        require_shape(maps.shape(), {a.in_h, a.in_w}, "network_forward input");
        B = 1;
    } else if (maps.rank() == 3 && maps.dim(1) == a.in_h && maps.dim(2) == a.in_w) {
        B = maps.dim(0);
    } else {
        throw ShapeError("network_forward: expected B x " + std::to_string(a.in_h) + " x " + std::to_string(a.in_w) +
                         " maps, got " + shape_string(maps.shape()));
    }

    ForwardTrace<T> tr;
    tr.mode = mode;
    tr.batch = B;
    tr.input = maps.reshaped({B, a.in_h, a.in_w});

    const Shape p1 = a.pool1_shape(), p2 = a.pool2_shape();
    const std::size_t n1 = shape_size(p1), n2 = shape_size(p2), F = a.flatten_size();
    tr.pool1 = Tensor<T>({B, p1[0], p1[1], p1[2]});
    tr.pool2 = Tensor<T>({B, p2[0], p2[1], p2[2]});
    tr.pool1_argmax.resize(B * n1);
    tr.pool2_argmax.resize(B * n2);

    for (std::size_t b = 0; b < B; ++b) {
        auto x = slice(tr.input, b, a.input_shape());
        auto c1 = conv2d(x, w.conv1_w, w.conv1_b);
        relu_inplace(c1);
        auto r1 = maxpool2d(c1, a.pool1);
        std::copy(r1.output.vec().begin(), r1.output.vec().end(), tr.pool1.data() + b * n1);
        std::copy(r1.argmax.begin(), r1.argmax.end(), tr.pool1_argmax.begin() + static_cast<std::ptrdiff_t>(b * n1));

        auto c2 = conv2d(r1.output, w.conv2_w, w.conv2_b);
        relu_inplace(c2);
        auto r2 = maxpool2d(c2, a.pool2);
        std::copy(r2.output.vec().begin(), r2.output.vec().end(), tr.pool2.data() + b * n2);
        std::copy(r2.argmax.begin(), r2.argmax.end(), tr.pool2_argmax.begin() + static_cast<std::ptrdiff_t>(b * n2));

        if (b == 0) {
            tr.stage_shapes = {x.shape(), c1.shape(), r1.output.shape(), c2.shape(), r2.output.shape(), Shape{F}};
        }
    }

    const auto flat = tr.pool2.reshaped({B, F});
    tr.fc1 = relu(dense(flat, w.fc1_w, w.fc1_b));
    auto d1 = dropout(tr.fc1, params.hyper.keep_prob, mode, rng);
    tr.h1 = std::move(d1.output);
    tr.drop1_mask = std::move(d1.mask);

    tr.fc2 = relu(dense(tr.h1, w.fc2_w, w.fc2_b));
    auto d2 = dropout(tr.fc2, params.hyper.keep_prob, mode, rng);
    tr.h2 = std::move(d2.output);
    tr.drop2_mask = std::move(d2.mask);

    tr.logits = dense(tr.h2, w.out_w, w.out_b);
    tr.probabilities = softmax(tr.logits);
    tr.stage_shapes.push_back({a.fc1_units});
    tr.stage_shapes.push_back({a.fc2_units});
    tr.stage_shapes.push_back({a.classes});
    return tr;
}

template <typename T>
ParamTensors<T> network_backward(const ForwardTrace<T>& tr, const Tensor<T>& dlogits, const NetworkParams<T>& params) {
    if (tr.mode != Mode::Train) throw TraceError("network_backward needs a Train-mode trace");
    const auto& a = params.arch;
    const auto& w = params.tensors;
    const std::size_t B = tr.batch, F = a.flatten_size();
    require_shape(dlogits.shape(), tr.logits.shape(), "network_backward logit gradient");

    auto g = ParamTensors<T>::zeros(a);

    auto go = dense_backward(tr.h2, w.out_w, dlogits);
    g.out_w = std::move(go.weights);
    g.out_b = std::move(go.bias);
    auto dfc2 = relu_backward(tr.fc2, dropout_backward(tr.drop2_mask, std::move(go.input)));

    auto g2 = dense_backward(tr.h1, w.fc2_w, dfc2);
    g.fc2_w = std::move(g2.weights);
    g.fc2_b = std::move(g2.bias);
    auto dfc1 = relu_backward(tr.fc1, dropout_backward(tr.drop1_mask, std::move(g2.input)));

    const auto flat = tr.pool2.reshaped({B, F});
    auto g1 = dense_backward(flat, w.fc1_w, dfc1);
    g.fc1_w = std::move(g1.weights);
    g.fc1_b = std::move(g1.bias);
    const Tensor<T>& dflat = g1.input;

    const Shape p1 = a.pool1_shape(), c1s = a.conv1_shape(), c2s = a.conv2_shape();
    const std::size_t n1 = shape_size(p1), n2 = F;
    Conv2dGrads<T> gc1{Tensor<T>(), std::move(g.conv1_w), std::move(g.conv1_b)};
    Conv2dGrads<T> gc2{Tensor<T>(), std::move(g.conv2_w), std::move(g.conv2_b)};
    Tensor<T> dconv2(c2s), dconv1(c1s);
    for (std::size_t b = 0; b < B; ++b) {
        // pool2 + relu: a pooled cell passes gradient iff its value is > 0
        dconv2.fill(T{0});
        for (std::size_t i = 0; i < n2; ++i) {
            if (tr.pool2[b * n2 + i] > T{0}) dconv2[tr.pool2_argmax[b * n2 + i]] += dflat[b * n2 + i];
        }
        auto pool1_out = slice(tr.pool1, b, p1);
        conv2d_backward_accumulate(pool1_out, w.conv2_w, dconv2, gc2, true);

        dconv1.fill(T{0});
        for (std::size_t i = 0; i < n1; ++i) {
            if (tr.pool1[b * n1 + i] > T{0}) dconv1[tr.pool1_argmax[b * n1 + i]] += gc2.input[i];
        }
        auto x = slice(tr.input, b, a.input_shape());
        conv2d_backward_accumulate(x, w.conv1_w, dconv1, gc1, false);
    }
    g.conv1_w = std::move(gc1.kernels);
    g.conv1_b = std::move(gc1.bias);
    g.conv2_w = std::move(gc2.kernels);
    g.conv2_b = std::move(gc2.bias);
    return g;
}

template struct ParamTensors<float>;
template struct ParamTensors<double>;
template ParamTensors<float> init_params<float>(const Architecture&, std::uint64_t);
template ParamTensors<double> init_params<double>(const Architecture&, std::uint64_t);
template ForwardTrace<float> network_forward(const Tensor<float>&, const NetworkParams<float>&, Mode, Rng&);
template ForwardTrace<double> network_forward(const Tensor<double>&, const NetworkParams<double>&, Mode, Rng&);
template ParamTensors<float> network_backward(const ForwardTrace<float>&, const Tensor<float>&,
                                              const NetworkParams<float>&);
template ParamTensors<double> network_backward(const ForwardTrace<double>&, const Tensor<double>&,
                                               const NetworkParams<double>&);

}  // namespace ausc
