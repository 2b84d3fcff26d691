#pragma once

// Tensor-level layers with explicit forward/backward functions. The network
// composes these; tests drive them individually against loop oracles and
// finite differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "ausc/kernels.hpp"
#include "ausc/tensor.hpp"

namespace ausc {

enum class Mode { Train, Eval };

using Rng = std::mt19937_64;

// --- conv2d ----------------------------------------------------------------

template <typename T>
struct Conv2dGrads {
    Tensor<T> input;    // empty when not requested
    Tensor<T> kernels;
    Tensor<T> bias;
};

namespace detail {
inline void check_conv_shapes(const Shape& in, const Shape& k, const Shape& b) {
    if (in.size() != 3 || k.size() != 4 || b.size() != 1 || k[1] != in[0] || b[0] != k[0]) {
        throw ShapeError("conv2d: incompatible shapes input " + shape_string(in) + ", kernels " +
                         shape_string(k) + ", bias " + shape_string(b));
    }
}
}  // namespace detail

/// Same-padded stride-1 cross-correlation of a C_in x H x W input with
/// C_out x C_in x kh x kw kernels. Output is C_out x H x W.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias) {
    detail::check_conv_shapes(input.shape(), kernels.shape(), bias.shape());
    const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t cout = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
    const std::size_t ckk = cin * kh * kw, hw = h * w;

    std::vector<T> col(ckk * hw);
    kernels::omp::im2col(input.data(), cin, h, w, kh, kw, col.data());
    Tensor<T> out({cout, h, w});
    for (std::size_t co = 0; co < cout; ++co) std::fill_n(out.data() + co * hw, hw, bias[co]);
    kernels::omp::gemm(kernels::Trans::No, kernels::Trans::No, cout, hw, ckk, T{1}, kernels.data(), ckk,
                       col.data(), hw, T{1}, out.data(), hw);
    return out;
}

/// Gradients of conv2d given the forward input, the kernels, and the
/// upstream gradient (C_out x H x W).
template <typename T>
void conv2d_backward_accumulate(const Tensor<T>& input, const Tensor<T>& kernels,
                                const Tensor<T>& upstream, Conv2dGrads<T>& g, bool want_input_grad);

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                               const Tensor<T>& upstream, bool want_input_grad = true) {
    Conv2dGrads<T> g{Tensor<T>(), Tensor<T>::zeros_like(kernels), Tensor<T>({kernels.dim(0)})};
    conv2d_backward_accumulate(input, kernels, upstream, g, want_input_grad);
    return g;
}

/// Adds kernel/bias gradients into `g` (batch accumulation in call order) and
/// overwrites g.input when requested.
template <typename T>
void conv2d_backward_accumulate(const Tensor<T>& input, const Tensor<T>& kernels,
                                const Tensor<T>& upstream, Conv2dGrads<T>& g, bool want_input_grad) {
    detail::check_conv_shapes(input.shape(), kernels.shape(), Shape{kernels.dim(0)});
    const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t cout = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
    require_shape(upstream.shape(), {cout, h, w}, "conv2d_backward upstream");
    require_shape(g.kernels.shape(), kernels.shape(), "conv2d_backward kernel grad");
    const std::size_t ckk = cin * kh * kw, hw = h * w;

    std::vector<T> col(ckk * hw);
    kernels::omp::im2col(input.data(), cin, h, w, kh, kw, col.data());
    // dK += dOut * col^T
    kernels::omp::gemm(kernels::Trans::No, kernels::Trans::Yes, cout, ckk, hw, T{1}, upstream.data(), hw,
                       col.data(), hw, T{1}, g.kernels.data(), ckk);
    for (std::size_t co = 0; co < cout; ++co) {
        const T* u = upstream.data() + co * hw;
        T s{0};
        for (std::size_t i = 0; i < hw; ++i) s += u[i];
        g.bias[co] += s;
    }
    if (want_input_grad) {
        // dCol = K^T * dOut, then fold back.
        kernels::omp::gemm(kernels::Trans::Yes, kernels::Trans::No, ckk, hw, cout, T{1}, kernels.data(), ckk,
                           upstream.data(), hw, T{0}, col.data(), hw);
        g.input = Tensor<T>(input.shape());
        kernels::omp::col2im(col.data(), cin, h, w, kh, kw, g.input.data());
    }
}

// --- max pooling -------------------------------------------------------------

struct PoolSpec {
    std::size_t ph = 1, pw = 1;  // window
    std::size_t sh = 1, sw = 1;  // stride
    friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

inline Shape pooled_shape(const Shape& in, const PoolSpec& p) {
    return {in[0], (in[1] + p.sh - 1) / p.sh, (in[2] + p.sw - 1) / p.sw};
}

template <typename T>
struct PoolResult {
    Tensor<T> output;
    std::vector<std::size_t> argmax;  // flat input index per output cell
    Shape input_shape;
};

/// Same-padded max pooling: output is C x ceil(H/sh) x ceil(W/sw); padding
/// cells never win; ties go to the smallest flat input index.
template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input, const PoolSpec& p) {
    if (input.rank() != 3 || p.ph == 0 || p.pw == 0 || p.sh == 0 || p.sw == 0) {
        throw ShapeError("maxpool2d: need C x H x W input and positive pool/stride");
    }
    PoolResult<T> r{Tensor<T>(pooled_shape(input.shape(), p)), {}, input.shape()};
    r.argmax.resize(r.output.size());
    kernels::omp::maxpool(input.data(), input.dim(0), input.dim(1), input.dim(2), p.ph, p.pw, p.sh, p.sw,
                          r.output.data(), r.argmax.data());
    return r;
}

/// Routes each upstream value to the stored argmax cell.
template <typename T>
Tensor<T> maxpool2d_backward(const PoolResult<T>& fwd, const Tensor<T>& upstream) {
    require_shape(upstream.shape(), fwd.output.shape(), "maxpool2d_backward upstream");
    Tensor<T> g(fwd.input_shape);
    for (std::size_t i = 0; i < upstream.size(); ++i) g[fwd.argmax[i]] += upstream[i];
    return g;
}

// --- dense ---------------------------------------------------------------------

template <typename T>
struct DenseGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

/// y = x W + b for a batch of row vectors. `input` is B x in (or a plain
/// in-vector, treated as B = 1), `weights` is in x out, `bias` is out.
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
    if (weights.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weights.dim(1)) {
        throw ShapeError("dense: weights must be in x out with a matching bias");
    }
    const std::size_t in = weights.dim(0), out = weights.dim(1);
    const std::size_t batch = input.rank() == 1 ? 1 : input.dim(0);
    if (input.size() != batch * in || input.rank() > 2) {
        throw ShapeError("dense: input " + shape_string(input.shape()) + " does not match weights " +
                         shape_string(weights.shape()));
    }
    Tensor<T> y(input.rank() == 1 ? Shape{out} : Shape{batch, out});
    for (std::size_t b = 0; b < batch; ++b) std::copy(bias.data(), bias.data() + out, y.data() + b * out);
    kernels::omp::gemm(kernels::Trans::No, kernels::Trans::No, batch, out, in, T{1}, input.data(), in,
                       weights.data(), out, T{1}, y.data(), out);
    return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& upstream,
                             bool want_input_grad = true) {
    const std::size_t in = weights.dim(0), out = weights.dim(1);
    const std::size_t batch = input.size() / in;
    if (upstream.size() != batch * out) throw ShapeError("dense_backward: upstream size mismatch");
    DenseGrads<T> g{Tensor<T>(), Tensor<T>(weights.shape()), Tensor<T>({out})};
    kernels::omp::gemm(kernels::Trans::Yes, kernels::Trans::No, in, out, batch, T{1}, input.data(), in,
                       upstream.data(), out, T{0}, g.weights.data(), out);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) g.bias[o] += upstream[b * out + o];
    }
    if (want_input_grad) {
        g.input = Tensor<T>(input.shape());
        kernels::omp::gemm(kernels::Trans::No, kernels::Trans::Yes, batch, in, out, T{1}, upstream.data(), out,
                           weights.data(), out, T{0}, g.input.data(), in);
    }
    return g;
}

// --- relu ------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(Tensor<T> x) {
    for (auto& v : x.vec()) v = v > T{0} ? v : T{0};
    return x;
}

/// Passes upstream where the forward input (or output) was > 0. relu'(0) = 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& forward_value, Tensor<T> upstream) {
    require_shape(upstream.shape(), forward_value.shape(), "relu_backward");
    for (std::size_t i = 0; i < upstream.size(); ++i) {
        if (!(forward_value[i] > T{0})) upstream[i] = T{0};
    }
    return upstream;
}

// --- dropout ---------------------------------------------------------------------

template <typename T>
struct DropoutResult {
    Tensor<T> output;
    Tensor<T> mask;  // 0 or 1/keep_prob per unit; empty in Eval mode
};

/// Inverted dropout. Train: each unit survives with probability keep_prob
/// and survivors are scaled by 1/keep_prob. Eval: identity.
template <typename T>
DropoutResult<T> dropout(const Tensor<T>& input, double keep_prob, Mode mode, Rng& rng) {
    if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw ConfigError("dropout: keep_prob must be in (0, 1]");
    if (mode == Mode::Eval) return {input, Tensor<T>()};
    Tensor<T> mask(input.shape());
    const T scale = static_cast<T>(1.0 / keep_prob);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& m : mask.vec()) m = (keep_prob >= 1.0 || u(rng) < keep_prob) ? scale : T{0};
    Tensor<T> out = input;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return {std::move(out), std::move(mask)};
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& mask, Tensor<T> upstream) {
    if (mask.empty()) return upstream;
    require_shape(upstream.shape(), mask.shape(), "dropout_backward");
    for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] *= mask[i];
    return upstream;
}

// --- softmax ---------------------------------------------------------------------

/// Row-wise softmax of a B x C (or C) tensor with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    const std::size_t c = logits.shape().back();
    Tensor<T> p = logits;
    for (std::size_t r = 0; r < logits.size() / c; ++r) {
        T* row = p.data() + r * c;
        const T mx = *std::max_element(row, row + c);
        T sum{0};
        for (std::size_t i = 0; i < c; ++i) sum += (row[i] = std::exp(row[i] - mx));
        for (std::size_t i = 0; i < c; ++i) row[i] /= sum;
    }
    return p;
}

}  // namespace ausc
