#pragma once

// The heat-map CNN:
//   conv(64 @ 2x20, same) -> relu -> maxpool(1x20, stride 1x5)
//   conv(64 @ 2x10, same) -> relu -> maxpool(1x4,  stride 1x2)
//   flatten (64*6*30 = 11520) -> fc 1024 -> relu -> dropout
//   -> fc 512 -> relu -> dropout -> fc 2 -> softmax

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "ausc/features.hpp"
#include "ausc/hyperparams.hpp"
#include "ausc/layers.hpp"
#include "ausc/tensor.hpp"

namespace ausc {

struct Architecture {
    std::size_t in_h = 6, in_w = 300;
    std::size_t conv1_channels = 64, conv1_kh = 2, conv1_kw = 20;
    PoolSpec pool1{1, 20, 1, 5};
    std::size_t conv2_channels = 64, conv2_kh = 2, conv2_kw = 10;
    PoolSpec pool2{1, 4, 1, 2};
    std::size_t fc1_units = 1024, fc2_units = 512, classes = 2;

    Shape input_shape() const { return {1, in_h, in_w}; }
    Shape conv1_shape() const { return {conv1_channels, in_h, in_w}; }
    Shape pool1_shape() const { return pooled_shape(conv1_shape(), pool1); }
    Shape conv2_shape() const {
        const auto p = pool1_shape();
        return {conv2_channels, p[1], p[2]};
    }
    Shape pool2_shape() const { return pooled_shape(conv2_shape(), pool2); }
    std::size_t flatten_size() const { return shape_size(pool2_shape()); }

    void validate() const;
    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// The ten learnable tensors. Dense weights are stored in x out.
template <typename T>
struct ParamTensors {
    Tensor<T> conv1_w, conv1_b, conv2_w, conv2_b;
    Tensor<T> fc1_w, fc1_b, fc2_w, fc2_b, out_w, out_b;

    struct Entry {
        std::string_view name;
        Tensor<T> ParamTensors::*member;
        bool regularized;  // fully connected weights and biases carry L2
    };
    static constexpr std::array<Entry, 10> entries{{
        {"conv1.weight", &ParamTensors::conv1_w, false},
        {"conv1.bias", &ParamTensors::conv1_b, false},
        {"conv2.weight", &ParamTensors::conv2_w, false},
        {"conv2.bias", &ParamTensors::conv2_b, false},
        {"fc1.weight", &ParamTensors::fc1_w, true},
        {"fc1.bias", &ParamTensors::fc1_b, true},
        {"fc2.weight", &ParamTensors::fc2_w, true},
        {"fc2.bias", &ParamTensors::fc2_b, true},
        {"out.weight", &ParamTensors::out_w, true},
        {"out.bias", &ParamTensors::out_b, true},
    }};

    /// All-zero tensors with the architecture's shapes.
    static ParamTensors zeros(const Architecture& a);

    template <typename F>
    void for_each(F&& f) {
        for (const auto& e : entries) f(e.name, this->*e.member, e.regularized);
    }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& e : entries) f(e.name, this->*e.member, e.regularized);
    }

    template <typename U>
    ParamTensors<U> cast() const {
        ParamTensors<U> out;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out.*(ParamTensors<U>::entries[i].member) = (this->*entries[i].member).template cast<U>();
        }
        return out;
    }

    friend bool operator==(const ParamTensors&, const ParamTensors&) = default;
};

template <typename T>
struct NetworkParams {
    Architecture arch;
    ParamTensors<T> tensors;
    NormalizationStats norm;
    Hyperparams hyper;
    MfccConfig mfcc;

    template <typename U>
    NetworkParams<U> cast() const {
        return {arch, tensors.template cast<U>(), norm, hyper, mfcc};
    }
};

/// He-style fan-in uniform init, U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases.
template <typename T>
ParamTensors<T> init_params(const Architecture& arch, std::uint64_t seed);

/// Activations kept for the backward pass. Conv activations are stored only
/// after pooling; argmax indices point into the (relu'd) conv output.
template <typename T>
struct ForwardTrace {
    Mode mode = Mode::Eval;
    std::size_t batch = 0;
    Tensor<T> input;                       // B x H x W
    Tensor<T> pool1;                       // B x C1 x H1 x W1
    std::vector<std::size_t> pool1_argmax;
    Tensor<T> pool2;                       // B x C2 x H2 x W2 (== B x flatten)
    std::vector<std::size_t> pool2_argmax;
    Tensor<T> fc1, drop1_mask, h1;         // masks empty in Eval mode
    Tensor<T> fc2, drop2_mask, h2;
    Tensor<T> logits;                      // B x classes
    Tensor<T> probabilities;               // B x classes
    std::vector<Shape> stage_shapes;       // per-sample shapes, input to output
};

/// Forward pass over a batch of standardized maps (B x H x W, or a single
/// H x W map). Dropout uses params.hyper.keep_prob in Train mode.
template <typename T>
ForwardTrace<T> network_forward(const Tensor<T>& maps, const NetworkParams<T>& params, Mode mode, Rng& rng);

/// Parameter gradients of sum_b <dlogits_b, logits_b>. L2 is not included.
/// Throws TraceError for an Eval-mode trace.
template <typename T>
ParamTensors<T> network_backward(const ForwardTrace<T>& trace, const Tensor<T>& dlogits,
                                 const NetworkParams<T>& params);

// --- checkpoint ("AUSC") -----------------------------------------------------------

void write_checkpoint(std::ostream& out, const NetworkParams<float>& params);
NetworkParams<float> read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const NetworkParams<float>& params);
NetworkParams<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace ausc
