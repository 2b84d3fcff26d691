#pragma once

// Sensitivity/specificity objective:
//   total = -(Se + Sp) + lambda * R(W)
// Se is the summed abnormal-class probability over correctly classified
// abnormal rows divided by the number of abnormal rows; Sp likewise for
// normal rows. "Correctly classified" (argmax agreement, ties to class 0) is
// a per-forward-pass constant, so gradients flow only through the selected
// probabilities. A class with no rows contributes 1 with zero gradient.

#include <cstddef>
#include <vector>

#include "ausc/network.hpp"
#include "ausc/tensor.hpp"

namespace ausc {

inline constexpr std::size_t kNormal = 0;
inline constexpr std::size_t kAbnormal = 1;

template <typename T>
struct LabeledBatch {
    Tensor<T> logits;         // n x 2
    Tensor<T> probabilities;  // n x 2, softmax of logits
    Tensor<T> one_hot;        // n x 2, column 0 normal, column 1 abnormal

    std::size_t rows() const { return logits.dim(0); }
    /// Throws ShapeError unless all three are n x 2 and one_hot rows are one-hot.
    void validate() const;
};

/// Builds a batch from logits and class indices (0 normal, 1 abnormal).
template <typename T>
LabeledBatch<T> make_batch(const Tensor<T>& logits, const std::vector<int>& labels);

/// Argmax with ties toward class 0.
template <typename T>
std::size_t predicted_class(const Tensor<T>& probabilities, std::size_t row);

template <typename T>
struct SespMasks {
    std::vector<T> nn;  // s(y0) on correctly classified normal rows, else 0
    std::vector<T> aa;  // s(y1) on correctly classified abnormal rows, else 0
};

template <typename T>
SespMasks<T> build_masks(const LabeledBatch<T>& batch);

struct SespValues {
    double se = 0, sp = 0;
    std::size_t abnormal_rows = 0, normal_rows = 0;
};

template <typename T>
SespValues sesp_values(const LabeledBatch<T>& batch);

template <typename T>
struct L2Penalty {
    double value = 0;
    ParamTensors<T> gradient;  // 2 lambda W on regularized tensors, zeros elsewhere
};

/// lambda * sum of squares over the fully connected weights and biases.
template <typename T>
L2Penalty<T> l2_penalty(const ParamTensors<T>& params, double lambda);

/// Value only; cheaper than l2_penalty when gradients are not needed.
template <typename T>
double l2_value(const ParamTensors<T>& params, double lambda);

/// Adds 2 lambda W to the regularized entries of `grads` in place.
template <typename T>
void add_l2_gradient(ParamTensors<T>& grads, const ParamTensors<T>& params, double lambda);

template <typename T>
struct LossReport {
    double se = 0, sp = 0;
    double penalty = 0;
    double total = 0;
    Tensor<T> logit_gradient;  // d total / d logits, n x 2, masks held fixed
};

template <typename T>
LossReport<T> sesp_loss(const LabeledBatch<T>& batch, const ParamTensors<T>& params, double lambda);

}  // namespace ausc
