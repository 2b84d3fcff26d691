#include "ausc/sesp_loss.hpp"

#include "ausc/error.hpp"
#include "ausc/layers.hpp"

namespace ausc {

template <typename T>
void LabeledBatch<T>::validate() const {
    if (logits.rank() != 2 || logits.dim(1) != 2) {
        throw ShapeError("sesp batch: logits must be n x 2, got " + shape_string(logits.shape()));
    }
    require_shape(probabilities.shape(), logits.shape(), "sesp batch probabilities");
    require_shape(one_hot.shape(), logits.shape(), "sesp batch one_hot");
    for (std::size_t i = 0; i < rows(); ++i) {
        const T a = one_hot.at(i, 0), b = one_hot.at(i, 1);
        if (!((a == T{1} && b == T{0}) || (a == T{0} && b == T{1}))) {
            throw ShapeError("sesp batch: one_hot row " + std::to_string(i) + " is not one-hot");
        }
    }
}

template <typename T>
LabeledBatch<T> make_batch(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2 || logits.dim(1) != 2 || logits.dim(0) != labels.size()) {
        throw ShapeError("make_batch: need n x 2 logits and n labels");
    }
    LabeledBatch<T> b{logits, softmax(logits), Tensor<T>(logits.shape())};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw ShapeError("make_batch: labels must be 0 or 1");
        b.one_hot.at(i, static_cast<std::size_t>(labels[i])) = T{1};
    }
    return b;
}

template <typename T>
std::size_t predicted_class(const Tensor<T>& probabilities, std::size_t row) {
    return probabilities.at(row, 1) > probabilities.at(row, 0) ? kAbnormal : kNormal;
}

namespace {

template <typename T>
std::size_t true_class(const LabeledBatch<T>& b, std::size_t row) {
    return b.one_hot.at(row, 1) == T{1} ? kAbnormal : kNormal;
}

}  // namespace

template <typename T>
SespMasks<T> build_masks(const LabeledBatch<T>& batch) {
    batch.validate();
    const std::size_t n = batch.rows();
    SespMasks<T> m{std::vector<T>(n, T{0}), std::vector<T>(n, T{0})};
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = true_class(batch, i);
        if (predicted_class(batch.probabilities, i) != c) continue;
        (c == kNormal ? m.nn : m.aa)[i] = batch.probabilities.at(i, c);
    }
    return m;
}

template <typename T>
SespValues sesp_values(const LabeledBatch<T>& batch) {
    const auto m = build_masks(batch);
    SespValues v;
    double sum_nn = 0, sum_aa = 0;
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        if (true_class(batch, i) == kNormal) {
            ++v.normal_rows;
            sum_nn += double(m.nn[i]);
        } else {
            ++v.abnormal_rows;
            sum_aa += double(m.aa[i]);
        }
    }
    v.se = v.abnormal_rows ? sum_aa / double(v.abnormal_rows) : 1.0;
    v.sp = v.normal_rows ? sum_nn / double(v.normal_rows) : 1.0;
    return v;
}

template <typename T>
double l2_value(const ParamTensors<T>& params, double lambda) {
    double sum = 0;
    params.for_each([&](std::string_view, const Tensor<T>& t, bool reg) {
        if (!reg) return;
        for (T v : t.vec()) sum += double(v) * double(v);
    });
    return lambda * sum;
}

template <typename T>
void add_l2_gradient(ParamTensors<T>& grads, const ParamTensors<T>& params, double lambda) {
    for (const auto& e : ParamTensors<T>::entries) {
        if (!e.regularized) continue;
        auto& g = grads.*e.member;
        const auto& w = params.*e.member;
        require_shape(g.shape(), w.shape(), "l2 gradient");
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<T>(2.0 * lambda * double(w[i]));
    }
}

template <typename T>
L2Penalty<T> l2_penalty(const ParamTensors<T>& params, double lambda) {
    L2Penalty<T> out;
    out.value = l2_value(params, lambda);
    for (const auto& e : ParamTensors<T>::entries) {
        out.gradient.*e.member = Tensor<T>((params.*e.member).shape());
    }
    add_l2_gradient(out.gradient, params, lambda);
    return out;
}

template <typename T>
LossReport<T> sesp_loss(const LabeledBatch<T>& batch, const ParamTensors<T>& params, double lambda) {
    if (!(lambda >= 0)) throw ConfigError("sesp_loss: lambda must be non-negative");
    const auto v = sesp_values(batch);
    LossReport<T> r;
    r.se = v.se;
    r.sp = v.sp;
    r.penalty = l2_value(params, lambda);
    r.total = -(v.se + v.sp) + r.penalty;

    // d total / d p_c is -1/count on frozen-correct rows of class c; push it
    // through the softmax Jacobian: dz_k = p_k (g_k - sum_m g_m p_m).
    const std::size_t n = batch.rows();
    r.logit_gradient = Tensor<T>({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = true_class(batch, i);
        if (predicted_class(batch.probabilities, i) != c) continue;
        const double count = double(c == kNormal ? v.normal_rows : v.abnormal_rows);
        const double g = -1.0 / count;
        const double pc = double(batch.probabilities.at(i, c));
        for (std::size_t k = 0; k < 2; ++k) {
            const double pk = double(batch.probabilities.at(i, k));
            r.logit_gradient.at(i, k) = static_cast<T>(pk * ((k == c ? g : 0.0) - g * pc));
        }
    }
    return r;
}

#define AUSC_INSTANTIATE(T)                                                                         \
    template struct LabeledBatch<T>;                                                                \
    template LabeledBatch<T> make_batch(const Tensor<T>&, const std::vector<int>&);                 \
    template std::size_t predicted_class(const Tensor<T>&, std::size_t);                            \
    template SespMasks<T> build_masks(const LabeledBatch<T>&);                                      \
    template SespValues sesp_values(const LabeledBatch<T>&);                                        \
    template double l2_value(const ParamTensors<T>&, double);                                       \
    template void add_l2_gradient(ParamTensors<T>&, const ParamTensors<T>&, double);                \
    template L2Penalty<T> l2_penalty(const ParamTensors<T>&, double);                               \
    template LossReport<T> sesp_loss(const LabeledBatch<T>&, const ParamTensors<T>&, double);

AUSC_INSTANTIATE(float)
AUSC_INSTANTIATE(double)
#undef AUSC_INSTANTIATE

}  // namespace ausc
