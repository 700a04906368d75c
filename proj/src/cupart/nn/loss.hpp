#pragma once

#include "cupart/nn/tensor.hpp"

namespace cupart::nn {

// Probabilities are clamped away from 0/1 before taking logs; the clamp is
// treated as identity when differentiating.
inline constexpr double kProbClamp = 1e-7;

template <typename T>
struct MaskedCeResult {
    T loss;
    TensorT<T> grad; // d loss / d pred, exactly zero where mask = 0
};

// Sum of binary cross-entropies over mask-in elements. truth and mask hold
// {0,1} values and must match pred's shape.
template <typename T>
MaskedCeResult<T> masked_cross_entropy(const TensorT<T>& pred, const TensorT<T>& truth,
                                       const TensorT<T>& mask) {
    if (!pred.same_shape(truth) || !pred.same_shape(mask))
        throw shape_error("masked_cross_entropy: pred/truth/mask shapes differ");
    MaskedCeResult<T> r{T(0), TensorT<T>(pred.dims)};
    for (size_t i = 0; i < pred.size(); ++i) {
        if (mask.data[i] == T(0)) continue;
        T p = pred.data[i];
        if (p < T(kProbClamp)) p = T(kProbClamp);
        if (p > T(1.0 - kProbClamp)) p = T(1.0 - kProbClamp);
        const T y = truth.data[i];
        r.loss += -(y * std::log(p) + (T(1) - y) * std::log(T(1) - p));
        r.grad.data[i] = (p - y) / (p * (T(1) - p));
    }
    return r;
}

// Cross-entropy of one probability/target pair plus the gradient with respect
// to the pre-sigmoid logit. Heads use this form: with the clamp inactive the
// logit gradient reduces to (p - y).
template <typename T>
void bce_logit_term(T p, T y, T& loss_acc, T& dlogit) {
    T pc = p;
    if (pc < T(kProbClamp)) pc = T(kProbClamp);
    if (pc > T(1.0 - kProbClamp)) pc = T(1.0 - kProbClamp);
    loss_acc += -(y * std::log(pc) + (T(1) - y) * std::log(T(1) - pc));
    dlogit = (pc - y) / (pc * (T(1) - pc)) * (p * (T(1) - p));
}

} // namespace cupart::nn
