#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cupart/nn/tensor.hpp"

namespace cupart::nn {

struct SgdConfig {
    double lr0 = 0.01;
    double momentum = 0.9;
    double decay_factor = 0.99;   // applied once per decay_interval iterations
    int64_t decay_interval = 2000;
};

// Classic momentum: v <- momentum * v - lr * g; p <- p + v.
// The learning rate decays exponentially in steps of decay_interval.
template <typename T>
class SgdStateT {
public:
    SgdStateT() = default;
    SgdStateT(SgdConfig cfg, std::span<TensorT<T>* const> params) : cfg_(cfg) {
        velocity_.reserve(params.size());
        for (const TensorT<T>* p : params) velocity_.emplace_back(p->dims);
    }

    double learning_rate() const {
        return cfg_.lr0 * std::pow(cfg_.decay_factor,
                                   static_cast<double>(iteration_ / cfg_.decay_interval));
    }

    int64_t iteration() const { return iteration_; }

    void step(std::span<TensorT<T>* const> params, std::span<const TensorT<T>* const> grads) {
        if (params.size() != velocity_.size() || grads.size() != velocity_.size())
            throw shape_error("sgd step: parameter/gradient count mismatch");
        const T lr = static_cast<T>(learning_rate());
        const T mom = static_cast<T>(cfg_.momentum);
        for (size_t k = 0; k < params.size(); ++k) {
            TensorT<T>& p = *params[k];
            const TensorT<T>& g = *grads[k];
            TensorT<T>& v = velocity_[k];
            if (!p.same_shape(g) || !p.same_shape(v))
                throw shape_error("sgd step: tensor shape mismatch");
            for (size_t i = 0; i < p.size(); ++i) {
                v.data[i] = mom * v.data[i] - lr * g.data[i];
                p.data[i] += v.data[i];
            }
        }
        ++iteration_;
    }

private:
    SgdConfig cfg_;
    int64_t iteration_ = 0;
    std::vector<TensorT<T>> velocity_;
};

using SgdState = SgdStateT<float>;

} // namespace cupart::nn
