#pragma once

#include "cupart/nn/tensor.hpp"
#include "cupart/rng.hpp"

namespace cupart::nn {

// Truncated normal, zero mean, cut at +/-2 sigma.
template <typename T>
void truncated_normal_fill(TensorT<T>& t, Rng& rng, double stddev = 0.1) {
    for (size_t i = 0; i < t.size(); ++i)
        t.data[i] = static_cast<T>(rng.truncated_normal(0.0, stddev));
}

} // namespace cupart::nn
