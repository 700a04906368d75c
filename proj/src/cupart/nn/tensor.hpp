#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cupart/errors.hpp"

namespace cupart::nn {

// Dense row-major n-d array. The production scalar type is float (all
// feature maps and parameters are single precision); tests additionally
// instantiate double for finite-difference verification of the same code.
template <typename T>
struct TensorT {
    std::vector<int> dims;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> d) : dims(std::move(d)) {
        data.assign(checked_count(dims), T(0));
    }

    static size_t checked_count(const std::vector<int>& dims) {
        size_t n = 1;
        for (int e : dims) {
            if (e <= 0) throw shape_error("tensor extent must be positive");
            n *= static_cast<size_t>(e);
        }
        return n;
    }

    size_t size() const { return data.size(); }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }
    T& operator[](size_t i) { return data[i]; }
    const T& operator[](size_t i) const { return data[i]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const TensorT& o) const { return dims == o.dims; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

using Tensor = TensorT<float>;

template <typename T>
void require_shape(const TensorT<T>& t, const std::vector<int>& dims, const char* what) {
    if (t.dims != dims) throw shape_error(std::string(what) + ": unexpected tensor shape");
}

inline std::string dims_str(const std::vector<int>& dims) {
    std::string s = "[";
    for (size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

} // namespace cupart::nn
