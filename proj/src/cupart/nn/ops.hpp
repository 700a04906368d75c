#pragma once

#include <cstdint>
#include <utility>

#include "cupart/nn/tensor.hpp"
#include "cupart/rng.hpp"

namespace cupart::nn {

// Non-overlapping convolution: stride is locked to the kernel edge and there
// is no padding, matching non-overlapping CU splitting. Layers carry no bias.
struct ConvSpec {
    int in_channels = 1;
    int out_channels = 1;
    int kernel_edge = 1;

    int stride() const { return kernel_edge; }
    int64_t param_count() const {
        return int64_t(kernel_edge) * kernel_edge * in_channels * out_channels;
    }
    std::vector<int> weight_dims() const {
        return {kernel_edge, kernel_edge, in_channels, out_channels};
    }
};

struct FcSpec {
    int in_dim = 1;
    int out_dim = 1;

    int64_t param_count() const { return int64_t(in_dim) * out_dim; }
    std::vector<int> weight_dims() const { return {in_dim, out_dim}; }
};

// input: [H, W, Cin] row-major channel-last; weights: [k, k, Cin, Cout];
// output: [H/k, W/k, Cout].
template <typename T>
TensorT<T> conv_forward(const TensorT<T>& input, const ConvSpec& spec, const TensorT<T>& weights) {
    if (input.dims.size() != 3 || input.dims[2] != spec.in_channels)
        throw shape_error("conv_forward: input must be [H,W,Cin], got " + dims_str(input.dims));
    const int h = input.dims[0], w = input.dims[1];
    const int k = spec.kernel_edge, ci = spec.in_channels, co = spec.out_channels;
    if (h % k != 0 || w % k != 0)
        throw shape_error("conv_forward: spatial extent not divisible by kernel edge");
    require_shape(weights, spec.weight_dims(), "conv_forward weights");

    const int oh = h / k, ow = w / k;
    TensorT<T> out({oh, ow, co});
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            T* acc = out.ptr() + (size_t(oy) * ow + ox) * co;
            for (int ky = 0; ky < k; ++ky) {
                const T* in_row = input.ptr() + (size_t(oy * k + ky) * w + size_t(ox) * k) * ci;
                const T* w_row = weights.ptr() + size_t(ky) * k * ci * co;
                for (int kx = 0; kx < k; ++kx) {
                    for (int c = 0; c < ci; ++c) {
                        const T x = in_row[kx * ci + c];
                        const T* wv = w_row + (size_t(kx) * ci + c) * co;
                        for (int f = 0; f < co; ++f) acc[f] += x * wv[f];
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
void conv_backward(const TensorT<T>& input, const ConvSpec& spec, const TensorT<T>& weights,
                   const TensorT<T>& grad_out, TensorT<T>& grad_input, TensorT<T>& grad_weights) {
    const int h = input.dims[0], w = input.dims[1];
    const int k = spec.kernel_edge, ci = spec.in_channels, co = spec.out_channels;
    const int oh = h / k, ow = w / k;
    require_shape(grad_out, {oh, ow, co}, "conv_backward grad_out");
    if (!grad_input.same_shape(input)) grad_input = TensorT<T>(input.dims);
    if (!grad_weights.same_shape(weights)) grad_weights = TensorT<T>(weights.dims);

    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const T* go = grad_out.ptr() + (size_t(oy) * ow + ox) * co;
            for (int ky = 0; ky < k; ++ky) {
                const size_t in_off = (size_t(oy * k + ky) * w + size_t(ox) * k) * ci;
                for (int kx = 0; kx < k; ++kx) {
                    for (int c = 0; c < ci; ++c) {
                        const size_t ii = in_off + size_t(kx) * ci + c;
                        const size_t wi = ((size_t(ky) * k + kx) * ci + c) * co;
                        const T x = input.data[ii];
                        T gx = T(0);
                        for (int f = 0; f < co; ++f) {
                            gx += go[f] * weights.data[wi + f];
                            grad_weights.data[wi + f] += x * go[f];
                        }
                        grad_input.data[ii] += gx;
                    }
                }
            }
        }
    }
}

template <typename T>
void fc_forward_raw(const T* x, int n, int m, const T* w, T* y) {
    for (int j = 0; j < m; ++j) y[j] = T(0);
    for (int i = 0; i < n; ++i) {
        const T xi = x[i];
        const T* wr = w + size_t(i) * m;
        for (int j = 0; j < m; ++j) y[j] += xi * wr[j];
    }
}

// input: [n]; weights: [n, m]; output: [m]. No bias.
template <typename T>
TensorT<T> fc_forward(const TensorT<T>& input, const FcSpec& spec, const TensorT<T>& weights) {
    if (input.size() != size_t(spec.in_dim))
        throw shape_error("fc_forward: input length mismatch");
    require_shape(weights, spec.weight_dims(), "fc_forward weights");
    TensorT<T> out({spec.out_dim});
    fc_forward_raw(input.ptr(), spec.in_dim, spec.out_dim, weights.ptr(), out.ptr());
    return out;
}

// Accumulates grad_weights; overwrites grad_input.
template <typename T>
void fc_backward_raw(const T* x, int n, int m, const T* w, const T* gy, T* gx, T* gw) {
    for (int i = 0; i < n; ++i) {
        const T* wr = w + size_t(i) * m;
        T* gwr = gw + size_t(i) * m;
        const T xi = x[i];
        T acc = T(0);
        for (int j = 0; j < m; ++j) {
            acc += gy[j] * wr[j];
            gwr[j] += xi * gy[j];
        }
        gx[i] = acc;
    }
}

template <typename T>
void fc_backward(const TensorT<T>& input, const FcSpec& spec, const TensorT<T>& weights,
                 const TensorT<T>& grad_out, TensorT<T>& grad_input, TensorT<T>& grad_weights) {
    require_shape(grad_out, {spec.out_dim}, "fc_backward grad_out");
    if (!grad_input.same_shape(input)) grad_input = TensorT<T>(input.dims);
    if (!grad_weights.same_shape(weights)) grad_weights = TensorT<T>(weights.dims);
    fc_backward_raw(input.ptr(), spec.in_dim, spec.out_dim, weights.ptr(), grad_out.ptr(),
                    grad_input.ptr(), grad_weights.ptr());
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y(x.dims);
    for (size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return y;
}

// grad through relu given the forward *output*.
template <typename T>
void relu_backward_inplace(const TensorT<T>& out, TensorT<T>& grad) {
    for (size_t i = 0; i < out.size(); ++i)
        if (!(out.data[i] > T(0))) grad.data[i] = T(0);
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    TensorT<T> y(x.dims);
    for (size_t i = 0; i < x.size(); ++i)
        y.data[i] = T(1) / (T(1) + std::exp(-x.data[i]));
    return y;
}

template <typename T>
T sigmoid_scalar(T x) { return T(1) / (T(1) + std::exp(-x)); }

template <typename T>
TensorT<T> tanh_map(const TensorT<T>& x) {
    TensorT<T> y(x.dims);
    for (size_t i = 0; i < x.size(); ++i) y.data[i] = std::tanh(x.data[i]);
    return y;
}

// Inverted dropout: survivors are scaled by 1/(1-rate) at training time so
// inference is a plain pass-through. Returns output and the multiplier mask
// (0 or 1/(1-rate)) to reuse in the backward pass.
template <typename T>
std::pair<TensorT<T>, TensorT<T>> dropout_train(const TensorT<T>& x, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw argument_error("dropout_train: rate must be in [0,1)");
    TensorT<T> y(x.dims), mask(x.dims);
    const T keep_scale = T(1.0 / (1.0 - rate));
    for (size_t i = 0; i < x.size(); ++i) {
        const T m = rng.uniform() < rate ? T(0) : keep_scale;
        mask.data[i] = m;
        y.data[i] = x.data[i] * m;
    }
    return {std::move(y), std::move(mask)};
}

template <typename T>
void apply_mask_inplace(TensorT<T>& grad, const TensorT<T>& mask) {
    for (size_t i = 0; i < grad.size(); ++i) grad.data[i] *= mask.data[i];
}

} // namespace cupart::nn
