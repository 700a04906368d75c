#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <vector>

#include "cupart/nn/tensor.hpp"
#include "cupart/rng.hpp"

namespace cupart::nn {

struct GradCheckResult {
    double max_rel_error = 0.0;
    size_t coords_checked = 0;
    size_t worst_tensor = 0;
    size_t worst_index = 0;
};

// Central finite differences on a random subset of parameter coordinates.
// loss_fn re-runs the forward pass with the (perturbed) parameters;
// analytic_grads must correspond to the unperturbed parameters.
// Relative error: |a - n| / max(|a|, |n|, 1e-8).
template <typename T>
GradCheckResult grad_check(const std::function<T()>& loss_fn,
                           std::span<TensorT<T>* const> params,
                           std::span<const TensorT<T>* const> analytic_grads,
                           double epsilon, size_t min_coords, Rng& rng) {
    if (!(epsilon >= 1e-5 && epsilon <= 1e-2))
        throw argument_error("grad_check: epsilon out of [1e-5, 1e-2]");
    if (params.size() != analytic_grads.size())
        throw argument_error("grad_check: params/grads count mismatch");

    size_t total = 0;
    for (const TensorT<T>* p : params) total += p->size();
    const size_t n_coords = std::min(total, std::max(min_coords, size_t(200)));

    GradCheckResult res;
    for (size_t c = 0; c < n_coords; ++c) {
        size_t flat = rng.below(total);
        size_t ti = 0;
        while (flat >= params[ti]->size()) {
            flat -= params[ti]->size();
            ++ti;
        }
        T& w = params[ti]->data[flat];
        const T saved = w;

        w = saved + static_cast<T>(epsilon);
        const double loss_plus = static_cast<double>(loss_fn());
        w = saved - static_cast<T>(epsilon);
        const double loss_minus = static_cast<double>(loss_fn());
        w = saved;

        if (!std::isfinite(loss_plus) || !std::isfinite(loss_minus))
            throw std::runtime_error("grad_check: non-finite loss");

        const double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        const double analytic = static_cast<double>(analytic_grads[ti]->data[flat]);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        const double rel = std::abs(analytic - numeric) / denom;
        if (rel > res.max_rel_error) {
            res.max_rel_error = rel;
            res.worst_tensor = ti;
            res.worst_index = flat;
        }
        ++res.coords_checked;
    }
    return res;
}

} // namespace cupart::nn
