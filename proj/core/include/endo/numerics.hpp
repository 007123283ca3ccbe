#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "endo/param_store.hpp"
#include "endo/tensor.hpp"

namespace endo {

// Value-level wrappers over the kernels, for callers that do not need a tape.

// Softmax along the last axis. mask: 1 = attendable, 0 = masked. Masked entries are
// exactly 0; a fully masked row throws std::domain_error("degenerate attention row").
template <typename T>
Tensor<T> softmax_masked(const Tensor<T>& logits, const std::vector<std::uint8_t>& mask);

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps = T(1e-5));

template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
T cross_entropy(const Tensor<T>& logits, std::span<const int> targets);

struct GradCheckResult {
    double max_rel_error = 0;
    std::string worst_param;
    std::size_t coordinates = 0;
    std::size_t groups_covered = 0;
    // Per parameter tensor: largest relative error among its sampled coordinates.
    std::vector<std::pair<std::string, double>> per_param;
};

// Loss closure: evaluates the loss at the current parameter values. When
// `with_grad` is true it must also call backward() so that Param::grad holds
// d(loss)/d(param).
using LossFn = std::function<double(ParamStore<double>&, bool with_grad)>;

// Central-difference check over `sample_count` coordinates (at least one per
// parameter tensor). Relative error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
GradCheckResult grad_check(const LossFn& loss, ParamStore<double>& params, double h, std::size_t sample_count,
                           std::uint64_t seed, double abs_floor = 1e-6);

}  // namespace endo
