#pragma once

#include <functional>

#include "spikecast/tensor.hpp"

namespace spikecast {

template <typename T>
struct GradCheckReport {
  // max_i |analytic_i - numeric_i| / max(max_i |analytic_i|, max_i |numeric_i|)
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = false;
};

/// Compares the gradient of the scalar `f(x)` w.r.t. `x` from backward()
/// against central differences with step `h`. The error is normalised by the
/// largest gradient magnitude so that near-zero components do not dominate.
///
/// Throws ContractError when `f` records a custom-gradient op (a surrogate
/// spike), for which finite differences say nothing about the backward rule.
template <typename T>
GradCheckReport<T> grad_check(const std::function<BasicTensor<T>(const BasicTensor<T>&)>& f,
                              const BasicTensor<T>& x, T h, double tol);

/// True when any op reachable from `root` carries a custom gradient.
template <typename T>
bool has_custom_gradient(const BasicTensor<T>& root);

}  // namespace spikecast
