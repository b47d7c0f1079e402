// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>

#include "mcdn/tensor.hpp"

namespace mcdn {

/// Central differences (f(theta + eps e_i) - f(theta - eps e_i)) / 2 eps for
/// every coordinate of theta. `f` receives a perturbed copy; theta is untouched.
Tensor finite_diff(const std::function<double(const Tensor &)> &f, const Tensor &theta,
                   double eps);

/// Same estimate, but perturbs `param` in place (restoring each coordinate)
/// and re-evaluates the closed-over objective. Used for model parameters.
Tensor finite_diff_inplace(const std::function<double()> &f, Tensor &param, double eps);

/// ||a - b|| / max(||a||, ||b||), or 0 when both are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

/// Largest per-coordinate |a - b| / max(|a|, |b|, floor).
double max_elementwise_relative_error(std::span<const double> a,
                                      std::span<const double> b, double floor);

} // namespace mcdn
