// SPDX-License-Identifier: Apache-2.0
#include "mcdn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mcdn {

Tensor finite_diff(const std::function<double(const Tensor &)> &f, const Tensor &theta,
                   double eps) {
  Tensor probe = theta.detach();
  return finite_diff_inplace([&] { return f(probe); }, probe, eps);
}

Tensor finite_diff_inplace(const std::function<double()> &f, Tensor &param, double eps) {
  if (!(eps > 0.0))
    throw std::invalid_argument("finite_diff: eps must be positive");
  NoGradGuard no_grad;
  auto w = param.mutable_data();
  std::vector<double> estimate(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double saved = w[i];
    w[i] = saved + eps;
    const double plus = f();
    w[i] = saved - eps;
    const double minus = f();
    w[i] = saved;
    estimate[i] = (plus - minus) / (2.0 * eps);
  }
  return Tensor::from(param.shape(), std::move(estimate));
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

double max_elementwise_relative_error(std::span<const double> a,
                                      std::span<const double> b, double floor) {
  if (a.size() != b.size())
    throw ShapeError("max_elementwise_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

} // namespace mcdn
