// SPDX-License-Identifier: Apache-2.0
#include "mcdn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mcdn {

void adam_step(std::span<Tensor> params, AdamState &state, const AdamConfig &cfg) {
  if (state.first_moment.empty()) {
    for (const auto &p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size())
    throw ShapeError("adam_step: optimizer state tracks " +
                     std::to_string(state.first_moment.size()) + " tensors, got " +
                     std::to_string(params.size()));
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor &p = params[k];
    auto &m = state.first_moment[k];
    auto &v = state.second_moment[k];
    if (m.size() != p.numel())
      throw ShapeError("adam_step: moment size mismatch for tensor " + std::to_string(k));
    if (!p.has_grad())
      p.zero_grad();
    auto g = p.grad();
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

double global_grad_norm(std::span<const Tensor> params) {
  double sq = 0.0;
  for (const auto &p : params)
    if (p.has_grad())
      for (double g : p.grad())
        sq += g * g;
  return std::sqrt(sq);
}

double clip_global_norm(std::span<Tensor> params, double max_norm) {
  if (!(max_norm > 0.0))
    throw std::invalid_argument("clip_global_norm: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto &p : params)
      if (p.has_grad())
        for (double &g : p.mutable_grad())
          g *= factor;
  }
  return norm;
}

} // namespace mcdn
