// SPDX-License-Identifier: Apache-2.0
#include "mcdn/head.hpp"

#include <algorithm>
#include <cmath>

namespace mcdn {

Tensor classify(const Tensor &h_w, const Tensor &h_s, const HeadParams &params) {
  auto h_u = ops::concat({h_w, h_s});
  auto hidden = ops::relu(linear(h_u, params.w3, params.b3));
  auto logits = linear(hidden, params.w4, params.b4);
  return ops::reshape(ops::softmax_rows(ops::as_row(logits)), {logits.numel()});
}

double focal_loss_value(double p, int label, const LossConfig &cfg) {
  p = std::clamp(p, cfg.clamp, 1.0 - cfg.clamp);
  if (label == 1)
    return -cfg.alpha * std::pow(1.0 - p, cfg.beta) * std::log(p);
  return -(1.0 - cfg.alpha) * std::pow(p, cfg.beta) * std::log(1.0 - p);
}

Tensor focal_loss(const Tensor &causal_probabilities, const std::vector<int> &labels,
                  const LossConfig &cfg) {
  const std::size_t n = causal_probabilities.numel();
  if (labels.size() != n)
    throw ShapeError("focal_loss: label count mismatch");
  std::vector<double> pos(n), neg(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("focal_loss: labels must be 0 or 1");
    pos[i] = labels[i] == 1 ? -cfg.alpha : 0.0;
    neg[i] = labels[i] == 0 ? -(1.0 - cfg.alpha) : 0.0;
  }
  auto p = ops::reshape(ops::clamp(causal_probabilities, cfg.clamp, 1.0 - cfg.clamp), {n});
  auto q = ops::one_minus(p);
  auto causal_term = ops::mul(ops::pow_scalar(q, cfg.beta), ops::log(p));
  auto other_term = ops::mul(ops::pow_scalar(p, cfg.beta), ops::log(q));
  auto per_example = ops::add(ops::mul(causal_term, Tensor::vector(pos)),
                              ops::mul(other_term, Tensor::vector(neg)));
  return ops::mean(per_example);
}

int predict_label(std::span<const double> probabilities) {
  if (probabilities.size() != 2)
    throw std::invalid_argument("predict_label: expected two class probabilities");
  return probabilities[kCausalClass] >= 0.5 ? 1 : 0;
}

} // namespace mcdn
