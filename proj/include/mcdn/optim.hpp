// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcdn/tensor.hpp"

namespace mcdn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers, lazily sized on the first step.
struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over `params`, reading each tensor's gradient
/// (a tensor without a gradient is treated as having a zero one).
void adam_step(std::span<Tensor> params, AdamState &state, const AdamConfig &cfg);

/// Global L2 norm over all parameter gradients.
double global_grad_norm(std::span<const Tensor> params);

/// Rescales every gradient by max_norm / g when the global norm g exceeds
/// max_norm. Returns the norm measured before clipping.
double clip_global_norm(std::span<Tensor> params, double max_norm);

} // namespace mcdn
