// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "mcdn/config.hpp"
#include "mcdn/layers.hpp"

namespace mcdn {

inline constexpr std::size_t kCausalClass = 1;

struct HeadParams {
  Tensor w3, b3; ///< (d + 4 d_g) x d_g
  Tensor w4, b4; ///< d_g x 2
};

/// softmax(ReLU(h_u W3 + b3) W4 + b4) with h_u = h_w | h_s. Returns [2]; index 1
/// is the causal class.
Tensor classify(const Tensor &h_w, const Tensor &h_s, const HeadParams &params);

/// Focal loss of one prediction, evaluated directly in doubles.
double focal_loss_value(double causal_probability, int label, const LossConfig &cfg);

/// Mean focal loss over a batch of causal probabilities [B].
Tensor focal_loss(const Tensor &causal_probabilities, const std::vector<int> &labels,
                  const LossConfig &cfg);

/// 1 iff the causal probability is at least 0.5.
int predict_label(std::span<const double> probabilities);

} // namespace mcdn
