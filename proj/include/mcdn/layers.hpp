// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mcdn/ops.hpp"
#include "mcdn/rng.hpp"

namespace mcdn {

/// Dropout settings threaded through a forward pass. The default is inference.
struct DropoutContext {
  double rate = 0.0;
  Rng *rng = nullptr;
  bool training = false;

  bool active() const { return training && rate > 0.0 && rng != nullptr; }
  Tensor operator()(const Tensor &x) const {
    return active() ? ops::dropout(x, rate, *rng, true) : x;
  }
};

/// x W + b for x of shape [m x in] or [in].
inline Tensor linear(const Tensor &x, const Tensor &w, const Tensor &b) {
  if (x.rank() == 1)
    return ops::reshape(ops::add_bias(ops::matmul(ops::as_row(x), w), b), {w.cols()});
  return ops::add_bias(ops::matmul(x, w), b);
}

} // namespace mcdn
