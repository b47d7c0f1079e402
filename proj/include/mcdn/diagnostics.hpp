// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcdn/config.hpp"

namespace mcdn {

struct ParamGradError {
  std::string name;
  std::size_t size = 0;
  double relative = 0.0;    ///< ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double max_element = 0.0; ///< worst per-coordinate relative error, floored at 1e-6
  double grad_norm = 0.0;
};

struct GradcheckReport {
  std::vector<ParamGradError> params;
  double worst = 0.0;
  double seconds = 0.0;
  bool passed(double tolerance) const { return worst <= tolerance; }
};

/// Reduced model used by the gradient check: d=16, N=2, h=2, k=12 over
/// windows {2,3,4}, d_g=8.
Config reduced_config();

/// Compares backward gradients of the full objective (focal loss + L2) with
/// central differences for every trainable tensor, on a random 4-sentence
/// batch. Dropout stays active with a fixed mask seed per evaluation.
GradcheckReport check_model_gradients(const Config &config, std::uint64_t seed,
                                      double eps = 1e-4);

} // namespace mcdn
