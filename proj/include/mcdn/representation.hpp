// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "mcdn/layers.hpp"

namespace mcdn {

struct RepresentationParams {
  Tensor word;     ///< |V| x d
  Tensor position; ///< max_len x d
  Tensor segment;  ///< 4 x d
  Mask word_frozen;
  Mask segment_frozen;
};

/// Word + position + segment lookup sum, followed by embedding dropout.
Tensor represent_full(const RepresentationParams &params, const std::vector<std::size_t> &ids,
                      const std::vector<std::size_t> &positions,
                      const std::vector<std::size_t> &segment_ids,
                      const DropoutContext &dropout = {});

/// Word + segment lookup sum, followed by embedding dropout.
Tensor represent_scrn(const RepresentationParams &params, const std::vector<std::size_t> &ids,
                      const std::vector<std::size_t> &segment_ids,
                      const DropoutContext &dropout = {});

/// Fixed sine/cosine position table [max_len x d].
Tensor sinusoidal_table(std::size_t max_len, std::size_t d);

} // namespace mcdn
