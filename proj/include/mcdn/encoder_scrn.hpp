// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "mcdn/layers.hpp"
#include "mcdn/text.hpp"

namespace mcdn {

struct ConvBank {
  std::size_t window = 0;
  Tensor kernels; ///< window x d x channels
  Tensor bias;    ///< channels
};

struct BiGruLayer {
  GruWeights forward;
  GruWeights backward;
};

struct ScrnParams {
  std::vector<ConvBank> banks;
  std::vector<BiGruLayer> gru;
  Tensor g1_w, g1_b, g2_w, g2_b; ///< g_theta: pair width -> 4 d_g -> 4 d_g
  Tensor f1_w, f1_b, f2_w, f2_b; ///< f_phi: 4 d_g -> 4 d_g -> 4 d_g
};

struct ObjectSet {
  Tensor bl, l, al; ///< each [k]
};

/// Multi-window convolution and max-over-time pooling of one segment [T x d].
/// Segments shorter than the widest window are zero-padded at the end.
Tensor segment_object(const Tensor &segment, const std::vector<ConvBank> &banks);

/// Objects for the three spans of `x` [n x d]. Empty spans become zero rows.
ObjectSet segment_objects(const Tensor &x, const Segmentation &spans,
                          const std::vector<ConvBank> &banks);

/// Stacked bi-GRU; returns the last layer's final forward state followed by its
/// final backward state. Dropout applies between layers.
Tensor sentence_context(const Tensor &x, const std::vector<BiGruLayer> &layers,
                        const DropoutContext &dropout = {});

/// Rows [BL|L, L|AL, BL|AL, AL|BL], each followed by h_g.
Tensor build_pairs(const ObjectSet &objects, const Tensor &h_g);

/// f_phi(sum over rows of g_theta(H_P)).
Tensor relation_reason(const Tensor &pairs, const ScrnParams &params,
                       const DropoutContext &dropout = {});

} // namespace mcdn
