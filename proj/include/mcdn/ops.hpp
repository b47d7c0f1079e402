// SPDX-License-Identifier: Apache-2.0
/**
 * @file   ops.hpp
 * @brief  Differentiable tensor primitives used by the MCDN model.
 *
 * Matrices are row-major [rows x cols]; vectors are rank-1. Every op records a
 * backward closure when graph recording is on and an input needs gradients.
 */
#pragma once

#include <cstdint>
#include <vector>

#include "mcdn/rng.hpp"
#include "mcdn/tensor.hpp"

namespace mcdn {

/// Elementwise keep-flags (1 = keep / real token, 0 = masked / PAD).
using Mask = std::vector<std::uint8_t>;

namespace ops {

// Shape plumbing.
Tensor reshape(const Tensor &x, Shape shape);
/// Rank-1 [n] viewed as a [1 x n] matrix.
Tensor as_row(const Tensor &v);
Tensor transpose(const Tensor &x);
Tensor slice_rows(const Tensor &x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor &x, std::size_t begin, std::size_t end);
Tensor reverse_rows(const Tensor &x);
/// Concatenates matrices with equal row counts along columns, or vectors end to end.
Tensor concat(const std::vector<Tensor> &parts);
/// Stacks equal-length vectors into a [parts x n] matrix.
Tensor stack_rows(const std::vector<Tensor> &parts);
/// Appends `count` zero rows to a matrix.
Tensor pad_rows(const Tensor &x, std::size_t count);

// Linear algebra and elementwise arithmetic.
Tensor matmul(const Tensor &a, const Tensor &b);
Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
/// Adds a length-n bias to every row of an [m x n] matrix (or to a length-n vector).
Tensor add_bias(const Tensor &x, const Tensor &bias);
Tensor scale(const Tensor &x, double factor);
Tensor add_scalar(const Tensor &x, double value);
Tensor one_minus(const Tensor &x);
/// x^p for strictly positive x (p = 0 yields ones with zero gradient).
Tensor pow_scalar(const Tensor &x, double p);
Tensor log(const Tensor &x);
/// Gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor &x, double lo, double hi);

// Activations.
/// x * Phi(x) with Phi the standard normal CDF (erf form, not the tanh approximation).
Tensor gelu(const Tensor &x);
Tensor relu(const Tensor &x);
Tensor sigmoid(const Tensor &x);
Tensor tanh(const Tensor &x);

// Reductions.
Tensor sum(const Tensor &x);
Tensor mean(const Tensor &x);
/// Column sums of an [m x n] matrix -> [n].
Tensor sum_rows(const Tensor &x);
/// Mean of the rows whose flag is set -> [n]. At least one row must be kept.
Tensor masked_mean_rows(const Tensor &x, const Mask &row_mask);
/// Columnwise max over kept rows -> [n]; gradient goes to the first maximal row.
Tensor masked_max_rows(const Tensor &x, const Mask &row_mask);
/// Sum of squares, skipping rows flagged in `frozen_rows` (empty = none frozen).
Tensor sum_squares(const Tensor &x, const Mask &frozen_rows = {});

// Neural primitives.
/// Row softmax with max subtraction. Masked entries are exactly zero; a row with
/// no unmasked entry throws NumericError. `mask` is empty or has x.numel() flags.
Tensor softmax_rows(const Tensor &x, const Mask &mask = {});
/// Per-row normalization to zero mean / unit variance, then gain and bias.
Tensor layer_norm(const Tensor &x, const Tensor &gain, const Tensor &bias,
                  double eps);
/// Same-length 1-D convolution. x: [T x d_in], kernels: [w x d_in x c],
/// bias: [c] -> [T x c]. Left pad floor((w-1)/2), right pad ceil((w-1)/2).
Tensor conv1d_same(const Tensor &x, const Tensor &kernels, const Tensor &bias);
/// Columnwise max over time: [T x c] -> [c]. Ties route to the first index.
Tensor max_over_time(const Tensor &x);
/// Inverted dropout: identity unless training and rate > 0.
Tensor dropout(const Tensor &x, double rate, Rng &rng, bool training);
/// Row gather from an embedding table [V x d] -> [ids x d]. Rows flagged in
/// `frozen_rows` receive no gradient.
Tensor embedding(const Tensor &table, const std::vector<std::size_t> &ids,
                 const Mask &frozen_rows = {});

} // namespace ops

/// Weights of one GRU direction with gates packed as [z | r | candidate].
struct GruWeights {
  Tensor input;     ///< [d_in x 3h]
  Tensor recurrent; ///< [h x 3h]
  Tensor bias;      ///< [3h]

  std::size_t hidden() const { return bias.numel() / 3; }
};

enum class Direction { forward, backward };

struct GruOutput {
  Tensor states; ///< [T x h] in traversal order
  Tensor final;  ///< [h]
};

/// One GRU pass: z = sig(W_z x + U_z h + b_z), r = sig(W_r x + U_r h + b_r),
/// c = tanh(W_c x + U_c (r * h) + b_c), h' = (1 - z) * h + z * c.
GruOutput gru_layer(const Tensor &x, const Tensor &h0, const GruWeights &weights,
                    Direction direction);

} // namespace mcdn
