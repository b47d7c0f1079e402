// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "mcdn/config.hpp"
#include "mcdn/layers.hpp"

namespace mcdn {

/// One pre-normalized Transformer block. Per-head projections are the column
/// blocks of wq/wk/wv: head i uses columns [i*d/h, (i+1)*d/h).
struct TransformerBlockParams {
  Tensor wq, wk, wv; ///< d x d
  Tensor wo;         ///< d x d
  Tensor w1, b1;     ///< d x d_f, d_f
  Tensor w2, b2;     ///< d_f x d, d
  Tensor ln1_gain, ln1_bias;
  Tensor ln2_gain, ln2_bias;
};

/// softmax(Q K^T / sqrt(d_k)) V with masked keys given zero weight.
/// `key_mask` has one flag per row of K; empty means all keys are real.
Tensor scaled_attention(const Tensor &q, const Tensor &k, const Tensor &v,
                        const Mask &key_mask = {});

Tensor multi_head(const Tensor &x, const TransformerBlockParams &params, std::size_t heads,
                  const Mask &key_mask = {});

/// Dropout, when active, applies to the GELU layer.
Tensor position_wise_ffn(const Tensor &x, const TransformerBlockParams &params,
                         const DropoutContext &dropout = {});

/// x + Dropout(MultiHead(LN(x))), then the same pattern around the FFN.
Tensor transformer_block(const Tensor &x, const TransformerBlockParams &params,
                         std::size_t heads, const Mask &key_mask, double ln_eps,
                         const DropoutContext &dropout = {});

/// N blocks followed by masked pooling over token rows; returns h_w of shape [d].
Tensor encode_word_level(const Tensor &x, const std::vector<TransformerBlockParams> &blocks,
                         std::size_t heads, const Mask &key_mask, double ln_eps,
                         Pooling pooling = Pooling::mean, const DropoutContext &dropout = {});

} // namespace mcdn
