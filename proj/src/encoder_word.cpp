// SPDX-License-Identifier: Apache-2.0
#include "mcdn/encoder_word.hpp"

#include <cmath>

namespace mcdn {

Tensor scaled_attention(const Tensor &q, const Tensor &k, const Tensor &v,
                        const Mask &key_mask) {
  if (q.cols() != k.cols())
    throw ShapeError("scaled_attention: query/key widths differ");
  if (k.rows() != v.rows())
    throw ShapeError("scaled_attention: key/value counts differ");
  const std::size_t n_q = q.rows(), n_k = k.rows();
  auto scores = ops::scale(ops::matmul(q, ops::transpose(k)),
                           1.0 / std::sqrt(static_cast<double>(q.cols())));
  Mask mask;
  if (!key_mask.empty()) {
    if (key_mask.size() != n_k)
      throw ShapeError("scaled_attention: key mask length mismatch");
    mask.reserve(n_q * n_k);
    for (std::size_t i = 0; i < n_q; ++i)
      mask.insert(mask.end(), key_mask.begin(), key_mask.end());
  }
  return ops::matmul(ops::softmax_rows(scores, mask), v);
}

Tensor multi_head(const Tensor &x, const TransformerBlockParams &params, std::size_t heads,
                  const Mask &key_mask) {
  const std::size_t d = x.cols();
  if (heads == 0 || d % heads != 0)
    throw ShapeError("multi_head: heads must divide d");
  const std::size_t dk = d / heads;
  auto q = ops::matmul(x, params.wq);
  auto k = ops::matmul(x, params.wk);
  auto v = ops::matmul(x, params.wv);
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t lo = h * dk, hi = lo + dk;
    outs.push_back(scaled_attention(ops::slice_cols(q, lo, hi), ops::slice_cols(k, lo, hi),
                                    ops::slice_cols(v, lo, hi), key_mask));
  }
  return ops::matmul(heads == 1 ? outs.front() : ops::concat(outs), params.wo);
}

Tensor position_wise_ffn(const Tensor &x, const TransformerBlockParams &params,
                         const DropoutContext &dropout) {
  return linear(dropout(ops::gelu(linear(x, params.w1, params.b1))), params.w2, params.b2);
}

Tensor transformer_block(const Tensor &x, const TransformerBlockParams &params,
                         std::size_t heads, const Mask &key_mask, double ln_eps,
                         const DropoutContext &dropout) {
  auto attended = multi_head(ops::layer_norm(x, params.ln1_gain, params.ln1_bias, ln_eps),
                             params, heads, key_mask);
  auto x1 = ops::add(x, dropout(attended));
  auto fed = position_wise_ffn(ops::layer_norm(x1, params.ln2_gain, params.ln2_bias, ln_eps),
                               params, dropout);
  return ops::add(x1, dropout(fed));
}

Tensor encode_word_level(const Tensor &x, const std::vector<TransformerBlockParams> &blocks,
                         std::size_t heads, const Mask &key_mask, double ln_eps,
                         Pooling pooling, const DropoutContext &dropout) {
  if (blocks.empty())
    throw std::invalid_argument("encode_word_level: no blocks");
  Tensor h = x;
  for (const auto &block : blocks)
    h = transformer_block(h, block, heads, key_mask, ln_eps, dropout);
  const Mask rows = key_mask.empty() ? Mask(h.rows(), 1) : key_mask;
  return pooling == Pooling::mean ? ops::masked_mean_rows(h, rows)
                                  : ops::masked_max_rows(h, rows);
}

} // namespace mcdn
