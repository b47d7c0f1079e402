// SPDX-License-Identifier: Apache-2.0
#include "mcdn/encoder_scrn.hpp"

#include <algorithm>

namespace mcdn {

Tensor segment_object(const Tensor &segment, const std::vector<ConvBank> &banks) {
  if (banks.empty())
    throw std::invalid_argument("segment_object: no kernel banks");
  std::size_t widest = 0;
  for (const auto &b : banks)
    widest = std::max(widest, b.window);
  Tensor x = segment;
  if (x.rows() < widest)
    x = ops::pad_rows(x, widest - x.rows());
  std::vector<Tensor> pooled;
  pooled.reserve(banks.size());
  for (const auto &b : banks)
    pooled.push_back(ops::max_over_time(ops::conv1d_same(x, b.kernels, b.bias)));
  return banks.size() == 1 ? pooled.front() : ops::concat(pooled);
}

ObjectSet segment_objects(const Tensor &x, const Segmentation &spans,
                          const std::vector<ConvBank> &banks) {
  if (spans.after.end > x.rows())
    throw ShapeError("segment_objects: spans exceed the representation");
  auto object = [&](TokenRange r) {
    if (r.empty())
      return segment_object(Tensor::zeros({1, x.cols()}), banks);
    return segment_object(ops::slice_rows(x, r.begin, r.end), banks);
  };
  return {object(spans.before), object(spans.altlex), object(spans.after)};
}

Tensor sentence_context(const Tensor &x, const std::vector<BiGruLayer> &layers,
                        const DropoutContext &dropout) {
  if (layers.empty())
    throw std::invalid_argument("sentence_context: no GRU layers");
  Tensor input = x;
  Tensor final_fwd, final_bwd;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto &layer = layers[l];
    auto fwd = gru_layer(input, Tensor::zeros({layer.forward.hidden()}), layer.forward,
                         Direction::forward);
    auto bwd = gru_layer(input, Tensor::zeros({layer.backward.hidden()}), layer.backward,
                         Direction::backward);
    final_fwd = fwd.final;
    final_bwd = bwd.final;
    if (l + 1 < layers.size())
      // Backward states come in traversal order; flip them back to time order.
      input = dropout(ops::concat({fwd.states, ops::reverse_rows(bwd.states)}));
  }
  return ops::concat({final_fwd, final_bwd});
}

Tensor build_pairs(const ObjectSet &o, const Tensor &h_g) {
  return ops::stack_rows({ops::concat({o.bl, o.l, h_g}), ops::concat({o.l, o.al, h_g}),
                          ops::concat({o.bl, o.al, h_g}), ops::concat({o.al, o.bl, h_g})});
}

Tensor relation_reason(const Tensor &pairs, const ScrnParams &p, const DropoutContext &dropout) {
  auto g = linear(dropout(ops::relu(linear(pairs, p.g1_w, p.g1_b))), p.g2_w, p.g2_b);
  return linear(dropout(ops::relu(linear(ops::sum_rows(g), p.f1_w, p.f1_b))), p.f2_w, p.f2_b);
}

} // namespace mcdn
