// SPDX-License-Identifier: Apache-2.0
#include "mcdn/representation.hpp"

#include <cmath>

namespace mcdn {

namespace {
void check_lengths(std::size_t a, std::size_t b) {
  if (a != b)
    throw ShapeError("representation: id and index lists differ in length");
  if (a == 0)
    throw ShapeError("representation: empty token list");
}
} // namespace

Tensor represent_full(const RepresentationParams &params, const std::vector<std::size_t> &ids,
                      const std::vector<std::size_t> &positions,
                      const std::vector<std::size_t> &segment_ids,
                      const DropoutContext &dropout) {
  check_lengths(ids.size(), positions.size());
  check_lengths(ids.size(), segment_ids.size());
  auto sum = ops::add(ops::add(ops::embedding(params.word, ids, params.word_frozen),
                               ops::embedding(params.position, positions)),
                      ops::embedding(params.segment, segment_ids, params.segment_frozen));
  return dropout(sum);
}

Tensor represent_scrn(const RepresentationParams &params, const std::vector<std::size_t> &ids,
                      const std::vector<std::size_t> &segment_ids,
                      const DropoutContext &dropout) {
  check_lengths(ids.size(), segment_ids.size());
  auto sum = ops::add(ops::embedding(params.word, ids, params.word_frozen),
                      ops::embedding(params.segment, segment_ids, params.segment_frozen));
  return dropout(sum);
}

Tensor sinusoidal_table(std::size_t max_len, std::size_t d) {
  std::vector<double> values(max_len * d);
  for (std::size_t pos = 0; pos < max_len; ++pos)
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * rate;
      values[pos * d + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  return Tensor::from({max_len, d}, std::move(values));
}

} // namespace mcdn
