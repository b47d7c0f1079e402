// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mcdn/config.hpp"
#include "mcdn/encoder_scrn.hpp"
#include "mcdn/encoder_word.hpp"
#include "mcdn/head.hpp"
#include "mcdn/params.hpp"
#include "mcdn/representation.hpp"
#include "mcdn/text.hpp"

namespace mcdn {

/// Intermediate values of one example's forward pass.
struct ForwardTrace {
  Tensor h_w;
  ObjectSet objects;
  Tensor h_g;
  Tensor pairs;
  Tensor h_s;
  Tensor probabilities;
};

struct Objective {
  Tensor total; ///< focal loss mean + l2 * sum of squares
  double focal = 0.0;
  double l2 = 0.0;
};

class Model {
public:
  /// Random initialization from `seed`. Rows of the word table whose token is
  /// in `pretrained` start from those vectors.
  Model(Config config, Vocabulary vocab, std::uint64_t seed,
        const WordVectors *pretrained = nullptr);

  Model(const Model &) = delete;
  Model &operator=(const Model &) = delete;
  Model(Model &&) = default;
  Model &operator=(Model &&) = default;

  const Config &config() const { return config_; }
  /// Replaces the loss and training sections; model dimensions are fixed.
  void set_run_config(const LossConfig &loss, const TrainConfig &train);
  const Vocabulary &vocab() const { return vocab_; }
  ParamStore &params() { return params_; }
  const ParamStore &params() const { return params_; }

  const RepresentationParams &representation() const { return rep_; }
  const std::vector<TransformerBlockParams> &blocks() const { return blocks_; }
  const ScrnParams &scrn() const { return scrn_; }
  const HeadParams &head() const { return head_; }

  /// Encodes with this model's max_len, padding to the longest example.
  EncodedBatch encode(std::span<const SegmentedExample> examples) const;

  /// Class probabilities [2] for row `b` of an encoded batch.
  Tensor forward_example(const EncodedBatch &batch, std::size_t b,
                         const DropoutContext &dropout = {},
                         ForwardTrace *trace = nullptr) const;
  /// Class probabilities [B x 2].
  Tensor forward(const EncodedBatch &batch, const DropoutContext &dropout = {}) const;
  /// Focal loss over the labelled batch plus the L2 term.
  Objective objective(const EncodedBatch &batch, const DropoutContext &dropout = {}) const;

  /// Inference without gradients or dropout.
  std::vector<std::array<double, 2>> predict(std::span<const SegmentedExample> examples,
                                             std::size_t batch_size = 32) const;

private:
  Config config_;
  Vocabulary vocab_;
  ParamStore params_;
  RepresentationParams rep_;
  std::vector<TransformerBlockParams> blocks_;
  ScrnParams scrn_;
  HeadParams head_;
};

/// BL/L/AL ranges recovered from a row of segment ids (real tokens only).
Segmentation spans_from_segment_ids(std::span<const std::size_t> segment_ids);

} // namespace mcdn
