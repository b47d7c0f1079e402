// SPDX-License-Identifier: Apache-2.0
#include "mcdn/model.hpp"

#include <cmath>

namespace mcdn {

namespace {

class Initializer {
public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape shape, double limit) {
    std::vector<double> v(shape_numel(shape));
    for (double &x : v)
      x = rng_.uniform(-limit, limit);
    return Tensor::from(std::move(shape), std::move(v));
  }

  Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out) {
    return uniform(std::move(shape), std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
  }

  Tensor glorot(std::size_t rows, std::size_t cols) { return glorot({rows, cols}, rows, cols); }

  Tensor normal(Shape shape, double stddev) {
    std::vector<double> v(shape_numel(shape));
    for (double &x : v)
      x = stddev * rng_.normal();
    return Tensor::from(std::move(shape), std::move(v));
  }

private:
  Rng rng_;
};

} // namespace

Model::Model(Config config, Vocabulary vocab, std::uint64_t seed, const WordVectors *pretrained)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  const auto &m = config_.model;
  const std::size_t d = m.d, dg = m.dg, rel = m.relation_width();
  if (pretrained && pretrained->dim != d)
    throw ConfigError("embedding dimension " + std::to_string(pretrained->dim) +
                      " does not match d = " + std::to_string(d));
  Initializer init(seed);
  const double embed_std = 1.0 / std::sqrt(static_cast<double>(d));

  // Representation.
  auto word = init.normal({vocab_.size(), d}, embed_std);
  if (pretrained) {
    auto values = word.mutable_data();
    for (std::size_t i = 0; i < pretrained->tokens.size(); ++i) {
      if (!vocab_.contains(pretrained->tokens[i]))
        continue;
      const std::size_t id = vocab_.id(pretrained->tokens[i]);
      if (id == Vocabulary::kPad || id == Vocabulary::kOov)
        continue;
      auto row = pretrained->row(i);
      std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(id * d));
    }
  }
  for (std::size_t j = 0; j < d; ++j)
    word.mutable_data()[Vocabulary::kPad * d + j] = 0.0;
  Mask word_frozen(vocab_.size(), m.freeze_embeddings ? 1 : 0);
  word_frozen[Vocabulary::kPad] = 1;
  word_frozen[Vocabulary::kOov] = 0;
  rep_.word = params_.add("embed.word", word, true, word_frozen);
  rep_.word_frozen = word_frozen;
  if (m.positional == Positional::learned)
    rep_.position = params_.add("embed.position", init.normal({m.max_len, d}, embed_std));
  else
    rep_.position = params_.add("embed.position", sinusoidal_table(m.max_len, d), false);
  auto segment = init.normal({kSegmentCount, d}, embed_std);
  for (std::size_t j = 0; j < d; ++j)
    segment.mutable_data()[kPadSegment * d + j] = 0.0;
  Mask segment_frozen(kSegmentCount, 0);
  segment_frozen[kPadSegment] = 1;
  rep_.segment = params_.add("embed.segment", segment, true, segment_frozen);
  rep_.segment_frozen = segment_frozen;

  // Word-level encoder.
  const std::size_t df = m.ffn_dim();
  for (std::size_t i = 0; i < m.n_blocks; ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    TransformerBlockParams b;
    b.wq = params_.add(p + "wq", init.glorot(d, d));
    b.wk = params_.add(p + "wk", init.glorot(d, d));
    b.wv = params_.add(p + "wv", init.glorot(d, d));
    b.wo = params_.add(p + "wo", init.glorot(d, d));
    b.w1 = params_.add(p + "w1", init.glorot(d, df));
    b.b1 = params_.add(p + "b1", Tensor::zeros({df}));
    b.w2 = params_.add(p + "w2", init.glorot(df, d));
    b.b2 = params_.add(p + "b2", Tensor::zeros({d}));
    b.ln1_gain = params_.add(p + "ln1.gain", Tensor::full({d}, 1.0));
    b.ln1_bias = params_.add(p + "ln1.bias", Tensor::zeros({d}));
    b.ln2_gain = params_.add(p + "ln2.gain", Tensor::full({d}, 1.0));
    b.ln2_bias = params_.add(p + "ln2.bias", Tensor::zeros({d}));
    blocks_.push_back(b);
  }

  // Segment-level encoder.
  const auto channels = m.channels_per_window();
  for (std::size_t i = 0; i < m.windows.size(); ++i) {
    const std::size_t w = m.windows[i], c = channels[i];
    const std::string p = "scrn.conv" + std::to_string(i) + ".";
    ConvBank bank;
    bank.window = w;
    bank.kernels = params_.add(p + "kernels", init.glorot({w, d, c}, w * d, c));
    bank.bias = params_.add(p + "bias", Tensor::zeros({c}));
    scrn_.banks.push_back(bank);
  }
  const double gru_limit = 1.0 / std::sqrt(static_cast<double>(dg));
  for (std::size_t l = 0; l < m.gru_layers; ++l) {
    const std::size_t in = l == 0 ? d : 2 * dg;
    auto make = [&](const std::string &p) {
      return GruWeights{params_.add(p + "input", init.uniform({in, 3 * dg}, gru_limit)),
                        params_.add(p + "recurrent", init.uniform({dg, 3 * dg}, gru_limit)),
                        params_.add(p + "bias", init.uniform({3 * dg}, gru_limit))};
    };
    const std::string p = "scrn.gru" + std::to_string(l) + ".";
    BiGruLayer layer;
    layer.forward = make(p + "fwd.");
    layer.backward = make(p + "bwd.");
    scrn_.gru.push_back(layer);
  }
  scrn_.g1_w = params_.add("scrn.g.w1", init.glorot(m.pair_width(), rel));
  scrn_.g1_b = params_.add("scrn.g.b1", Tensor::zeros({rel}));
  scrn_.g2_w = params_.add("scrn.g.w2", init.glorot(rel, rel));
  scrn_.g2_b = params_.add("scrn.g.b2", Tensor::zeros({rel}));
  scrn_.f1_w = params_.add("scrn.f.w1", init.glorot(rel, rel));
  scrn_.f1_b = params_.add("scrn.f.b1", Tensor::zeros({rel}));
  scrn_.f2_w = params_.add("scrn.f.w2", init.glorot(rel, rel));
  scrn_.f2_b = params_.add("scrn.f.b2", Tensor::zeros({rel}));

  // Classifier.
  head_.w3 = params_.add("head.w3", init.glorot(m.unified_width(), dg));
  head_.b3 = params_.add("head.b3", Tensor::zeros({dg}));
  head_.w4 = params_.add("head.w4", init.glorot(dg, 2));
  head_.b4 = params_.add("head.b4", Tensor::zeros({2}));
}

void Model::set_run_config(const LossConfig &loss, const TrainConfig &train) {
  Config next = config_;
  next.loss = loss;
  next.train = train;
  next.validate();
  config_ = next;
}

EncodedBatch Model::encode(std::span<const SegmentedExample> examples) const {
  return encode_batch(examples, vocab_, config_.model.max_len, Padding::to_longest);
}

Segmentation spans_from_segment_ids(std::span<const std::size_t> ids) {
  const std::size_t n = ids.size();
  std::size_t i = 0;
  while (i < n && ids[i] == kBefore)
    ++i;
  const std::size_t l_begin = i;
  while (i < n && ids[i] == kAltLex)
    ++i;
  const std::size_t l_end = i;
  while (i < n && ids[i] == kAfter)
    ++i;
  if (i != n)
    throw std::invalid_argument("segment ids are not in BL, L, AL order");
  return segment(n, {l_begin, l_end});
}

Tensor Model::forward_example(const EncodedBatch &batch, std::size_t b,
                              const DropoutContext &dropout, ForwardTrace *trace) const {
  if (b >= batch.batch)
    throw std::out_of_range("forward_example: row out of range");
  const auto &m = config_.model;
  if (batch.length > m.max_len)
    throw ShapeError("batch length exceeds max_len");
  const auto row = [&](const auto &v) {
    return std::vector<std::size_t>(v.begin() + static_cast<std::ptrdiff_t>(batch.at(b, 0)),
                                    v.begin() + static_cast<std::ptrdiff_t>(batch.at(b, 0) +
                                                                            batch.length));
  };
  const auto ids = row(batch.ids);
  const auto positions = row(batch.positions);
  const auto segments = row(batch.segment_ids);
  const Mask key_mask(batch.pad_mask.begin() + static_cast<std::ptrdiff_t>(batch.at(b, 0)),
                      batch.pad_mask.begin() +
                          static_cast<std::ptrdiff_t>(batch.at(b, 0) + batch.length));
  const std::size_t n = batch.real_length(b);
  if (n == 0)
    throw std::invalid_argument("forward_example: empty row");

  auto x = represent_full(rep_, ids, positions, segments, dropout);
  auto h_w = encode_word_level(x, blocks_, m.heads, key_mask, m.ln_eps, m.pooling, dropout);

  const std::vector<std::size_t> real_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
  const std::vector<std::size_t> real_segments(segments.begin(),
                                               segments.begin() + static_cast<std::ptrdiff_t>(n));
  auto xs = represent_scrn(rep_, real_ids, real_segments, dropout);
  auto objects = segment_objects(xs, spans_from_segment_ids(real_segments), scrn_.banks);
  auto h_g = sentence_context(xs, scrn_.gru, dropout);
  auto pairs = build_pairs(objects, h_g);
  auto h_s = relation_reason(pairs, scrn_, dropout);
  auto probabilities = classify(h_w, h_s, head_);
  if (trace)
    *trace = {h_w, objects, h_g, pairs, h_s, probabilities};
  return probabilities;
}

Tensor Model::forward(const EncodedBatch &batch, const DropoutContext &dropout) const {
  std::vector<Tensor> rows;
  rows.reserve(batch.batch);
  for (std::size_t b = 0; b < batch.batch; ++b)
    rows.push_back(forward_example(batch, b, dropout));
  return ops::stack_rows(rows);
}

Objective Model::objective(const EncodedBatch &batch, const DropoutContext &dropout) const {
  for (int y : batch.labels)
    if (y != 0 && y != 1)
      throw std::invalid_argument("objective: batch contains unlabelled examples");
  auto probabilities = forward(batch, dropout);
  auto causal = ops::slice_cols(probabilities, kCausalClass, kCausalClass + 1);
  Objective out;
  auto focal = focal_loss(causal, batch.labels, config_.loss);
  out.focal = focal.item();
  if (config_.loss.l2 > 0.0) {
    auto penalty = params_.l2_penalty();
    out.l2 = config_.loss.l2 * penalty.item();
    out.total = ops::add(focal, ops::scale(penalty, config_.loss.l2));
  } else {
    out.total = focal;
  }
  return out;
}

std::vector<std::array<double, 2>> Model::predict(std::span<const SegmentedExample> examples,
                                                  std::size_t batch_size) const {
  if (batch_size == 0)
    throw std::invalid_argument("predict: batch size must be positive");
  NoGradGuard no_grad;
  std::vector<std::array<double, 2>> out;
  out.reserve(examples.size());
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const auto chunk = examples.subspan(start, std::min(batch_size, examples.size() - start));
    const auto batch = encode(chunk);
    for (std::size_t b = 0; b < batch.batch; ++b) {
      auto p = forward_example(batch, b);
      out.push_back({p.at(0), p.at(1)});
    }
  }
  return out;
}

} // namespace mcdn
