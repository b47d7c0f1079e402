// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace mcdn {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class Pooling { mean, max };
enum class Positional { learned, sinusoidal };

struct ModelConfig {
  std::size_t d = 128;
  std::size_t n_blocks = 4;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t k = 150;
  std::vector<std::size_t> windows{2, 3, 4};
  std::size_t dg = 64;
  std::size_t gru_layers = 2;
  double dropout = 0.5;
  std::size_t max_len = 128;
  double ln_eps = 1e-5;
  Pooling pooling = Pooling::mean;
  Positional positional = Positional::learned;
  bool freeze_embeddings = false;

  std::size_t ffn_dim() const { return ffn_mult * d; }
  std::size_t head_dim() const { return d / heads; }
  /// Channels per window; the first `k % windows` banks take one extra.
  std::vector<std::size_t> channels_per_window() const;
  std::size_t pair_width() const { return 2 * k + 2 * dg; }
  std::size_t relation_width() const { return 4 * dg; }
  std::size_t unified_width() const { return d + relation_width(); }
  std::size_t max_window() const;
};

struct LossConfig {
  double alpha = 0.75;
  double beta = 4.0;
  double l2 = 3e-4;
  double clamp = 1e-7;
};

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch = 32;
  std::size_t epochs = 20;
  std::size_t patience = 2;
  double lr_decay = 0.5;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t runs = 1;
};

struct Config {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;

  /// Throws ConfigError on the first violated constraint.
  void validate() const;
};

/// Flat JSON with every field, keys sorted.
nlohmann::json to_json(const Config &config);
/// Applies the keys of a flat JSON object onto `config`. Unknown keys and
/// mistyped values are errors.
void apply_json(Config &config, const nlohmann::json &doc);
/// defaults <- file (if non-empty path) <- overrides, then validated.
Config load_config(const std::filesystem::path &path, const nlohmann::json &overrides);
/// Same layering on top of `base` instead of the defaults.
Config load_config(Config base, const std::filesystem::path &path,
                   const nlohmann::json &overrides);

} // namespace mcdn
