// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "mcdn/model.hpp"

namespace mcdn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
  enum class Kind { io, bad_magic, version, truncated, malformed };
  CheckpointError(Kind kind, const std::string &message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

/// "MCDN", u32 version, u64-prefixed JSON config, u64 token count with
/// u32-prefixed tokens, u64 parameter count, then per parameter: u32-prefixed
/// name, u32 rank, u64 extents, little-endian float32 values.
std::string serialize_model(const Model &model);
Model deserialize_model(std::string_view bytes);

/// Overwrites the parameters of `model` from a serialized checkpoint of a
/// model with identical configuration and vocabulary.
void restore_parameters(Model &model, std::string_view bytes);

void save_checkpoint(const Model &model, const std::filesystem::path &path);
Model load_checkpoint(const std::filesystem::path &path);

} // namespace mcdn
