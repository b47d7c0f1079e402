// SPDX-License-Identifier: Apache-2.0
#include "mcdn/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace mcdn {

namespace {

constexpr std::string_view kMagic = "MCDN";

class Writer {
public:
  void bytes(std::string_view s) { out_.append(s); }
  template <typename U> void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i)
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void string32(std::string_view s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void string64(std::string_view s) {
    uint(static_cast<std::uint64_t>(s.size()));
    bytes(s);
  }
  std::string take() { return std::move(out_); }

private:
  std::string out_;
};

class Reader {
public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t n) {
    if (n > in_.size() - pos_)
      throw CheckpointError(CheckpointError::Kind::truncated,
                            "checkpoint truncated at byte " + std::to_string(pos_));
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename U> U uint() {
    auto s = bytes(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  std::string string32() { return std::string(bytes(uint<std::uint32_t>())); }
  std::string string64() { return std::string(bytes(uint<std::uint64_t>())); }
  bool done() const { return pos_ == in_.size(); }

private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

[[noreturn]] void malformed(const std::string &what) {
  throw CheckpointError(CheckpointError::Kind::malformed, "malformed checkpoint: " + what);
}

struct Header {
  Config config;
  std::vector<std::string> tokens;
};

Header read_header(Reader &r) {
  if (r.bytes(kMagic.size()) != kMagic)
    throw CheckpointError(CheckpointError::Kind::bad_magic, "not a checkpoint file");
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::version,
                          "checkpoint version " + std::to_string(version) +
                              " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  Header h;
  try {
    apply_json(h.config, nlohmann::json::parse(r.string64()));
    h.config.validate();
  } catch (const nlohmann::json::exception &e) {
    malformed(std::string("config: ") + e.what());
  } catch (const ConfigError &e) {
    malformed(e.what());
  }
  const auto count = r.uint<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i)
    h.tokens.push_back(r.string32());
  return h;
}

void read_parameters(Reader &r, Model &model) {
  auto &entries = model.params().entries();
  const auto count = r.uint<std::uint64_t>();
  if (count != entries.size())
    malformed("expected " + std::to_string(entries.size()) + " parameters, found " +
              std::to_string(count));
  // Decode everything first so a failure leaves the model untouched.
  std::vector<std::vector<double>> values(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto name = r.string32();
    if (name != entries[i].name)
      malformed("expected parameter " + entries[i].name + ", found " + name);
    const auto rank = r.uint<std::uint32_t>();
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k)
      shape.push_back(r.uint<std::uint64_t>());
    if (shape != entries[i].value.shape())
      malformed("parameter " + name + " has shape " + shape_str(shape) + ", expected " +
                shape_str(entries[i].value.shape()));
    values[i].resize(shape_numel(shape));
    for (double &v : values[i])
      v = static_cast<double>(std::bit_cast<float>(r.uint<std::uint32_t>()));
  }
  if (!r.done())
    malformed("trailing bytes after the last parameter");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto data = entries[i].value.mutable_data();
    std::copy(values[i].begin(), values[i].end(), data.begin());
  }
}

} // namespace

std::string serialize_model(const Model &model) {
  Writer w;
  w.bytes(kMagic);
  w.uint(kCheckpointVersion);
  w.string64(to_json(model.config()).dump());
  const auto &tokens = model.vocab().tokens();
  w.uint(static_cast<std::uint64_t>(tokens.size()));
  for (const auto &t : tokens)
    w.string32(t);
  const auto &entries = model.params().entries();
  w.uint(static_cast<std::uint64_t>(entries.size()));
  for (const auto &p : entries) {
    w.string32(p.name);
    w.uint(static_cast<std::uint32_t>(p.value.rank()));
    for (auto extent : p.value.shape())
      w.uint(static_cast<std::uint64_t>(extent));
    for (double v : p.value.data())
      w.uint(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return w.take();
}

Model deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  auto header = read_header(r);
  Vocabulary vocab;
  try {
    vocab = Vocabulary::from_tokens(std::move(header.tokens));
  } catch (const std::invalid_argument &e) {
    malformed(e.what());
  }
  Model model(header.config, std::move(vocab), 0);
  read_parameters(r, model);
  return model;
}

void restore_parameters(Model &model, std::string_view bytes) {
  Reader r(bytes);
  auto header = read_header(r);
  if (header.tokens != model.vocab().tokens())
    malformed("vocabulary differs from the target model");
  read_parameters(r, model);
}

void save_checkpoint(const Model &model, const std::filesystem::path &path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw CheckpointError(CheckpointError::Kind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw CheckpointError(CheckpointError::Kind::io, "failed writing " + path.string());
}

Model load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

} // namespace mcdn
