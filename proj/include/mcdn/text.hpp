// SPDX-License-Identifier: Apache-2.0
/**
 * @file   text.hpp
 * @brief  Tokenization, AltLex matching, BL/L/AL segmentation, vocabulary,
 *         word2vec text loading and batch encoding.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mcdn/ops.hpp"

namespace mcdn {

using Tokens = std::vector<std::string>;

/// Malformed input data. `line` is 1-based, 0 when not tied to a line.
class DataError : public std::runtime_error {
public:
  enum class Kind {
    io,
    header_arity,
    row_arity,
    non_numeric,
    duplicate_token,
    row_count,
    malformed_json,
    bad_field,
    bad_range,
    lexicon_entry,
    too_long,
  };

  DataError(Kind kind, std::size_t line, const std::string &message);

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

private:
  Kind kind_;
  std::size_t line_;
};

/// Half-open token index range [begin, end).
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  friend bool operator==(const TokenRange &, const TokenRange &) = default;
};

/// Lowercases, splits on Unicode whitespace, and emits every punctuation
/// character as its own token.
Tokens tokenize(std::string_view text);

/// Lowercase AltLex phrases of 1..6 tokens, deduplicated and kept ordered.
class AltLexLexicon {
public:
  static constexpr std::size_t kMaxPhraseTokens = 6;

  AltLexLexicon() = default;
  explicit AltLexLexicon(const std::vector<std::string> &phrases);

  /// Adds a phrase after tokenizing it. Returns false for duplicates.
  bool add(std::string_view phrase);
  bool contains(const Tokens &phrase) const { return entries_.count(phrase) != 0; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::set<Tokens> &entries() const { return entries_; }

  static AltLexLexicon load(const std::filesystem::path &path);
  static AltLexLexicon parse(std::istream &in);

private:
  std::set<Tokens> entries_;
  std::size_t longest_ = 0;

  friend std::optional<TokenRange> match_altlex(const Tokens &, const AltLexLexicon &);
};

/// Leftmost match; at equal starts the longest phrase wins.
std::optional<TokenRange> match_altlex(const Tokens &tokens, const AltLexLexicon &lexicon);

/// BL = [0, start), L = altlex, AL = [end, n).
struct Segmentation {
  TokenRange before;
  TokenRange altlex;
  TokenRange after;
};

Segmentation segment(std::size_t n_tokens, TokenRange altlex);

struct RawExample {
  std::string sentence;
  std::optional<int> label;
  std::optional<TokenRange> altlex;
};

struct SegmentedExample {
  Tokens tokens;
  Segmentation spans;
  std::optional<int> label;
  /// Set when no AltLex was found and the synthetic PAD marker was appended.
  bool no_altlex = false;
};

/// Tokenizes and segments. A provided altlex range takes precedence over the
/// lexicon. Without any match, a PAD token is appended as L with BL covering the
/// sentence and AL empty.
SegmentedExample prepare_example(const RawExample &raw, const AltLexLexicon &lexicon);

/// Reads JSON Lines records {"sentence", "label", "altlex"}.
std::vector<RawExample> read_jsonl(std::istream &in, bool require_label);
std::vector<RawExample> load_jsonl(const std::filesystem::path &path, bool require_label);

/// Token ids with PAD = 0 and OOV = 1 reserved.
class Vocabulary {
public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kOov = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kOovToken = "<unk>";

  Vocabulary();
  /// Rebuilds from an id-ordered token list whose first two are PAD and OOV.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t add(const std::string &token);
  std::size_t id(const std::string &token) const;
  bool contains(const std::string &token) const { return index_.count(token) != 0; }
  const std::string &token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string> &tokens() const { return tokens_; }

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Word vectors in file order.
struct WordVectors {
  std::vector<std::string> tokens;
  std::size_t dim = 0;
  std::vector<double> values; ///< tokens.size() x dim, row-major

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
};

WordVectors parse_word2vec_text(std::istream &in);
WordVectors load_word2vec_text(const std::filesystem::path &path);
void write_word2vec_text(std::ostream &out, const WordVectors &vectors);

/// Vocabulary over corpus tokens in first-appearance order. With `embedded`
/// set, only tokens present there get their own id; everything else is OOV.
/// Without it, every corpus token gets an id.
Vocabulary build_vocab(std::span<const SegmentedExample> corpus,
                       const std::set<std::string> *embedded);

/// Segment ids used in encoded batches.
enum SegmentId : std::size_t { kBefore = 0, kAltLex = 1, kAfter = 2, kPadSegment = 3 };
inline constexpr std::size_t kSegmentCount = 4;

struct EncodedBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<std::size_t> ids;         ///< batch x length
  std::vector<std::size_t> positions;   ///< batch x length
  std::vector<std::size_t> segment_ids; ///< batch x length
  Mask pad_mask;                        ///< batch x length, 1 = real token
  std::vector<int> labels;              ///< batch, -1 when unlabelled

  std::size_t at(std::size_t b, std::size_t t) const { return b * length + t; }
  /// Number of real tokens in row b.
  std::size_t real_length(std::size_t b) const;
};

enum class Padding { to_max_len, to_longest };

/// Sequences over max_len keep a max_len window that drops tokens from the
/// right, shifting left only as far as needed to keep L whole. Rows are padded
/// to max_len, or to the longest window in the batch with Padding::to_longest.
EncodedBatch encode_batch(std::span<const SegmentedExample> examples,
                          const Vocabulary &vocab, std::size_t max_len,
                          Padding padding = Padding::to_max_len);

} // namespace mcdn
