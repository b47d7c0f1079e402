// SPDX-License-Identifier: Apache-2.0
#include "mcdn/text.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace mcdn {

DataError::DataError(Kind kind, std::size_t line, const std::string &message)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + message : message),
      kind_(kind), line_(line) {}

namespace {

/// Decodes one UTF-8 sequence at `pos`; invalid bytes decode as themselves.
char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t &width) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t i) {
    return pos + i < s.size() && (static_cast<unsigned char>(s[pos + i]) & 0xC0) == 0x80;
  };
  auto bits = [&](std::size_t i) {
    return static_cast<char32_t>(static_cast<unsigned char>(s[pos + i]) & 0x3F);
  };
  if (b0 < 0x80) {
    width = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    width = 2;
    return (static_cast<char32_t>(b0 & 0x1F) << 6) | bits(1);
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    width = 3;
    return (static_cast<char32_t>(b0 & 0x0F) << 12) | (bits(1) << 6) | bits(2);
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    width = 4;
    return (static_cast<char32_t>(b0 & 0x07) << 18) | (bits(1) << 12) | (bits(2) << 6) |
           bits(3);
  }
  width = 1;
  return b0;
}

bool is_unicode_space(char32_t c) {
  switch (c) {
  case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
  case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
  case 0x205F: case 0x3000:
    return true;
  default:
    return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_punctuation(char32_t c) {
  if (c < 0x80)
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
           (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
  switch (c) {
  case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
    return true;
  default:
    return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
           (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011);
  }
}

void append_lower(std::string &out, std::string_view bytes, char32_t c) {
  if (c >= U'A' && c <= U'Z') {
    out.push_back(static_cast<char>(c - U'A' + U'a'));
  } else if (c >= 0xC0 && c <= 0xDE && c != 0xD7 && bytes.size() == 2) {
    // Latin-1 capitals sit 0x20 below their lowercase forms.
    const char32_t lower = c + 0x20;
    out.push_back(static_cast<char>(0xC0 | (lower >> 6)));
    out.push_back(static_cast<char>(0x80 | (lower & 0x3F)));
  } else {
    out.append(bytes);
  }
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::ifstream open_input(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw DataError(DataError::Kind::io, 0, "cannot open " + path.string());
  return in;
}

} // namespace

Tokens tokenize(std::string_view text) {
  Tokens tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty())
      tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t width = 1;
    const char32_t c = decode_utf8(text, pos, width);
    const std::string_view bytes = text.substr(pos, width);
    pos += width;
    if (is_unicode_space(c)) {
      flush();
    } else if (is_punctuation(c)) {
      flush();
      tokens.emplace_back(bytes);
    } else {
      append_lower(current, bytes, c);
    }
  }
  flush();
  return tokens;
}

AltLexLexicon::AltLexLexicon(const std::vector<std::string> &phrases) {
  for (const auto &p : phrases)
    add(p);
}

bool AltLexLexicon::add(std::string_view phrase) {
  Tokens tokens = tokenize(phrase);
  if (tokens.empty())
    throw std::invalid_argument("empty AltLex phrase");
  if (tokens.size() > kMaxPhraseTokens)
    throw std::invalid_argument("AltLex phrase longer than " +
                                std::to_string(kMaxPhraseTokens) + " tokens: " +
                                std::string(phrase));
  longest_ = std::max(longest_, tokens.size());
  return entries_.insert(std::move(tokens)).second;
}

AltLexLexicon AltLexLexicon::load(const std::filesystem::path &path) {
  auto in = open_input(path);
  return parse(in);
}

AltLexLexicon AltLexLexicon::parse(std::istream &in) {
  AltLexLexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string phrase = trim(line);
    if (phrase.empty())
      continue;
    try {
      lexicon.add(phrase);
    } catch (const std::invalid_argument &e) {
      throw DataError(DataError::Kind::lexicon_entry, line_no, e.what());
    }
  }
  return lexicon;
}

std::optional<TokenRange> match_altlex(const Tokens &tokens, const AltLexLexicon &lexicon) {
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    const std::size_t longest = std::min(lexicon.longest_, tokens.size() - start);
    for (std::size_t len = longest; len >= 1; --len) {
      const Tokens candidate(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                             tokens.begin() + static_cast<std::ptrdiff_t>(start + len));
      if (lexicon.contains(candidate))
        return TokenRange{start, start + len};
    }
  }
  return std::nullopt;
}

Segmentation segment(std::size_t n_tokens, TokenRange altlex) {
  if (altlex.begin > altlex.end || altlex.end > n_tokens)
    throw std::out_of_range("AltLex range [" + std::to_string(altlex.begin) + "," +
                            std::to_string(altlex.end) + ") outside a sentence of " +
                            std::to_string(n_tokens) + " tokens");
  return {TokenRange{0, altlex.begin}, altlex, TokenRange{altlex.end, n_tokens}};
}

SegmentedExample prepare_example(const RawExample &raw, const AltLexLexicon &lexicon) {
  SegmentedExample out;
  out.tokens = tokenize(raw.sentence);
  out.label = raw.label;
  std::optional<TokenRange> range = raw.altlex;
  if (range && (range->empty() || range->end > out.tokens.size()))
    throw DataError(DataError::Kind::bad_range, 0,
                    "altlex range [" + std::to_string(range->begin) + "," +
                        std::to_string(range->end) + ") invalid for " +
                        std::to_string(out.tokens.size()) + " tokens");
  if (!range)
    range = match_altlex(out.tokens, lexicon);
  if (!range) {
    const std::size_t n = out.tokens.size();
    out.tokens.emplace_back(Vocabulary::kPadToken);
    range = TokenRange{n, n + 1};
    out.no_altlex = true;
  }
  out.spans = segment(out.tokens.size(), *range);
  return out;
}

std::vector<RawExample> read_jsonl(std::istream &in, bool require_label) {
  using nlohmann::json;
  std::vector<RawExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error &e) {
      throw DataError(DataError::Kind::malformed_json, line_no, e.what());
    }
    if (!record.is_object() || !record.contains("sentence") ||
        !record["sentence"].is_string())
      throw DataError(DataError::Kind::bad_field, line_no,
                      "record needs a string \"sentence\"");
    RawExample ex;
    ex.sentence = record["sentence"].get<std::string>();
    if (record.contains("label")) {
      const auto &label = record["label"];
      if (!label.is_number_integer() || (label.get<int>() != 0 && label.get<int>() != 1))
        throw DataError(DataError::Kind::bad_field, line_no, "\"label\" must be 0 or 1");
      ex.label = label.get<int>();
    } else if (require_label) {
      throw DataError(DataError::Kind::bad_field, line_no, "missing \"label\"");
    }
    if (record.contains("altlex") && !record["altlex"].is_null()) {
      const auto &span = record["altlex"];
      if (!span.is_array() || span.size() != 2 || !span[0].is_number_unsigned() ||
          !span[1].is_number_unsigned() || span[0].get<std::size_t>() >= span[1].get<std::size_t>())
        throw DataError(DataError::Kind::bad_range, line_no,
                        "\"altlex\" must be [start, end] with start < end");
      ex.altlex = TokenRange{span[0].get<std::size_t>(), span[1].get<std::size_t>()};
      if (ex.altlex->end > tokenize(ex.sentence).size())
        throw DataError(DataError::Kind::bad_range, line_no,
                        "\"altlex\" range exceeds the sentence length");
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::vector<RawExample> load_jsonl(const std::filesystem::path &path, bool require_label) {
  auto in = open_input(path);
  return read_jsonl(in, require_label);
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kOovToken));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[kPad] != kPadToken || tokens[kOov] != kOovToken)
    throw std::invalid_argument("vocabulary must start with the PAD and OOV tokens");
  Vocabulary vocab;
  for (std::size_t i = 2; i < tokens.size(); ++i)
    if (vocab.add(tokens[i]) != i)
      throw std::invalid_argument("duplicate vocabulary token: " + tokens[i]);
  return vocab;
}

std::size_t Vocabulary::add(const std::string &token) {
  auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (inserted)
    tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::id(const std::string &token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kOov : it->second;
}

WordVectors parse_word2vec_text(std::istream &in) {
  WordVectors vectors;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line))
    throw DataError(DataError::Kind::header_arity, 1, "missing \"count dim\" header");
  std::size_t count = 0;
  {
    std::istringstream header(line);
    std::string a, b, extra;
    if (!(header >> a >> b) || (header >> extra))
      throw DataError(DataError::Kind::header_arity, 1, "header must be \"count dim\"");
    auto parse_size = [](const std::string &s, std::size_t &out) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      return ec == std::errc() && p == s.data() + s.size();
    };
    if (!parse_size(a, count) || !parse_size(b, vectors.dim) || vectors.dim == 0)
      throw DataError(DataError::Kind::non_numeric, 1, "header must hold two positive integers");
  }
  std::unordered_set<std::string> seen;
  vectors.tokens.reserve(count);
  vectors.values.reserve(count * vectors.dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    std::istringstream row(line);
    std::string token;
    row >> token;
    std::vector<std::string> fields;
    for (std::string f; row >> f;)
      fields.push_back(std::move(f));
    if (fields.size() != vectors.dim)
      throw DataError(DataError::Kind::row_arity, line_no,
                      "expected " + std::to_string(vectors.dim) + " values for \"" + token +
                          "\", found " + std::to_string(fields.size()));
    for (const auto &f : fields) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size())
        throw DataError(DataError::Kind::non_numeric, line_no,
                        "non-numeric value \"" + f + "\"");
      vectors.values.push_back(v);
    }
    if (!seen.insert(token).second)
      throw DataError(DataError::Kind::duplicate_token, line_no,
                      "duplicate token \"" + token + "\"");
    vectors.tokens.push_back(std::move(token));
  }
  if (vectors.tokens.size() != count)
    throw DataError(DataError::Kind::row_count, line_no,
                    "header announces " + std::to_string(count) + " rows, found " +
                        std::to_string(vectors.tokens.size()));
  return vectors;
}

WordVectors load_word2vec_text(const std::filesystem::path &path) {
  auto in = open_input(path);
  return parse_word2vec_text(in);
}

void write_word2vec_text(std::ostream &out, const WordVectors &vectors) {
  out << vectors.tokens.size() << ' ' << vectors.dim << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < vectors.tokens.size(); ++i) {
    out << vectors.tokens[i];
    for (double v : vectors.row(i))
      out << ' ' << v;
    out << '\n';
  }
}

Vocabulary build_vocab(std::span<const SegmentedExample> corpus,
                       const std::set<std::string> *embedded) {
  Vocabulary vocab;
  for (const auto &ex : corpus)
    for (const auto &tok : ex.tokens)
      if (!embedded || embedded->count(tok))
        vocab.add(tok);
  return vocab;
}

std::size_t EncodedBatch::real_length(std::size_t b) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < length; ++t)
    n += pad_mask[at(b, t)] ? 1 : 0;
  return n;
}

EncodedBatch encode_batch(std::span<const SegmentedExample> examples,
                          const Vocabulary &vocab, std::size_t max_len, Padding padding) {
  if (examples.empty())
    throw std::invalid_argument("encode_batch: empty batch");
  if (max_len == 0)
    throw std::invalid_argument("encode_batch: max_len must be positive");

  std::vector<TokenRange> windows;
  windows.reserve(examples.size());
  std::size_t length = 0;
  for (const auto &ex : examples) {
    const std::size_t n = ex.tokens.size();
    const TokenRange &l = ex.spans.altlex;
    if (l.size() > max_len)
      throw DataError(DataError::Kind::too_long, 0,
                      "AltLex of " + std::to_string(l.size()) +
                          " tokens exceeds max_len " + std::to_string(max_len));
    TokenRange window{0, n};
    if (n > max_len) {
      const std::size_t start = l.end > max_len ? l.end - max_len : 0;
      window = {start, start + max_len};
    }
    windows.push_back(window);
    length = std::max(length, window.size());
  }

  if (padding == Padding::to_max_len)
    length = max_len;

  EncodedBatch batch;
  batch.batch = examples.size();
  batch.length = length;
  const std::size_t cells = batch.batch * length;
  batch.ids.assign(cells, Vocabulary::kPad);
  batch.positions.resize(cells);
  batch.segment_ids.assign(cells, kPadSegment);
  batch.pad_mask.assign(cells, 0);
  batch.labels.assign(batch.batch, -1);
  for (std::size_t b = 0; b < examples.size(); ++b) {
    const auto &ex = examples[b];
    const auto &spans = ex.spans;
    for (std::size_t t = 0; t < length; ++t)
      batch.positions[batch.at(b, t)] = t;
    for (std::size_t src = windows[b].begin; src < windows[b].end; ++src) {
      const std::size_t cell = batch.at(b, src - windows[b].begin);
      batch.ids[cell] = vocab.id(ex.tokens[src]);
      batch.segment_ids[cell] = src < spans.altlex.begin ? kBefore
                                : src < spans.altlex.end ? kAltLex
                                                         : kAfter;
      batch.pad_mask[cell] = 1;
    }
    if (ex.label)
      batch.labels[b] = *ex.label;
  }
  return batch;
}

} // namespace mcdn
