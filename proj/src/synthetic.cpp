// SPDX-License-Identifier: Apache-2.0
#include "mcdn/synthetic.hpp"

#include "mcdn/rng.hpp"

namespace mcdn {

namespace {
const std::vector<std::string> kFiller{"the",  "river", "town", "road",  "people", "crops",
                                       "were", "old",   "many", "after", "quiet",  "bridge",
                                       "hill", "farm",  "rain", "late"};
const std::vector<std::string> kConnectives{"then", "so", "which then", "and later"};
constexpr const char *kMarker = "storm";
} // namespace

AltLexLexicon synthetic_lexicon() { return AltLexLexicon(kConnectives); }

std::vector<RawExample> make_marker_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RawExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : 0;
    std::vector<std::string> before, after;
    for (std::size_t j = 0, len = 2 + rng.below(4); j < len; ++j)
      before.push_back(kFiller[rng.below(kFiller.size())]);
    for (std::size_t j = 0, len = 2 + rng.below(4); j < len; ++j)
      after.push_back(kFiller[rng.below(kFiller.size())]);
    if (label == 1) {
      auto &side = rng.below(2) == 0 ? before : after;
      side.insert(side.begin() + static_cast<std::ptrdiff_t>(rng.below(side.size() + 1)),
                  kMarker);
    }
    std::string sentence;
    auto append = [&](const std::string &w) {
      if (!sentence.empty())
        sentence += ' ';
      sentence += w;
    };
    for (const auto &w : before)
      append(w);
    append(kConnectives[rng.below(kConnectives.size())]);
    for (const auto &w : after)
      append(w);
    out.push_back({sentence, label, std::nullopt});
  }
  return out;
}

std::vector<SegmentedExample> make_marker_dataset(std::size_t n, std::uint64_t seed) {
  const auto lexicon = synthetic_lexicon();
  std::vector<SegmentedExample> out;
  for (const auto &raw : make_marker_corpus(n, seed))
    out.push_back(prepare_example(raw, lexicon));
  return out;
}

} // namespace mcdn
