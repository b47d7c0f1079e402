// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "mcdn/text.hpp"

namespace mcdn {

/// Small labelled corpus for sanity runs: every sentence carries an AltLex
/// from `synthetic_lexicon()`, and the label is 1 exactly when the marker
/// token "storm" occurs. Classes alternate, so n/2 rows are positive.
std::vector<RawExample> make_marker_corpus(std::size_t n, std::uint64_t seed);

AltLexLexicon synthetic_lexicon();

/// make_marker_corpus followed by prepare_example.
std::vector<SegmentedExample> make_marker_dataset(std::size_t n, std::uint64_t seed);

} // namespace mcdn
