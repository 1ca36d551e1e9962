#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "sktag/corpus.hpp"

namespace sktag {

/// Sliding-window range. An unset max_size means "the sentence length".
struct WindowSpec {
  std::size_t min_size = 1;
  std::optional<std::size_t> max_size;
  bool dedup = false;

  void validate() const;  // throws DataError
};

/// Every contiguous fragment with size in [min_size, min(max_size, n)],
/// ordered by size, then start offset.
std::vector<TaggedSentence> windows(const TaggedSentence& sentence, const WindowSpec& spec);

/// windows() over each sentence in order. With spec.dedup, identical
/// (words, tags) fragments are kept at their first occurrence only.
/// The result may be empty.
Corpus augment_corpus(const Corpus& corpus, const WindowSpec& spec);

/// Fragment count for the default spec without dedup: sum of n(n+1)/2.
std::size_t window_count(const Corpus& corpus);

}  // namespace sktag
