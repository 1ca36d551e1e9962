#include "sktag/augment.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "sktag/error.hpp"

namespace sktag {

void WindowSpec::validate() const {
  if (min_size < 1) throw DataError("window min size must be at least 1");
  if (max_size && *max_size < min_size) {
    throw DataError("window max size " + std::to_string(*max_size) + " is below min size " +
                    std::to_string(min_size));
  }
}

std::vector<TaggedSentence> windows(const TaggedSentence& sentence, const WindowSpec& spec) {
  spec.validate();
  const std::size_t n = sentence.size();
  const std::size_t hi = spec.max_size ? std::min(*spec.max_size, n) : n;
  std::vector<TaggedSentence> out;
  for (std::size_t w = spec.min_size; w <= hi; ++w) {
    for (std::size_t s = 0; s + w <= n; ++s) {
      const auto first = static_cast<std::ptrdiff_t>(s);
      const auto last = static_cast<std::ptrdiff_t>(s + w);
      out.push_back({{sentence.words.begin() + first, sentence.words.begin() + last},
                     {sentence.tags.begin() + first, sentence.tags.begin() + last}});
    }
  }
  return out;
}

Corpus augment_corpus(const Corpus& corpus, const WindowSpec& spec) {
  spec.validate();
  Corpus out;
  out.source_name = corpus.source_name + "#windows";
  std::set<std::pair<std::vector<std::string>, std::vector<Tag>>> seen;
  for (const auto& sentence : corpus.sentences) {
    for (auto& fragment : windows(sentence, spec)) {
      if (spec.dedup && !seen.emplace(fragment.words, fragment.tags).second) continue;
      out.sentences.push_back(std::move(fragment));
    }
  }
  return out;
}

std::size_t window_count(const Corpus& corpus) {
  std::size_t total = 0;
  for (const auto& s : corpus.sentences) total += s.size() * (s.size() + 1) / 2;
  return total;
}

}  // namespace sktag
