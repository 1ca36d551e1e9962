#pragma once

#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sktag/corpus.hpp"
#include "sktag/model.hpp"
#include "sktag/tokenizer.hpp"

namespace sktag {

struct SkeletonConfig {
  /// Words whose tag is listed here keep their surface form.
  std::set<Tag> keep_lexical;
  std::string separator = " ";
};

/// Word i becomes its surface form when tags[i] is in keep_lexical, else the
/// tag name.
std::string extract_skeleton(const TaggedSentence& sentence, const SkeletonConfig& cfg);

/// Tags each non-blank line of raw_text (whitespace-split words) and projects
/// it to a skeleton. Blank lines are skipped and reported through on_skip with
/// their 1-based line number. Throws DataError on empty input or unknown
/// keep_lexical tags.
std::vector<std::string> skeletonize_text(const ModelParams& params, const Tokenizer& tok,
                                          const TagSet& tagset, std::string_view raw_text,
                                          const SkeletonConfig& cfg, std::size_t max_len,
                                          const std::function<void(std::size_t)>& on_skip = {});

}  // namespace sktag
