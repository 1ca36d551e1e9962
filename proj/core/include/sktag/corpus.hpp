#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sktag {

/// A part-of-speech label. Names match `[A-Z_]+`.
using Tag = std::string;

bool is_valid_tag(std::string_view name);

struct TaggedSentence {
  std::vector<std::string> words;
  std::vector<Tag> tags;

  std::size_t size() const { return words.size(); }
  bool operator==(const TaggedSentence&) const = default;
};

struct Corpus {
  std::vector<TaggedSentence> sentences;
  std::string source_name;

  std::size_t size() const { return sentences.size(); }
  std::size_t word_count() const;
  // source_name is provenance, not content.
  bool operator==(const Corpus& other) const { return sentences == other.sentences; }
};

/// Throws DataError unless words/tags are non-empty, aligned, tab- and
/// whitespace-free, and every tag is valid.
void validate(const TaggedSentence& sentence);

/// Dense, sorted tag <-> id mapping.
class TagSet {
 public:
  TagSet() = default;
  /// Sorts and deduplicates `tags`; throws DataError on an invalid name.
  explicit TagSet(std::vector<Tag> tags);

  std::size_t size() const { return tags_.size(); }
  bool empty() const { return tags_.empty(); }
  const std::vector<Tag>& tags() const { return tags_; }
  const Tag& tag(std::int32_t id) const;
  std::int32_t id(const Tag& tag) const;  // throws DataError for unknown tags
  bool contains(const Tag& tag) const { return index_.count(tag) != 0; }

  bool operator==(const TagSet& other) const { return tags_ == other.tags_; }

 private:
  std::vector<Tag> tags_;
  std::map<Tag, std::int32_t> index_;
};

/// Parses `word<TAB>tag` lines with blank-line sentence separators.
Corpus parse_conll(std::string_view text, std::string source_name = {});
/// Inverse of parse_conll. Every sentence, including the last, is followed by
/// one blank line.
std::string write_conll(const Corpus& corpus);

Corpus read_conll_file(const std::string& path);
void write_conll_file(const Corpus& corpus, const std::string& path);

struct CorpusSplit {
  Corpus train;
  Corpus val;
};

/// Seeded shuffle, then the first round(val_ratio * N) (clamped to [1, N-1])
/// sentences go to validation.
CorpusSplit split(const Corpus& corpus, double val_ratio, std::uint64_t seed);

TagSet tagset_of(const Corpus& corpus);

}  // namespace sktag
