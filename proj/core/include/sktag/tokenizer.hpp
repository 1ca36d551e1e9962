#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sktag/corpus.hpp"

namespace sktag {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr TokenId kMaskId = 4;
inline constexpr std::size_t kNumSpecials = 5;

/// Label for positions excluded from loss and metrics.
inline constexpr std::int32_t kIgnoreLabel = -1;

/// Marks a word-internal (non-initial) subword.
inline constexpr std::string_view kContinuationPrefix = "##";

enum class LengthMode { strict, truncate };

/// Model-ready layout: [CLS] subwords... [SEP] [PAD]...
struct Encoding {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> attention_mask;
  /// Index into `ids` of each surviving word's first subword.
  std::vector<std::size_t> word_starts;
  /// Per position: tag id at word starts, kIgnoreLabel elsewhere. Empty when
  /// the encoding was built without tags.
  std::vector<std::int32_t> label_ids;

  std::size_t length() const { return ids.size(); }
  /// Number of non-PAD positions (CLS + subwords + SEP).
  std::size_t active_length() const;
  bool has_labels() const { return !label_ids.empty(); }
};

/// Splits UTF-8 text into code points. Invalid bytes become one-byte symbols.
std::vector<std::string> split_utf8(std::string_view text);

/// Whitespace word splitting.
std::vector<std::string> split_words(std::string_view text);

class Tokenizer {
 public:
  Tokenizer() = default;

  std::size_t vocab_size() const { return tokens_.size(); }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;

  /// Applies the merge list in learned order. Symbols outside the vocabulary
  /// become kUnkId.
  std::vector<TokenId> encode_word(std::string_view word) const;

  /// Concatenates pieces, stripping the continuation prefix and inserting a
  /// space before every word-initial piece after the first.
  std::string decode(std::span<const TokenId> ids) const;

  Encoding encode_sentence(std::span<const std::string> words, std::size_t max_len,
                           LengthMode mode = LengthMode::truncate) const;
  Encoding encode_sentence(const TaggedSentence& sentence, const TagSet& tagset,
                           std::size_t max_len, LengthMode mode = LengthMode::truncate) const;

  /// Stable JSON with keys alphabet, merges, specials, vocab.
  std::string to_json() const;
  static Tokenizer from_json(std::string_view json);

  void save(const std::string& path) const;
  static Tokenizer load(const std::string& path);

  /// FNV-1a 64 of to_json(), as 16 hex digits.
  std::string fingerprint() const;

  bool operator==(const Tokenizer& other) const {
    return tokens_ == other.tokens_ && merges_ == other.merges_ && alphabet_ == other.alphabet_;
  }

 private:
  friend Tokenizer train_bpe(std::span<const std::string> texts, std::size_t vocab_size,
                             std::size_t min_frequency);

  TokenId add_token(const std::string& token);
  void rebuild_indexes();
  Encoding encode_impl(std::span<const std::string> words, const std::vector<std::int32_t>* tag_ids,
                       std::size_t max_len, LengthMode mode) const;

  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> ids_;
  std::vector<std::string> alphabet_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::map<std::pair<std::string, std::string>, std::size_t> merge_rank_;
};

/// Learns a BPE vocabulary over whitespace-split words. Each round merges the
/// most frequent adjacent pair; ties go to the pair whose prefix-stripped
/// surface strings sort first. Stops at vocab_size entries or when no pair
/// reaches min_frequency.
Tokenizer train_bpe(std::span<const std::string> texts, std::size_t vocab_size,
                    std::size_t min_frequency = 2);

/// Sentences of a corpus as space-joined texts, for tokenizer training.
std::vector<std::string> corpus_texts(const Corpus& corpus);

std::string fnv1a_hex(std::string_view bytes);

}  // namespace sktag
