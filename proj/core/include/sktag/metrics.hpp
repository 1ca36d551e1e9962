#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sktag/corpus.hpp"

namespace sktag {

/// One-vs-rest counts, indexed by TagSet id.
struct ClassCounts {
  TagSet tagset;
  std::vector<std::size_t> tp, fp, fn;

  explicit ClassCounts(TagSet tags);
  std::size_t support(std::size_t cls) const { return tp[cls] + fn[cls]; }
  std::size_t total_words() const;
  std::size_t correct_words() const;
};

/// Word-by-word tally. Sentences must align in count and length; throws
/// DataError naming the first misaligned sentence index.
ClassCounts confusion_counts(std::span<const TaggedSentence> pred,
                             std::span<const TaggedSentence> gold, const TagSet& tagset);

/// 2TP / (2TP + FP + FN); 0 when the denominator is 0.
double f1_of_class(const ClassCounts& counts, const Tag& tag);
double f1_of_class(const ClassCounts& counts, std::size_t cls);

/// Support-weighted mean of per-class F1. Throws on zero total support.
double weighted_f1(const ClassCounts& counts);

/// Correct words over total gold words. Throws on an empty evaluation set.
double accuracy(const ClassCounts& counts);

struct ClassReport {
  Tag tag;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
  std::vector<ClassReport> classes;  // sorted by tag name
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t total_words = 0;

  std::string to_json() const;
  /// Fixed-width table for terminals.
  std::string to_table() const;
};

EvalReport make_report(const ClassCounts& counts);

/// Scores a constant prediction of the most frequent gold tag (ties: lowest id).
EvalReport majority_baseline(const Corpus& gold, const TagSet& tagset);

}  // namespace sktag
