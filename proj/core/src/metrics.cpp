#include "sktag/metrics.hpp"

#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "sktag/error.hpp"

namespace sktag {

ClassCounts::ClassCounts(TagSet tags)
    : tagset(std::move(tags)), tp(tagset.size()), fp(tagset.size()), fn(tagset.size()) {}

std::size_t ClassCounts::total_words() const {
  std::size_t total = 0;
  for (std::size_t c = 0; c < tp.size(); ++c) total += support(c);
  return total;
}

std::size_t ClassCounts::correct_words() const {
  return std::accumulate(tp.begin(), tp.end(), std::size_t{0});
}

ClassCounts confusion_counts(std::span<const TaggedSentence> pred,
                             std::span<const TaggedSentence> gold, const TagSet& tagset) {
  if (pred.size() != gold.size()) {
    throw DataError("prediction has " + std::to_string(pred.size()) + " sentences, gold has " +
                    std::to_string(gold.size()));
  }
  ClassCounts counts(tagset);
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (pred[s].tags.size() != gold[s].tags.size()) {
      throw DataError("sentence " + std::to_string(s) + ": prediction has " +
                      std::to_string(pred[s].tags.size()) + " tags, gold has " +
                      std::to_string(gold[s].tags.size()));
    }
    for (std::size_t w = 0; w < gold[s].tags.size(); ++w) {
      const auto p = static_cast<std::size_t>(tagset.id(pred[s].tags[w]));
      const auto g = static_cast<std::size_t>(tagset.id(gold[s].tags[w]));
      if (p == g) {
        ++counts.tp[p];
      } else {
        ++counts.fp[p];
        ++counts.fn[g];
      }
    }
  }
  return counts;
}

double f1_of_class(const ClassCounts& counts, std::size_t cls) {
  const auto denom = 2 * counts.tp[cls] + counts.fp[cls] + counts.fn[cls];
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(counts.tp[cls]) / static_cast<double>(denom);
}

double f1_of_class(const ClassCounts& counts, const Tag& tag) {
  return f1_of_class(counts, static_cast<std::size_t>(counts.tagset.id(tag)));
}

double weighted_f1(const ClassCounts& counts) {
  const auto total = counts.total_words();
  if (total == 0) throw DataError("weighted F1 needs at least one gold word");
  double sum = 0.0;
  for (std::size_t c = 0; c < counts.tp.size(); ++c) {
    if (counts.support(c) == 0) continue;
    sum += static_cast<double>(counts.support(c)) * f1_of_class(counts, c);
  }
  return sum / static_cast<double>(total);
}

double accuracy(const ClassCounts& counts) {
  const auto total = counts.total_words();
  if (total == 0) throw DataError("accuracy needs at least one gold word");
  return static_cast<double>(counts.correct_words()) / static_cast<double>(total);
}

EvalReport make_report(const ClassCounts& counts) {
  EvalReport report;
  report.total_words = counts.total_words();
  report.weighted_f1 = weighted_f1(counts);
  report.accuracy = accuracy(counts);
  for (std::size_t c = 0; c < counts.tp.size(); ++c) {
    ClassReport row;
    row.tag = counts.tagset.tag(static_cast<std::int32_t>(c));
    row.tp = counts.tp[c];
    row.fp = counts.fp[c];
    row.fn = counts.fn[c];
    row.support = counts.support(c);
    const auto predicted = row.tp + row.fp;
    row.precision = predicted ? static_cast<double>(row.tp) / static_cast<double>(predicted) : 0.0;
    row.recall = row.support ? static_cast<double>(row.tp) / static_cast<double>(row.support) : 0.0;
    row.f1 = f1_of_class(counts, c);
    report.classes.push_back(std::move(row));
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["weighted_f1"] = weighted_f1;
  j["accuracy"] = accuracy;
  j["total_words"] = total_words;
  auto rows = nlohmann::json::array();
  for (const auto& c : classes) {
    rows.push_back({{"tag", c.tag},
                    {"precision", c.precision},
                    {"recall", c.recall},
                    {"f1", c.f1},
                    {"support", c.support},
                    {"tp", c.tp},
                    {"fp", c.fp},
                    {"fn", c.fn}});
  }
  j["classes"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %9s %9s %9s %8s\n", "tag", "precision", "recall", "f1",
                "support");
  out += line;
  for (const auto& c : classes) {
    std::snprintf(line, sizeof line, "%-8s %9.4f %9.4f %9.4f %8zu\n", c.tag.c_str(), c.precision,
                  c.recall, c.f1, c.support);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-8s %9s %9s %9.4f %8zu\n", "weighted", "", "", weighted_f1,
                total_words);
  out += line;
  std::snprintf(line, sizeof line, "%-8s %9s %9s %9.4f %8zu\n", "accuracy", "", "", accuracy,
                total_words);
  out += line;
  return out;
}

EvalReport majority_baseline(const Corpus& gold, const TagSet& tagset) {
  std::vector<std::size_t> freq(tagset.size());
  for (const auto& s : gold.sentences) {
    for (const auto& t : s.tags) ++freq[static_cast<std::size_t>(tagset.id(t))];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < freq.size(); ++c) {
    if (freq[c] > freq[best]) best = c;
  }
  std::vector<TaggedSentence> pred;
  pred.reserve(gold.size());
  for (const auto& s : gold.sentences) {
    pred.push_back({s.words, std::vector<Tag>(s.size(), tagset.tag(static_cast<std::int32_t>(best)))});
  }
  return make_report(confusion_counts(pred, gold.sentences, tagset));
}

}  // namespace sktag
