#include "sktag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sktag/error.hpp"
#include "sktag/random.hpp"

namespace sktag {

namespace {

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  });
}

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

bool is_valid_tag(std::string_view name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || c == '_';
  });
}

std::size_t Corpus::word_count() const {
  std::size_t total = 0;
  for (const auto& s : sentences) total += s.size();
  return total;
}

void validate(const TaggedSentence& sentence) {
  if (sentence.words.empty()) throw DataError("sentence has no words");
  if (sentence.words.size() != sentence.tags.size()) {
    throw DataError("sentence has " + std::to_string(sentence.words.size()) + " words but " +
                    std::to_string(sentence.tags.size()) + " tags");
  }
  for (const auto& w : sentence.words) {
    if (w.empty() || has_whitespace(w)) throw DataError("invalid word '" + w + "'");
  }
  for (const auto& t : sentence.tags) {
    if (!is_valid_tag(t)) throw DataError("invalid tag '" + t + "'");
  }
}

TagSet::TagSet(std::vector<Tag> tags) : tags_(std::move(tags)) {
  std::sort(tags_.begin(), tags_.end());
  tags_.erase(std::unique(tags_.begin(), tags_.end()), tags_.end());
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (!is_valid_tag(tags_[i])) throw DataError("invalid tag '" + tags_[i] + "'");
    index_.emplace(tags_[i], static_cast<std::int32_t>(i));
  }
}

const Tag& TagSet::tag(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tags_.size()) {
    throw DataError("tag id " + std::to_string(id) + " out of range");
  }
  return tags_[static_cast<std::size_t>(id)];
}

std::int32_t TagSet::id(const Tag& tag) const {
  const auto it = index_.find(tag);
  if (it == index_.end()) throw DataError("unknown tag '" + tag + "'");
  return it->second;
}

Corpus parse_conll(std::string_view text, std::string source_name) {
  Corpus corpus;
  corpus.source_name = std::move(source_name);
  TaggedSentence current;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  auto flush = [&] {
    if (!current.words.empty()) {
      corpus.sentences.push_back(std::move(current));
      current = {};
    }
  };

  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      throw DataError(line_error(line_no, "expected exactly two tab-separated fields"));
    }
    const auto word = line.substr(0, tab);
    const auto tag = line.substr(tab + 1);
    if (word.empty()) throw DataError(line_error(line_no, "empty word field"));
    if (tag.empty()) throw DataError(line_error(line_no, "empty tag field"));
    if (has_whitespace(word)) throw DataError(line_error(line_no, "word contains whitespace"));
    if (!is_valid_tag(tag)) {
      throw DataError(line_error(line_no, "invalid tag '" + std::string(tag) + "'"));
    }
    current.words.emplace_back(word);
    current.tags.emplace_back(tag);
  }
  flush();

  if (corpus.sentences.empty()) throw DataError("corpus contains no sentences");
  return corpus;
}

std::string write_conll(const Corpus& corpus) {
  if (corpus.sentences.empty()) throw DataError("cannot write an empty corpus");
  std::string out;
  for (const auto& s : corpus.sentences) {
    validate(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += s.words[i];
      out += '\t';
      out += s.tags[i];
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

Corpus read_conll_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_conll(buffer.str(), path);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_conll_file(const Corpus& corpus, const std::string& path) {
  const auto text = write_conll(corpus);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file '" + path + "'");
  out << text;
}

CorpusSplit split(const Corpus& corpus, double val_ratio, std::uint64_t seed) {
  if (!(val_ratio > 0.0 && val_ratio < 1.0)) {
    throw DataError("validation ratio must lie in (0, 1)");
  }
  const std::size_t n = corpus.size();
  if (n < 2) throw DataError("corpus needs at least 2 sentences to split");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));

  auto n_val = static_cast<std::size_t>(std::llround(val_ratio * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

  CorpusSplit result;
  result.val.source_name = corpus.source_name + "#val";
  result.train.source_name = corpus.source_name + "#train";
  for (std::size_t i = 0; i < n; ++i) {
    auto& target = i < n_val ? result.val : result.train;
    target.sentences.push_back(corpus.sentences[order[i]]);
  }
  return result;
}

TagSet tagset_of(const Corpus& corpus) {
  std::vector<Tag> all;
  for (const auto& s : corpus.sentences) all.insert(all.end(), s.tags.begin(), s.tags.end());
  return TagSet(std::move(all));
}

}  // namespace sktag
