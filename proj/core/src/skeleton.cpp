#include "sktag/skeleton.hpp"

#include "sktag/error.hpp"

namespace sktag {

std::string extract_skeleton(const TaggedSentence& sentence, const SkeletonConfig& cfg) {
  std::string out;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (i) out += cfg.separator;
    out += cfg.keep_lexical.count(sentence.tags[i]) ? sentence.words[i] : sentence.tags[i];
  }
  return out;
}

std::vector<std::string> skeletonize_text(const ModelParams& params, const Tokenizer& tok,
                                          const TagSet& tagset, std::string_view raw_text,
                                          const SkeletonConfig& cfg, std::size_t max_len,
                                          const std::function<void(std::size_t)>& on_skip) {
  if (raw_text.empty()) throw DataError("no input text to skeletonize");
  for (const auto& t : cfg.keep_lexical) {
    if (!tagset.contains(t)) throw DataError("keep-lexical tag '" + t + "' is not in the tag set");
  }
  std::vector<std::string> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < raw_text.size()) {
    auto end = raw_text.find('\n', pos);
    if (end == std::string_view::npos) end = raw_text.size();
    const auto line = raw_text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto words = split_words(line);
    if (words.empty()) {
      if (on_skip) on_skip(line_no);
      continue;
    }
    out.push_back(extract_skeleton(predict_tags(params, tok, tagset, words, max_len), cfg));
  }
  return out;
}

}  // namespace sktag
