#include "sktag/tokenizer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sktag/error.hpp"

namespace sktag {

namespace {

using Json = nlohmann::json;

constexpr std::string_view kSpecialNames[kNumSpecials] = {"PAD", "UNK", "CLS", "SEP", "MASK"};

std::string special_token(std::size_t i) { return "[" + std::string(kSpecialNames[i]) + "]"; }

bool is_continuation(std::string_view symbol) {
  return symbol.size() > kContinuationPrefix.size() && symbol.starts_with(kContinuationPrefix);
}

std::string_view surface(std::string_view symbol) {
  return is_continuation(symbol) ? symbol.substr(kContinuationPrefix.size()) : symbol;
}

std::string merged_symbol(const std::string& left, const std::string& right) {
  return left + std::string(surface(right));
}

std::vector<std::string> word_symbols(std::string_view word) {
  auto chars = split_utf8(word);
  for (std::size_t i = 1; i < chars.size(); ++i) chars[i].insert(0, kContinuationPrefix);
  return chars;
}

using SymbolPair = std::pair<std::string, std::string>;

// Lower sorts first among equally frequent pairs.
bool pair_precedes(const SymbolPair& a, const SymbolPair& b) {
  const auto sa = std::make_pair(surface(a.first), surface(a.second));
  const auto sb = std::make_pair(surface(b.first), surface(b.second));
  if (sa != sb) return sa < sb;
  return a < b;
}

void merge_in_place(std::vector<std::string>& symbols, const SymbolPair& pair) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == pair.first && symbols[i + 1] == pair.second) {
      out.push_back(merged_symbol(symbols[i], symbols[i + 1]));
      ++i;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
}

}  // namespace

std::size_t Encoding::active_length() const {
  return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), 1));
}

std::vector<std::string> split_utf8(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead < 0xF8) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = lead < 0xF0 ? 3 : 1;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    if (i + len > text.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(std::move(w));
  return words;
}

std::vector<std::string> corpus_texts(const Corpus& corpus) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& s : corpus.sentences) {
    std::string line;
    for (const auto& w : s.words) {
      if (!line.empty()) line += ' ';
      line += w;
    }
    texts.push_back(std::move(line));
  }
  return texts;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::string& Tokenizer::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Tokenizer::find(std::string_view token) const {
  const auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

TokenId Tokenizer::add_token(const std::string& token) {
  if (const auto existing = find(token)) return *existing;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

void Tokenizer::rebuild_indexes() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<TokenId>(i));
  merge_rank_.clear();
  for (std::size_t i = 0; i < merges_.size(); ++i) merge_rank_.emplace(merges_[i], i);
}

Tokenizer train_bpe(std::span<const std::string> texts, std::size_t vocab_size,
                    std::size_t min_frequency) {
  std::map<std::string, std::size_t> word_freq;
  for (const auto& text : texts) {
    for (auto& w : split_words(text)) ++word_freq[w];
  }
  if (word_freq.empty()) throw DataError("tokenizer training text is empty");

  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  std::set<std::string> alphabet;
  for (const auto& [w, freq] : word_freq) {
    auto symbols = word_symbols(w);
    alphabet.insert(symbols.begin(), symbols.end());
    words.emplace_back(std::move(symbols), freq);
  }
  if (vocab_size < alphabet.size() + kNumSpecials) {
    throw DataError("vocab size " + std::to_string(vocab_size) + " is below the " +
                    std::to_string(alphabet.size()) + " base symbols plus " +
                    std::to_string(kNumSpecials) + " specials");
  }

  Tokenizer tok;
  for (std::size_t i = 0; i < kNumSpecials; ++i) tok.add_token(special_token(i));
  tok.alphabet_.assign(alphabet.begin(), alphabet.end());
  for (const auto& s : tok.alphabet_) tok.add_token(s);

  while (tok.vocab_size() < vocab_size) {
    std::map<SymbolPair, std::size_t> counts;
    for (const auto& [symbols, freq] : words) {
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) counts[{symbols[i], symbols[i + 1]}] += freq;
    }
    const SymbolPair* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [pair, count] : counts) {
      if (count > best_count || (count == best_count && best && pair_precedes(pair, *best))) {
        best = &pair;
        best_count = count;
      }
    }
    if (best == nullptr || best_count < std::max<std::size_t>(min_frequency, 1)) break;

    const SymbolPair chosen = *best;
    tok.merges_.push_back(chosen);
    tok.add_token(merged_symbol(chosen.first, chosen.second));
    for (auto& entry : words) merge_in_place(entry.first, chosen);
  }
  tok.rebuild_indexes();
  return tok;
}

std::vector<TokenId> Tokenizer::encode_word(std::string_view word) const {
  if (const auto whole = find(word); whole && *whole >= static_cast<TokenId>(kNumSpecials)) {
    return {*whole};
  }
  auto symbols = word_symbols(word);
  while (symbols.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const auto it = merge_rank_.find({symbols[i], symbols[i + 1]});
      if (it != merge_rank_.end()) best_rank = std::min(best_rank, it->second);
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    merge_in_place(symbols, merges_[best_rank]);
  }
  std::vector<TokenId> ids;
  ids.reserve(symbols.size());
  for (const auto& s : symbols) {
    const auto id = find(s);
    ids.push_back(id && *id >= static_cast<TokenId>(kNumSpecials) ? *id : kUnkId);
  }
  return ids;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (const auto id : ids) {
    const auto& piece = token(id);
    if (is_continuation(piece)) {
      out += surface(piece);
    } else {
      if (!out.empty()) out += ' ';
      out += piece;
    }
  }
  return out;
}

Encoding Tokenizer::encode_impl(std::span<const std::string> words,
                                const std::vector<std::int32_t>* tag_ids, std::size_t max_len,
                                LengthMode mode) const {
  if (max_len < 3) throw DataError("max_len must be at least 3");
  std::vector<std::vector<TokenId>> pieces;
  pieces.reserve(words.size());
  std::size_t total = 2;
  for (const auto& w : words) {
    pieces.push_back(encode_word(w));
    total += pieces.back().size();
  }
  std::size_t kept = pieces.size();
  if (total > max_len) {
    if (mode == LengthMode::strict) {
      std::string preview;
      for (std::size_t i = 0; i < words.size() && i < 6; ++i) preview += (i ? " " : "") + words[i];
      if (words.size() > 6) preview += " ...";
      throw DataError("sentence '" + preview + "' encodes to " + std::to_string(total) +
                      " positions, exceeding max_len " + std::to_string(max_len));
    }
    while (kept > 0 && total > max_len) {
      --kept;
      total -= pieces[kept].size();
    }
  }

  Encoding enc;
  enc.ids.reserve(max_len);
  enc.ids.push_back(kClsId);
  if (tag_ids) enc.label_ids.push_back(kIgnoreLabel);
  for (std::size_t i = 0; i < kept; ++i) {
    enc.word_starts.push_back(enc.ids.size());
    for (std::size_t k = 0; k < pieces[i].size(); ++k) {
      enc.ids.push_back(pieces[i][k]);
      if (tag_ids) enc.label_ids.push_back(k == 0 ? (*tag_ids)[i] : kIgnoreLabel);
    }
  }
  enc.ids.push_back(kSepId);
  if (tag_ids) enc.label_ids.push_back(kIgnoreLabel);
  enc.attention_mask.assign(enc.ids.size(), 1);
  enc.ids.resize(max_len, kPadId);
  enc.attention_mask.resize(max_len, 0);
  if (tag_ids) enc.label_ids.resize(max_len, kIgnoreLabel);
  return enc;
}

Encoding Tokenizer::encode_sentence(std::span<const std::string> words, std::size_t max_len,
                                    LengthMode mode) const {
  return encode_impl(words, nullptr, max_len, mode);
}

Encoding Tokenizer::encode_sentence(const TaggedSentence& sentence, const TagSet& tagset,
                                    std::size_t max_len, LengthMode mode) const {
  validate(sentence);
  std::vector<std::int32_t> tag_ids;
  tag_ids.reserve(sentence.size());
  for (const auto& t : sentence.tags) tag_ids.push_back(tagset.id(t));
  return encode_impl(sentence.words, &tag_ids, max_len, mode);
}

std::string Tokenizer::to_json() const {
  Json j;
  j["alphabet"] = alphabet_;
  Json merges = Json::array();
  for (const auto& [a, b] : merges_) merges.push_back({a, b});
  j["merges"] = std::move(merges);
  Json specials = Json::object();
  for (std::size_t i = 0; i < kNumSpecials; ++i) specials[std::string(kSpecialNames[i])] = i;
  j["specials"] = std::move(specials);
  Json vocab = Json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i) vocab[tokens_[i]] = i;
  j["vocab"] = std::move(vocab);
  return j.dump(1) + "\n";
}

Tokenizer Tokenizer::from_json(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw DataError(std::string("tokenizer JSON: ") + e.what());
  }
  Tokenizer tok;
  try {
    const auto& specials = j.at("specials");
    for (std::size_t i = 0; i < kNumSpecials; ++i) {
      if (specials.at(std::string(kSpecialNames[i])).get<std::size_t>() != i) {
        throw DataError("tokenizer JSON: special " + std::string(kSpecialNames[i]) +
                        " must have id " + std::to_string(i));
      }
    }
    const auto& vocab = j.at("vocab");
    tok.tokens_.assign(vocab.size(), {});
    std::vector<bool> filled(vocab.size(), false);
    for (const auto& [token, id_json] : vocab.items()) {
      const auto id = id_json.get<std::size_t>();
      if (id >= vocab.size() || filled[id]) {
        throw DataError("tokenizer JSON: vocab ids are not dense");
      }
      tok.tokens_[id] = token;
      filled[id] = true;
    }
    for (std::size_t i = 0; i < kNumSpecials; ++i) {
      if (i >= tok.tokens_.size() || tok.tokens_[i] != special_token(i)) {
        throw DataError("tokenizer JSON: vocab is missing special " + special_token(i));
      }
    }
    tok.alphabet_ = j.at("alphabet").get<std::vector<std::string>>();
    for (const auto& m : j.at("merges")) {
      tok.merges_.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
    }
  } catch (const Json::exception& e) {
    throw DataError(std::string("tokenizer JSON: ") + e.what());
  }
  tok.rebuild_indexes();
  for (const auto& s : tok.alphabet_) {
    if (!tok.find(s)) throw DataError("tokenizer JSON: alphabet symbol '" + s + "' not in vocab");
  }
  for (const auto& [a, b] : tok.merges_) {
    if (!tok.find(merged_symbol(a, b))) {
      throw DataError("tokenizer JSON: merge result '" + merged_symbol(a, b) + "' not in vocab");
    }
  }
  return tok;
}

void Tokenizer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write tokenizer file '" + path + "'");
  out << to_json();
}

Tokenizer Tokenizer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tokenizer file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

std::string Tokenizer::fingerprint() const { return fnv1a_hex(to_json()); }

}  // namespace sktag
