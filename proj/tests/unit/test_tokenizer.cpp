#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "sktag/corpus.hpp"
#include "sktag/error.hpp"
#include "sktag/random.hpp"
#include "sktag/tokenizer.hpp"

using namespace sktag;

namespace {

const std::vector<std::string> kToyTexts{"low low low", "lower"};

Corpus sample() { return read_conll_file(std::string(SKTAG_DATA_DIR) + "/sample.conll"); }

Tokenizer sample_tokenizer() {
  const auto texts = corpus_texts(sample());
  return train_bpe(texts, 400);
}

std::vector<std::string> pieces(const Tokenizer& tok, const std::vector<TokenId>& ids) {
  std::vector<std::string> out;
  for (auto id : ids) out.push_back(tok.token(id));
  return out;
}

void check_layout(const Encoding& e, std::size_t max_len, std::size_t n_words) {
  REQUIRE(e.length() == max_len);
  REQUIRE(e.attention_mask.size() == max_len);
  CHECK(e.ids[0] == kClsId);
  const auto active = e.active_length();
  REQUIRE(active >= 2);
  CHECK(e.ids[active - 1] == kSepId);
  for (std::size_t i = 0; i < max_len; ++i) {
    CHECK(e.attention_mask[i] == (i < active ? 1 : 0));
    if (i >= active) CHECK(e.ids[i] == kPadId);
    if (i > 0 && i < active - 1) {
      CHECK(e.ids[i] != kClsId);
      CHECK(e.ids[i] != kSepId);
      CHECK(e.ids[i] != kPadId);
    }
  }
  CHECK(e.word_starts.size() == n_words);
  if (e.has_labels()) {
    std::size_t supervised = 0;
    for (std::size_t i = 0; i < max_len; ++i) {
      const bool start =
          std::find(e.word_starts.begin(), e.word_starts.end(), i) != e.word_starts.end();
      CHECK((e.label_ids[i] != kIgnoreLabel) == start);
      supervised += e.label_ids[i] != kIgnoreLabel;
    }
    CHECK(supervised == n_words);
  }
}

}  // namespace

TEST_CASE("most frequent pair merges first") {
  const auto tok = train_bpe(kToyTexts, 100);
  REQUIRE(tok.merges().size() >= 2);
  CHECK(tok.merges()[0] == std::pair<std::string, std::string>{"l", "##o"});
  CHECK(tok.merges()[1] == std::pair<std::string, std::string>{"lo", "##w"});
}

TEST_CASE("merges apply in learned order") {
  const auto tok = train_bpe(kToyTexts, 100);
  REQUIRE(tok.merges().size() == 2);
  CHECK(pieces(tok, tok.encode_word("lower")) == std::vector<std::string>{"low", "##e", "##r"});
  CHECK(pieces(tok, tok.encode_word("low")) == std::vector<std::string>{"low"});
}

TEST_CASE("whole-word vocabulary entries encode to one id") {
  const auto tok = sample_tokenizer();
  std::size_t whole = 0;
  for (TokenId id = static_cast<TokenId>(kNumSpecials); id < static_cast<TokenId>(tok.vocab_size()); ++id) {
    const auto& t = tok.token(id);
    if (t.starts_with(kContinuationPrefix)) continue;
    const auto ids = tok.encode_word(t);
    CHECK(ids == std::vector<TokenId>{id});
    ++whole;
  }
  CHECK(whole > 0);
}

TEST_CASE("unknown characters become UNK") {
  const auto tok = train_bpe(kToyTexts, 100);
  CHECK(tok.encode_word("z") == std::vector<TokenId>{kUnkId});
  CHECK(tok.encode_word("жlow")[0] == kUnkId);
}

TEST_CASE("minimal vocabulary learns no merges") {
  const auto alphabet_only = train_bpe(kToyTexts, 5 + 5);
  CHECK(alphabet_only.merges().empty());
  CHECK(alphabet_only.vocab_size() == 10);
  CHECK(pieces(alphabet_only, alphabet_only.encode_word("low")) ==
        std::vector<std::string>{"l", "##o", "##w"});
  CHECK_THROWS_AS(train_bpe(kToyTexts, 9), DataError);
}

TEST_CASE("training rejects empty input") {
  CHECK_THROWS_AS(train_bpe(std::vector<std::string>{}, 100), DataError);
  CHECK_THROWS_AS(train_bpe(std::vector<std::string>{"   ", ""}, 100), DataError);
}

TEST_CASE("training is deterministic and respects the budget") {
  const auto texts = corpus_texts(sample());
  const auto a = train_bpe(texts, 300);
  const auto b = train_bpe(texts, 300);
  CHECK(a.merges() == b.merges());
  CHECK(a.to_json() == b.to_json());
  CHECK(a.vocab_size() <= 300);
}

TEST_CASE("specials occupy the first ids") {
  const auto tok = train_bpe(kToyTexts, 100);
  CHECK(tok.token(kPadId) == "[PAD]");
  CHECK(tok.token(kUnkId) == "[UNK]");
  CHECK(tok.token(kClsId) == "[CLS]");
  CHECK(tok.token(kSepId) == "[SEP]");
  CHECK(tok.token(kMaskId) == "[MASK]");
  for (const auto& [l, r] : tok.merges()) {
    CHECK(tok.find(l + r.substr(r.starts_with(kContinuationPrefix) ? 2 : 0)).has_value());
  }
}

TEST_CASE("decode inverts encode_word over the alphabet") {
  const auto tok = sample_tokenizer();
  std::vector<std::string> initial, inner;
  for (const auto& a : tok.alphabet()) {
    (a.starts_with(kContinuationPrefix) ? inner : initial).push_back(a);
  }
  REQUIRE(!initial.empty());
  REQUIRE(!inner.empty());
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    std::string w = initial[rng.below(initial.size())];
    const auto len = rng.below(8);
    for (std::size_t k = 0; k < len; ++k) w += inner[rng.below(inner.size())].substr(2);
    const auto ids = tok.encode_word(w);
    CHECK(std::find(ids.begin(), ids.end(), kUnkId) == ids.end());
    CHECK(tok.decode(ids) == w);
  }
  for (const auto& s : sample().sentences) {
    for (const auto& w : s.words) CHECK(tok.decode(tok.encode_word(w)) == w);
  }
}

TEST_CASE("labels sit on the first subword of each word") {
  const auto tok = train_bpe(kToyTexts, 10);  // characters only
  const TagSet tags({"NOUN", "VERB"});
  const TaggedSentence s{{"low", "lo"}, {"NOUN", "VERB"}};
  const auto e = tok.encode_sentence(s, tags, 16);
  CHECK(e.word_starts == std::vector<std::size_t>{1, 4});
  CHECK(std::vector<std::int32_t>(e.label_ids.begin(), e.label_ids.begin() + 7) ==
        std::vector<std::int32_t>{kIgnoreLabel, 0, kIgnoreLabel, kIgnoreLabel, 1, kIgnoreLabel,
                                  kIgnoreLabel});
}

TEST_CASE("two-word layout with padding") {
  const auto tok = train_bpe(kToyTexts, 100);
  const std::vector<std::string> words{"low", "lower"};
  const auto e = tok.encode_sentence(words, 16);
  CHECK(e.length() == 16);
  CHECK(e.active_length() == 1 + 1 + 3 + 1);
  check_layout(e, 16, 2);
  CHECK_FALSE(e.has_labels());
}

TEST_CASE("layout invariants on random sentences") {
  const auto c = sample();
  const auto tok = sample_tokenizer();
  const auto tags = tagset_of(c);
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    TaggedSentence s;
    const auto n = 1 + rng.below(14);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& src = c.sentences[rng.below(c.size())];
      const auto j = rng.below(src.size());
      s.words.push_back(src.words[j]);
      s.tags.push_back(src.tags[j]);
    }
    const std::size_t max_len = 8 + rng.below(24);
    const auto e = tok.encode_sentence(s, tags, max_len);
    check_layout(e, max_len, e.word_starts.size());
    CHECK(e.word_starts.size() <= n);
    CHECK(e.word_starts.size() >= 1);
  }
}

TEST_CASE("truncation drops whole words from the end") {
  const auto tok = train_bpe(kToyTexts, 10);
  const TagSet tags({"X", "Y"});
  const TaggedSentence s{{"low", "lower", "lo"}, {"X", "Y", "X"}};
  // CLS + 3 + 5 + SEP = 10 fits; the final word would need 2 more.
  const auto e = tok.encode_sentence(s, tags, 10);
  CHECK(e.word_starts.size() == 2);
  CHECK(e.active_length() == 10);
  check_layout(e, 10, 2);
  const auto shorter = tok.encode_sentence(s, tags, 9);
  CHECK(shorter.word_starts.size() == 1);
  CHECK(shorter.active_length() == 5);
}

TEST_CASE("strict mode names the offending sentence") {
  const auto tok = train_bpe(kToyTexts, 10);
  const std::vector<std::string> words{"lower", "lower", "lower"};
  try {
    tok.encode_sentence(words, 8, LengthMode::strict);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("lower") != std::string::npos);
  }
  CHECK_NOTHROW(tok.encode_sentence(words, 17, LengthMode::strict));
}

TEST_CASE("truncation may leave no words") {
  const auto tok = train_bpe(kToyTexts, 10);
  const std::vector<std::string> words{"lower"};
  const auto e = tok.encode_sentence(words, 4);
  CHECK(e.word_starts.empty());
  CHECK(e.active_length() == 2);
  CHECK_THROWS_AS(tok.encode_sentence(words, 4, LengthMode::strict), DataError);
}

TEST_CASE("JSON and file round trips preserve encodings") {
  const auto tok = sample_tokenizer();
  const auto copy = Tokenizer::from_json(tok.to_json());
  CHECK(copy == tok);
  CHECK(copy.fingerprint() == tok.fingerprint());

  const auto path = (std::filesystem::temp_directory_path() / "sktag_tok_test.json").string();
  tok.save(path);
  const auto loaded = Tokenizer::load(path);
  std::remove(path.c_str());
  for (const auto& s : sample().sentences) {
    const auto a = tok.encode_sentence(s.words, 64);
    const auto b = loaded.encode_sentence(s.words, 64);
    CHECK(a.ids == b.ids);
    CHECK(a.word_starts == b.word_starts);
  }
}

TEST_CASE("malformed tokenizer JSON is rejected") {
  CHECK_THROWS_AS(Tokenizer::from_json("not json"), DataError);
  CHECK_THROWS_AS(Tokenizer::from_json("{}"), DataError);
  auto text = train_bpe(kToyTexts, 100).to_json();
  const auto at = text.find("\"[PAD]\": 0");
  REQUIRE(at != std::string::npos);
  text.replace(at, 10, "\"[PAD]\": 7");
  CHECK_THROWS_AS(Tokenizer::from_json(text), DataError);
  CHECK_THROWS_AS(Tokenizer::load("/nonexistent/tok.json"), DataError);
}

TEST_CASE("utf8 and word splitting") {
  CHECK(split_utf8("мыла") == std::vector<std::string>{"м", "ы", "л", "а"});
  CHECK(split_words("  мама\tмыла \n раму ") == std::vector<std::string>{"мама", "мыла", "раму"});
  CHECK(split_words("   ").empty());
}
