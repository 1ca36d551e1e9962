#include <doctest.h>

#include <algorithm>
#include <set>

#include "sktag/corpus.hpp"
#include "sktag/error.hpp"

using namespace sktag;

namespace {

Corpus numbered_corpus(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    c.sentences.push_back({{"w" + std::to_string(i)}, {"X"}});
  }
  return c;
}

std::string sample_path() { return std::string(SKTAG_DATA_DIR) + "/sample.conll"; }

}  // namespace

TEST_CASE("parse reads words and tags") {
  const auto c = parse_conll("мама\tNOUN\nмыла\tVERB\n\n");
  REQUIRE(c.size() == 1);
  CHECK(c.sentences[0].words == std::vector<std::string>{"мама", "мыла"});
  CHECK(c.sentences[0].tags == std::vector<Tag>{"NOUN", "VERB"});
}

TEST_CASE("blank lines separate sentences") {
  const auto c = parse_conll("a\tX\n\nb\tY\n");
  REQUIRE(c.size() == 2);
  CHECK(c.sentences[0].size() == 1);
  CHECK(c.sentences[1].size() == 1);
  CHECK(c.sentences[1].tags[0] == "Y");
}

TEST_CASE("CRLF and repeated blank lines are tolerated") {
  const auto c = parse_conll("a\tX\r\n\r\n\r\nb\tY\r\nc\tZ\r\n");
  REQUIRE(c.size() == 2);
  CHECK(c.sentences[1].words == std::vector<std::string>{"b", "c"});
}

TEST_CASE("malformed lines report their line number") {
  try {
    parse_conll("word_without_tag\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  try {
    parse_conll("a\tX\nb\tY\tZ\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_conll("\tNOUN\n"), DataError);
  CHECK_THROWS_AS(parse_conll("word\t\n"), DataError);
  CHECK_THROWS_AS(parse_conll("word\tnoun\n"), DataError);
  CHECK_THROWS_AS(parse_conll("\n\n"), DataError);
  CHECK_THROWS_AS(parse_conll(""), DataError);
}

TEST_CASE("write is the inverse of parse") {
  Corpus c;
  c.sentences.push_back({{"мама", "мыла"}, {"NOUN", "VERB"}});
  CHECK(write_conll(c) == "мама\tNOUN\nмыла\tVERB\n\n");
  CHECK(parse_conll(write_conll(c)) == c);
  CHECK_THROWS_AS(write_conll(Corpus{}), DataError);
}

TEST_CASE("writing rejects words that cannot be represented") {
  Corpus c;
  c.sentences.push_back({{"a\tb"}, {"X"}});
  CHECK_THROWS_AS(write_conll(c), DataError);
  c.sentences[0] = {{"a", "b"}, {"X"}};
  CHECK_THROWS_AS(write_conll(c), DataError);
}

TEST_CASE("bundled sample round trips byte for byte") {
  const auto c = read_conll_file(sample_path());
  CHECK(c.size() == 100);
  const auto text = write_conll(c);
  const auto again = parse_conll(text);
  CHECK(again == c);
  CHECK(write_conll(again) == text);
}

TEST_CASE("missing files raise DataError") {
  CHECK_THROWS_AS(read_conll_file("/nonexistent/corpus.conll"), DataError);
}

TEST_CASE("split sizes, clamping and determinism") {
  const auto c = numbered_corpus(100);
  const auto s = split(c, 0.2, 7);
  CHECK(s.train.size() == 80);
  CHECK(s.val.size() == 20);
  CHECK(split(c, 0.2, 7).val == s.val);
  CHECK_FALSE(split(c, 0.2, 8).val == s.val);

  const auto tiny = split(numbered_corpus(2), 0.01, 1);
  CHECK(tiny.train.size() == 1);
  CHECK(tiny.val.size() == 1);

  CHECK_THROWS_AS(split(c, 0.0, 1), DataError);
  CHECK_THROWS_AS(split(c, 1.0, 1), DataError);
  CHECK_THROWS_AS(split(numbered_corpus(1), 0.5, 1), DataError);
}

TEST_CASE("split is a partition") {
  const auto c = numbered_corpus(37);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = split(c, 0.3, seed);
    std::multiset<std::string> seen;
    for (const auto& x : s.train.sentences) seen.insert(x.words[0]);
    for (const auto& x : s.val.sentences) seen.insert(x.words[0]);
    REQUIRE(seen.size() == 37);
    for (std::size_t i = 0; i < 37; ++i) CHECK(seen.count("w" + std::to_string(i)) == 1);
  }
}

TEST_CASE("tagset is sorted and dense") {
  Corpus c;
  c.sentences.push_back({{"a", "b", "c"}, {"VERB", "NOUN", "NOUN"}});
  const auto ts = tagset_of(c);
  CHECK(ts.tags() == std::vector<Tag>{"NOUN", "VERB"});
  CHECK(ts.id("NOUN") == 0);
  CHECK(ts.id("VERB") == 1);
  CHECK(ts.tag(1) == "VERB");
  CHECK_THROWS_AS(ts.id("ADJ"), DataError);
  CHECK_THROWS_AS(ts.tag(2), DataError);

  Corpus one;
  one.sentences.push_back({{"a", "b"}, {"X", "X"}});
  CHECK(tagset_of(one).size() == 1);
}

TEST_CASE("bundled sample uses the 17 universal tags") {
  const auto c = read_conll_file(sample_path());
  std::set<Tag> scanned;
  for (const auto& s : c.sentences) scanned.insert(s.tags.begin(), s.tags.end());
  const auto ts = tagset_of(c);
  CHECK(std::vector<Tag>(scanned.begin(), scanned.end()) == ts.tags());
  const std::vector<Tag> upos{"ADJ",  "ADP",  "ADV",   "AUX",   "CCONJ", "DET",
                              "INTJ", "NOUN", "NUM",   "PART",  "PRON",  "PROPN",
                              "PUNCT", "SCONJ", "SYM", "VERB",  "X"};
  CHECK(ts.tags() == upos);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CHECK(ts.id(ts.tag(static_cast<std::int32_t>(i))) == static_cast<std::int32_t>(i));
  }
}

TEST_CASE("tag names") {
  CHECK(is_valid_tag("NOUN"));
  CHECK(is_valid_tag("B_X"));
  CHECK_FALSE(is_valid_tag(""));
  CHECK_FALSE(is_valid_tag("Noun"));
  CHECK_FALSE(is_valid_tag("X1"));
}
