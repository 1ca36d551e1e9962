#include <doctest.h>

#include "sktag/error.hpp"
#include "sktag/skeleton.hpp"
#include "sktag/train.hpp"

using namespace sktag;

namespace {

const TaggedSentence kMama{{"мама", "мыла", "раму"}, {"NOUN", "VERB", "NOUN"}};

struct Tagger {
  ModelParams params;
  Tokenizer tok;
  TagSet tags;
};

// Memorizes three short sentences.
const Tagger& tiny_tagger() {
  static const Tagger tagger = [] {
    Corpus c;
    c.sentences.push_back(kMama);
    c.sentences.push_back({{"папа", "читал", "газету", "."}, {"NOUN", "VERB", "NOUN", "PUNCT"}});
    c.sentences.push_back({{"мы", "быстро", "шли"}, {"PRON", "ADV", "VERB"}});
    Tagger t;
    t.tok = train_bpe(corpus_texts(c), 60, 1);
    t.tags = tagset_of(c);
    ModelConfig mc;
    mc.vocab_size = t.tok.vocab_size();
    mc.max_len = 16;
    mc.d_model = 16;
    mc.n_heads = 2;
    mc.n_layers = 1;
    mc.d_ff = 32;
    mc.n_tags = t.tags.size();
    mc.seed = 1;
    TrainConfig tc;
    tc.epochs = 150;
    tc.batch_size = 3;
    tc.learning_rate = 1e-2;
    tc.max_len = 16;
    tc.seed = 1;
    t.params = train_token_classifier(init_model(mc), c, c, t.tok, t.tags, tc).params;
    return t;
  }();
  return tagger;
}

}  // namespace

TEST_CASE("tags replace words by default") {
  CHECK(extract_skeleton(kMama, {}) == "NOUN VERB NOUN");
}

TEST_CASE("listed tags keep their surface form") {
  CHECK(extract_skeleton(kMama, {{"VERB"}, " "}) == "NOUN мыла NOUN");
  CHECK(extract_skeleton(kMama, {{}, "|"}) == "NOUN|VERB|NOUN");
}

TEST_CASE("single word") {
  CHECK(extract_skeleton({{"ура"}, {"INTJ"}}, {}) == "INTJ");
}

TEST_CASE("keeping every tag gives back the words") {
  CHECK(extract_skeleton(kMama, {{"NOUN", "VERB"}, " "}) == "мама мыла раму");
}

TEST_CASE("one output token per word") {
  const TaggedSentence s{{"a", "b", "c", "d", "e"}, {"X", "Y", "X", "Z", "Y"}};
  for (const auto& keep : std::vector<std::set<Tag>>{{}, {"X"}, {"Y", "Z"}}) {
    const auto out = extract_skeleton(s, {keep, " "});
    CHECK(split_words(out).size() == s.size());
  }
}

TEST_CASE("skeletons of memorized sentences match the gold projection") {
  const auto& t = tiny_tagger();
  std::vector<std::size_t> skipped;
  const auto out = skeletonize_text(t.params, t.tok, t.tags, "мама мыла раму\n   \nмы быстро шли\n",
                                    {{"VERB"}, " "}, 16,
                                    [&](std::size_t line) { skipped.push_back(line); });
  CHECK(out == std::vector<std::string>{"NOUN мыла NOUN", "PRON ADV шли"});
  CHECK(skipped == std::vector<std::size_t>{2});
}

TEST_CASE("skeletonize input errors") {
  const auto& t = tiny_tagger();
  CHECK_THROWS_AS(skeletonize_text(t.params, t.tok, t.tags, "", {}, 16), DataError);
  CHECK_THROWS_AS(skeletonize_text(t.params, t.tok, t.tags, "мама", {{"SYM"}, " "}, 16),
                  DataError);
  CHECK(skeletonize_text(t.params, t.tok, t.tags, "\n \n", {}, 16).empty());
}
