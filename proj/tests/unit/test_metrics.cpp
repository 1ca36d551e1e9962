#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "oracles.hpp"
#include "sktag/error.hpp"
#include "sktag/metrics.hpp"
#include "sktag/random.hpp"

using namespace sktag;

namespace {

std::vector<TaggedSentence> one(std::vector<Tag> tags) {
  TaggedSentence s;
  for (std::size_t i = 0; i < tags.size(); ++i) s.words.push_back("w" + std::to_string(i));
  s.tags = std::move(tags);
  return {s};
}

// Builds a single-sentence case with exactly the requested counts for class A.
ClassCounts counts_for(std::size_t tp, std::size_t fp, std::size_t fn) {
  std::vector<Tag> pred, gold;
  for (std::size_t i = 0; i < tp; ++i) pred.push_back("A"), gold.push_back("A");
  for (std::size_t i = 0; i < fp; ++i) pred.push_back("A"), gold.push_back("B");
  for (std::size_t i = 0; i < fn; ++i) pred.push_back("B"), gold.push_back("A");
  if (gold.empty()) pred.push_back("B"), gold.push_back("B");
  return confusion_counts(one(pred), one(gold), TagSet({"A", "B"}));
}

}  // namespace

TEST_CASE("one-vs-rest counting") {
  const TagSet ts({"X", "Y"});
  const auto c = confusion_counts(one({"X", "Y", "Y"}), one({"X", "X", "Y"}), ts);
  CHECK(c.tp[0] == 1);
  CHECK(c.fn[0] == 1);
  CHECK(c.fp[0] == 0);
  CHECK(c.tp[1] == 1);
  CHECK(c.fp[1] == 1);
  CHECK(c.fn[1] == 0);
  CHECK(accuracy(c) == doctest::Approx(2.0 / 3).epsilon(1e-15));
}

TEST_CASE("perfect predictions have no errors") {
  const TagSet ts({"X", "Y", "Z"});
  const auto gold = one({"X", "Z", "Y", "X"});
  const auto c = confusion_counts(gold, gold, ts);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(c.fp[k] == 0);
    CHECK(c.fn[k] == 0);
  }
  CHECK(weighted_f1(c) == 1.0);
  CHECK(accuracy(c) == 1.0);
}

TEST_CASE("misaligned predictions name the sentence") {
  const TagSet ts({"X"});
  auto pred = one({"X", "X"});
  auto gold = one({"X", "X", "X"});
  try {
    confusion_counts(pred, gold, ts);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("sentence 0") != std::string::npos);
  }
  gold = one({"X", "X"});
  gold.push_back(gold[0]);
  CHECK_THROWS_AS(confusion_counts(pred, gold, ts), DataError);
  CHECK_THROWS_AS(confusion_counts(one({"Q"}), one({"X"}), ts), DataError);
}

TEST_CASE("per-class F1 spot values") {
  CHECK(f1_of_class(counts_for(3, 1, 1), "A") == 0.75);
  CHECK(f1_of_class(counts_for(5, 0, 0), "A") == 1.0);
  CHECK(f1_of_class(counts_for(0, 2, 0), "A") == 0.0);
  CHECK(f1_of_class(counts_for(0, 0, 0), "A") == 0.0);
  CHECK_THROWS_AS(f1_of_class(counts_for(1, 0, 0), "C"), DataError);
}

TEST_CASE("weighted F1 spot values") {
  // A: three correct; B: one gold word predicted as A.
  const TagSet ts({"A", "B", "C"});
  const auto c = confusion_counts(one({"A", "A", "A", "C"}), one({"A", "A", "A", "B"}), ts);
  CHECK(f1_of_class(c, "B") == 0.0);
  CHECK(weighted_f1(c) == doctest::Approx(0.75).epsilon(1e-15));

  const auto single = confusion_counts(one({"A", "B"}), one({"A", "A"}), TagSet({"A", "B"}));
  CHECK(weighted_f1(single) == f1_of_class(single, "A"));
  CHECK(accuracy(single) == 0.5);
}

TEST_CASE("accuracy spot values") {
  const TagSet ts({"X", "Y"});
  CHECK(accuracy(confusion_counts(one({"X", "X", "Y", "Y"}), one({"X", "X", "Y", "X"}), ts)) ==
        0.75);
}

TEST_CASE("empty evaluation sets are errors") {
  const ClassCounts c(TagSet({"X"}));
  CHECK_THROWS_AS(weighted_f1(c), DataError);
  CHECK_THROWS_AS(accuracy(c), DataError);
}

TEST_CASE("random cases agree with the brute-force oracle") {
  Rng rng(2024);
  const std::vector<Tag> pool{"A", "B", "C", "D", "E"};
  for (int trial = 0; trial < 500; ++trial) {
    const auto n_tags = 1 + rng.below(5);
    const std::vector<Tag> classes(pool.begin(), pool.begin() + static_cast<long>(n_tags));
    const auto n = 1 + rng.below(200);
    std::vector<Tag> pred, gold;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(classes[rng.below(n_tags)]);
      pred.push_back(rng.uniform() < 0.5 ? gold.back() : classes[rng.below(n_tags)]);
    }
    const auto c = confusion_counts(one(pred), one(gold), TagSet(classes));
    const auto expected = oracle::brute_force_metrics(pred, gold, classes);
    for (const auto& a : classes) CHECK(std::abs(f1_of_class(c, a) - expected.f1.at(a)) <= 1e-12);
    CHECK(std::abs(weighted_f1(c) - expected.weighted_f1) <= 1e-12);
    CHECK(std::abs(accuracy(c) - expected.accuracy) <= 1e-12);

    std::size_t fp = 0, fn = 0, tp = 0, support = 0;
    for (std::size_t k = 0; k < n_tags; ++k) {
      fp += c.fp[k];
      fn += c.fn[k];
      tp += c.tp[k];
      support += c.support(k);
    }
    CHECK(fp == fn);
    CHECK(tp == c.correct_words());
    CHECK(support == n);
    const double w = weighted_f1(c);
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
    CHECK((w == 1.0) == (pred == gold));
    CHECK((accuracy(c) == 0.0) == (tp == 0));
  }
}

TEST_CASE("report fields and serialization") {
  const TagSet ts({"X", "Y"});
  const auto c = confusion_counts(one({"X", "Y", "Y"}), one({"X", "X", "Y"}), ts);
  const auto r = make_report(c);
  REQUIRE(r.classes.size() == 2);
  CHECK(r.classes[0].tag == "X");
  CHECK(r.classes[0].precision == 1.0);
  CHECK(r.classes[0].recall == 0.5);
  CHECK(r.classes[1].precision == 0.5);
  CHECK(r.classes[0].support == 2);
  CHECK(r.total_words == 3);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["weighted_f1"].get<double>() == r.weighted_f1);
  CHECK(j["accuracy"].get<double>() == r.accuracy);
  CHECK(r.to_table().find("X") != std::string::npos);
  CHECK(make_report(c).to_json() == r.to_json());
}

TEST_CASE("majority baseline predicts the most frequent tag") {
  Corpus gold;
  gold.sentences.push_back({{"a", "b", "c"}, {"NOUN", "VERB", "NOUN"}});
  gold.sentences.push_back({{"d", "e"}, {"ADJ", "NOUN"}});
  const auto ts = tagset_of(gold);
  const auto r = majority_baseline(gold, ts);
  CHECK(r.accuracy == 0.6);
  CHECK(r.weighted_f1 == doctest::Approx(0.6 * 0.75).epsilon(1e-15));
  CHECK_THROWS_AS(majority_baseline(Corpus{}, ts), DataError);
}
