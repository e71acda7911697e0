#include <random>

#include "catch_amalgamated.hpp"

#include "annonet/corpus.hpp"
#include "annonet/eval.hpp"
#include "oracles.hpp"

using namespace annonet;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int k) {
  std::uniform_int_distribution<int> d(0, k - 1);
  std::vector<int> out(n);
  for (auto& x : out) x = d(rng);
  return out;
}

Report report_of(std::vector<std::string> paras) {
  Report r;
  r.report_id = "q";
  for (std::size_t i = 0; i < paras.size(); ++i) r.paragraphs.push_back({i, paras[i], 0});
  return r;
}

}  // namespace

TEST_CASE("precision and recall match set arithmetic") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    std::uniform_int_distribution<std::size_t> len(0, 8);
    const auto p = random_labels(rng, len(rng), 10);
    const auto g = random_labels(rng, len(rng), 10);
    const auto got = triplet_prf(std::set<int>(p.begin(), p.end()), std::set<int>(g.begin(), g.end()));
    const auto [prec, rec] = oracle::precision_recall(p, g);
    REQUIRE_THAT(got.precision, WithinAbs(prec, 1e-12));
    REQUIRE_THAT(got.recall, WithinAbs(rec, 1e-12));
  }
}

TEST_CASE("precision and recall on the worked example") {
  const std::set<std::string> pred{"t1", "t2", "t3", "t4"}, gold{"t1", "t2", "t5"};
  const auto r = triplet_prf(pred, gold);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 2.0 / 3.0);
  CHECK(r.matched == 2);
  CHECK(triplet_prf(std::set<int>{}, std::set<int>{1}).precision == 1.0);
  CHECK(triplet_prf(std::set<int>{1}, std::set<int>{}).recall == 1.0);
}

TEST_CASE("accuracy and macro F1 match their definitions") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 12)(rng);
    const auto g = random_labels(rng, n, 4);
    const auto p = random_labels(rng, n, 4);
    const auto got = attribute_metrics(p, g);
    const auto [acc, f1] = oracle::accuracy_macro_f1(p, g);
    REQUIRE_THAT(got.accuracy, WithinAbs(acc, 1e-12));
    REQUIRE_THAT(got.macro_f1, WithinAbs(f1, 1e-12));
  }
}

TEST_CASE("macro F1 on the worked example") {
  const std::vector<std::string> gold{"A", "A", "B", "B"}, pred{"A", "B", "B", "B"};
  const auto m = attribute_metrics(pred, gold);
  CHECK(m.accuracy == 0.75);
  CHECK_THAT(m.per_label.at("A").f1, WithinAbs(2.0 / 3.0, 1e-12));
  CHECK_THAT(m.per_label.at("B").f1, WithinAbs(0.8, 1e-12));
  CHECK_THAT(m.macro_f1, WithinAbs(0.7333, 5e-5));
  CHECK_THROWS_AS(attribute_metrics(pred, std::vector<std::string>{"A"}), InvalidInput);
}

TEST_CASE("kappa matches the formula and its invariants") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    const int k = std::uniform_int_distribution<int>(1, 4)(rng);
    const auto a = random_labels(rng, n, k);
    const auto b = random_labels(rng, n, k);
    const double got = cohen_kappa(a, b);
    REQUIRE_THAT(got, WithinAbs(oracle::kappa(a, b), 1e-12));
    REQUIRE(got <= 1.0 + 1e-12);
    REQUIRE_THAT(cohen_kappa(b, a), WithinAbs(got, 1e-12));
    REQUIRE(cohen_kappa(a, a) == 1.0);
  }
}

TEST_CASE("kappa on the worked example and edge cases") {
  const std::vector<std::string> a{"y", "y", "n", "n"}, b{"y", "n", "n", "n"};
  CHECK(cohen_kappa(a, b) == 0.5);
  CHECK(cohen_kappa(std::vector<int>{1, 1}, std::vector<int>{1, 1}) == 1.0);
  CHECK_THROWS_AS(cohen_kappa(std::vector<int>{}, std::vector<int>{}), InvalidInput);
  CHECK_THROWS_AS(cohen_kappa(std::vector<int>{1}, std::vector<int>{1, 2}), InvalidInput);
}

TEST_CASE("quote matching uses strict word overlap") {
  const auto r = report_of({"Delegates met in the morning to discuss finance.",
                            "one two three four five six seven eight nine ten",
                            "The Chair closed the session."});
  const auto verbatim = quote_to_paragraph("Delegates met in the morning to discuss finance.", r);
  CHECK(verbatim.status == QuoteMatchStatus::Matched);
  CHECK(verbatim.index() == 0);

  // nine of ten quote tokens present: 0.9 is not above 0.9
  const auto nine = quote_to_paragraph("one two three four five six seven eight nine eleven", r);
  CHECK(nine.best_overlap == 0.9);
  CHECK(nine.status == QuoteMatchStatus::NoMatch);
  CHECK(nine.candidates.empty());

  CHECK(quote_to_paragraph("ONE two, three four five six seven eight nine ten!", r).index() == 1);
  CHECK_THROWS_AS(quote_to_paragraph("  ", r), InvalidInput);
}

TEST_CASE("word overlap counts repeated tokens once per occurrence") {
  CHECK(word_overlap("the the the", "the cat") == 1.0 / 3.0);
  CHECK(word_overlap("the cat", "the the cat") == 1.0);
}

TEST_CASE("duplicated paragraphs make a quote ambiguous") {
  const auto r = report_of({"The EU supported the proposal.", "Other text.", "The EU supported the proposal."});
  const auto m = quote_to_paragraph("the EU supported the proposal", r);
  CHECK(m.status == QuoteMatchStatus::Ambiguous);
  CHECK(m.candidates == std::vector<std::size_t>{0, 2});
}

TEST_CASE("evaluate_annotations scores paragraph-scoped triplets and topics") {
  auto ix = [](std::string h, std::string t, RelationType r, std::optional<std::string> topic, std::size_t para) {
    Interaction x;
    x.head = {std::move(h)};
    x.tail = {std::move(t)};
    x.relation = r;
    if (topic) x.topic = TopicId{*topic};
    x.paragraph = {"enb", para};
    return x;
  };
  const std::vector<Interaction> gold{ix("A", "B", RelationType::Support, "T1", 0),
                                      ix("C", "B", RelationType::Support, "T2", 0),
                                      ix("A", "B", RelationType::Support, "T1", 1)};
  const std::vector<Interaction> pred{ix("A", "B", RelationType::Support, "T1", 0),
                                      ix("C", "B", RelationType::Support, std::nullopt, 0),
                                      ix("A", "B", RelationType::Opposition, "T1", 1)};
  const auto m = evaluate_annotations(pred, gold);
  CHECK_THAT(m.relations.precision, WithinAbs(2.0 / 3.0, 1e-12));
  CHECK_THAT(m.relations.recall, WithinAbs(2.0 / 3.0, 1e-12));
  CHECK(m.attribute_items == 2);
  CHECK(m.attributes.accuracy == 0.5);
  CHECK(m.per_paragraph.at({"enb", 1}).recall == 0.0);
  CHECK(m.per_paragraph.at({"enb", 0}).precision == 1.0);
}
