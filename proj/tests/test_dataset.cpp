#include <random>

#include "catch_amalgamated.hpp"

#include "annonet/dataset.hpp"
#include "oracles.hpp"
#include "ten_fixture.hpp"

using namespace annonet;
using Catch::Matchers::WithinAbs;

using fixture::daily;
using fixture::rec;
using fixture::TenFixture;

TEST_CASE("annotation records round-trip through JSONL") {
  std::vector<AnnotationRecord> rs{rec("a", "EU", "US", RelationType::Opposition, "T1"),
                                   rec("a", "The Chair", "EU", RelationType::Agreement, std::nullopt,
                                       Derivation::ClosureBidirectional)};
  rs[1].interaction.head.out_of_space = true;
  const auto text = serialize_annotations(rs);
  const auto back = parse_annotations(text);
  REQUIRE(back.size() == 2);
  CHECK(back[1].interaction.head.out_of_space);
  CHECK(back[1].interaction.derived == Derivation::ClosureBidirectional);
  CHECK_FALSE(back[1].interaction.topic);
  CHECK(serialize_annotations(back) == text);
  CHECK_THROWS_AS(parse_annotations("{\"report_id\": 1}\n"), ValidationError);
}

TEST_CASE("dataset build joins dates, drops out-of-space, dedupes") {
  const TenFixture f;
  auto records = f.records;
  records.push_back(f.records[0]);  // duplicate
  records.push_back(rec("c", "The Chair", "EU", RelationType::Support));
  records.back().interaction.head.out_of_space = true;
  const auto ds = build_dataset(records, f.corpus);
  CHECK(ds.rows.size() == 10);
  CHECK(ds.run_ids == std::vector<std::string>{"run-x"});
  CHECK(format_date(ds.rows.front().date) == "2001-05-01");
  CHECK(build_dataset(records, f.corpus, {true, false, ""}).rows.size() == 11);
  CHECK(build_dataset(records, f.corpus, {false, true, ""}).rows.size() == 7);
  CHECK(stated_only(ds).rows.size() == 7);

  auto orphan = f.records;
  orphan.push_back(rec("zzz", "EU", "US", RelationType::Support));
  CHECK_THROWS_AS(build_dataset(orphan, f.corpus), ValidationError);
}

TEST_CASE("CSV export quotes fields and is stable") {
  const TenFixture f;
  auto records = f.records;
  records.push_back(rec("a", "Party, \"X\"", "EU", RelationType::Support));
  const auto ds = build_dataset(records, f.corpus);
  const auto csv = export_csv(ds);
  CHECK(csv.starts_with("date,meeting,party1,party2,relation,topic,derived\r\n"));
  CHECK(csv.find("2001-05-01,SB14,\"Party, \"\"X\"\"\",EU,Support,,stated\r\n") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
  CHECK(export_csv(ds) == csv);
}

TEST_CASE("JSONL export round-trips the dataset") {
  const TenFixture f;
  const auto ds = build_dataset(f.records, f.corpus, {false, false, "v2.r1"});
  const auto text = export_jsonl(ds);
  const auto back = import_jsonl(text);
  CHECK(back == ds);
  CHECK(export_jsonl(back) == text);
  CHECK_THROWS_AS(import_jsonl(""), ValidationError);
}

TEST_CASE("pearson matches the oracle and hits the forced extremes") {
  const std::vector<double> x{1, 2, 3, 4}, up{3, 5, 7, 9}, down{8, 6, 4, 2};
  CHECK_THAT(*pearson(x, up), WithinAbs(1.0, 1e-12));
  CHECK_THAT(*pearson(x, down), WithinAbs(-1.0, 1e-12));
  CHECK_FALSE(pearson(x, std::vector<double>{1, 1, 1, 1}));
  CHECK_FALSE(pearson(std::vector<double>{1}, std::vector<double>{2}));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-5, 5);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(6), b(6);
    for (auto& v : a) v = d(rng);
    for (auto& v : b) v = d(rng);
    REQUIRE_THAT(*pearson(a, b), WithinAbs(oracle::pearson(a, b), 1e-9));
  }
}

TEST_CASE("yearly distribution correlates reports with interactions") {
  // 1, 2 and 3 daily reports per year; interactions exactly 2x reports.
  std::vector<Report> corpus{daily("a", 2001, 1, 1), daily("b", 2002, 1, 1), daily("c", 2002, 1, 2),
                             daily("d", 2003, 1, 1), daily("e", 2003, 1, 2), daily("f", 2003, 1, 3)};
  std::vector<AnnotationRecord> records;
  for (const auto& r : corpus) {
    records.push_back(rec(r.report_id, "EU", "US", RelationType::Support));
    records.push_back(rec(r.report_id, "US", "EU", RelationType::Support));
  }
  const auto up = yearly_distribution(build_dataset(records, corpus), corpus);
  REQUIRE(up.years.size() == 3);
  CHECK(up.years[2].reports == 3);
  CHECK(up.years[2].interactions == 6);
  CHECK_THAT(*up.correlation, WithinAbs(1.0, 1e-12));

  // interactions falling as reports rise
  std::vector<AnnotationRecord> falling{rec("a", "EU", "US", RelationType::Support),
                                        rec("a", "US", "EU", RelationType::Support),
                                        rec("a", "EU", "Japan", RelationType::Support),
                                        rec("b", "EU", "US", RelationType::Support),
                                        rec("b", "US", "EU", RelationType::Support),
                                        rec("d", "EU", "US", RelationType::Support)};
  const auto down = yearly_distribution(build_dataset(falling, corpus), corpus);
  CHECK_THAT(*down.correlation, WithinAbs(-1.0, 1e-12));
}

TEST_CASE("tallies on the ten-interaction fixture match manual counts") {
  const TenFixture f;
  const auto ds = build_dataset(f.records, f.corpus);
  REQUIRE(ds.rows.size() == 10);

  const auto deg = activity_degrees(ds);
  std::size_t out_sum = 0, in_sum = 0;
  for (const auto& d : deg) {
    out_sum += d.out;
    in_sum += d.in;
  }
  CHECK(out_sum == 10);
  CHECK(in_sum == 10);
  // EU sends 4 (US, Japan, China, AOSIS), receives 3; Japan sends 3
  REQUIRE(deg.size() == 6);
  CHECK(deg[0].entity == "EU");
  CHECK(deg[0].out == 4);
  CHECK(deg[0].in == 3);
  CHECK(deg[1].entity == "Japan");
  CHECK(deg[1].out == 3);
  CHECK(deg[1].in == 1);
  const auto us = std::find_if(deg.begin(), deg.end(), [](const Degree& d) { return d.entity == "US"; });
  CHECK(us->out == 1);
  CHECK(us->in == 2);

  const auto freq = relation_frequencies(ds);
  CHECK(freq.at(2001).at(RelationType::Opposition) == 2);
  CHECK(freq.at(2001).at(RelationType::Agreement) == 2);
  CHECK(freq.at(2001).at(RelationType::OnBehalfOf) == 2);
  CHECK(freq.at(2001).at(RelationType::Support) == 1);
  CHECK(freq.at(2001).at(RelationType::DelayingProposal) == 0);
  CHECK(freq.at(2005).at(RelationType::Support) == 2);
  CHECK(freq.at(2005).at(RelationType::DelayingProposal) == 1);
  CHECK(freq.at(2005).size() == 5);

  const auto topics = topic_distribution(ds);
  CHECK(topics.counts.at("T1") == 4);
  CHECK(topics.counts.at("T2") == 2);
  CHECK(topics.counts.at("T3") == 2);
  CHECK(topics.no_topic == 2);
  CHECK(topics.total() == 10);
  CHECK(topics.by_year.at(2001).at("") == 2);
  CHECK(topics.by_year.at(2005).at("T2") == 1);
}
