#pragma once

// Ten interactions over three reports in two years, with hand-counted tallies.

#include "annonet/dataset.hpp"

namespace fixture {

inline annonet::Report daily(std::string id, int y, unsigned m, unsigned d, std::string meeting = "COP") {
  annonet::Report r;
  r.report_id = std::move(id);
  r.date = std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d};
  r.meeting = std::move(meeting);
  r.framework = "UNFCCC";
  r.paragraphs.push_back({0, "text", 1});
  return r;
}

inline annonet::AnnotationRecord rec(std::string report, std::string h, std::string t, annonet::RelationType r,
                                     std::optional<std::string> topic = std::nullopt,
                                     annonet::Derivation d = annonet::Derivation::Stated, std::size_t para = 0) {
  annonet::AnnotationRecord a;
  a.run_id = "run-x";
  a.model_id = "m";
  a.interaction.paragraph = {std::move(report), para};
  a.interaction.head = {std::move(h)};
  a.interaction.tail = {std::move(t)};
  a.interaction.relation = r;
  if (topic) a.interaction.topic = annonet::TopicId{*topic};
  a.interaction.derived = d;
  return a;
}

struct TenFixture {
  using R = annonet::RelationType;
  using D = annonet::Derivation;
  std::vector<annonet::Report> corpus{daily("a", 2001, 5, 1, "SB14"), daily("b", 2001, 11, 2, "COP7"),
                                      daily("c", 2005, 3, 4, "COP11")};
  std::vector<annonet::AnnotationRecord> records{
      rec("a", "EU", "US", R::Opposition, "T1"),
      rec("a", "Japan", "US", R::Opposition, "T1"),
      rec("a", "EU", "Japan", R::Agreement, "T1", D::ClosureDerivation),
      rec("a", "Japan", "EU", R::Agreement, "T1", D::ClosureDerivation),
      rec("b", "China", "G-77/China", R::OnBehalfOf),
      rec("b", "G-77/China", "China", R::OnBehalfOf, std::nullopt, D::ClosureBidirectional),
      rec("b", "EU", "China", R::Support, "T2"),
      rec("c", "US", "EU", R::DelayingProposal, "T2"),
      rec("c", "EU", "AOSIS", R::Support, "T3"),
      rec("c", "Japan", "EU", R::Support, "T3"),
  };
};

}  // namespace fixture
