#pragma once

// Hand-derived annotation of the UNFCCC fixture reports under the scripted
// model, after rule closure. Used by the pipeline tests and the acceptance
// binary.

#include "annonet/core.hpp"

namespace fixture {

inline annonet::InteractionSet expected_unfccc() {
  using annonet::RelationType;
  annonet::InteractionSet s;
  auto add = [&](const char* report, std::size_t para, annonet::EntityRef h, annonet::EntityRef t, RelationType r,
                 const char* topic) {
    annonet::Interaction x;
    x.head = std::move(h);
    x.tail = std::move(t);
    x.relation = r;
    if (topic) x.topic = annonet::TopicId{topic};
    x.paragraph = {report, para};
    s.insert(x);
  };
  auto e = [](const char* n) { return annonet::EntityRef{n, false}; };
  auto both = [&](const char* report, std::size_t para, const char* a, const char* b, const char* topic) {
    add(report, para, e(a), e(b), RelationType::Agreement, topic);
    add(report, para, e(b), e(a), RelationType::Agreement, topic);
  };

  // Philippines supported by Saudi Arabia and Kuwait: two stated, two derived.
  add("enb-0120", 0, e("Saudi Arabia"), e("Philippines"), RelationType::Support, "T001");
  add("enb-0120", 0, e("Kuwait"), e("Philippines"), RelationType::Support, "T001");
  both("enb-0120", 0, "Kuwait", "Saudi Arabia", "T001");

  // Switzerland with the EU, supported by AOSIS.
  both("enb-0215", 0, "Switzerland", "EU", "T005");
  add("enb-0215", 0, e("AOSIS"), e("Switzerland"), RelationType::Support, "T005");

  // Samoa agreed with the EU (answered on the retry).
  both("enb-0215", 1, "Samoa", "EU", "T004");

  // Australia, New Zealand, Iceland: chain closed to all six ordered pairs.
  both("enb-0215", 2, "Australia", "New Zealand", "T004");
  both("enb-0215", 2, "New Zealand", "Iceland", "T004");
  both("enb-0215", 2, "Australia", "Iceland", "T004");

  // Brazil, China and India opposed the US.
  for (const char* p : {"Brazil", "China", "India"})
    add("enb-0775", 0, e(p), e("US"), RelationType::Opposition, "T005");
  both("enb-0775", 0, "Brazil", "China", "T005");
  both("enb-0775", 0, "Brazil", "India", "T005");
  both("enb-0775", 0, "China", "India", "T005");

  // Türkiye supported by Norway; the Chair is outside the entity space and
  // its topic answer is not a known label.
  add("enb-0775", 1, e("Norway"), e("Türkiye"), RelationType::Support, "T006");
  add("enb-0775", 1, {"The Chair", true}, e("Türkiye"), RelationType::Agreement, nullptr);
  add("enb-0775", 1, e("Türkiye"), {"The Chair", true}, RelationType::Agreement, nullptr);
  return s;
}

}  // namespace fixture
