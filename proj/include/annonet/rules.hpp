#pragma once

// Multi-interaction coding rules, applied within a single paragraph:
//
//   bidirectionality  Agreement and On-behalf-of hold in both directions.
//   transitivity      Parties linked by mutual agreement form a group; every
//                     ordered pair in the group carries an Agreement.
//   derivation        Two parties that support (or oppose) the same target
//                     agree with each other.
//
// Each rule only adds interactions, is monotone, and never crosses paragraph
// or (for transitivity) topic boundaries, so iterating the enabled rules
// reaches the same fixpoint in any order.

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "annonet/core.hpp"
#include "annonet/error.hpp"

namespace annonet {

enum class Rule { Bidirectionality, Transitivity, Derivation };

inline constexpr std::array<Rule, 3> kAllRules{Rule::Bidirectionality, Rule::Transitivity, Rule::Derivation};

inline std::string_view to_string(Rule r) noexcept {
  switch (r) {
    case Rule::Bidirectionality: return "bidirectionality";
    case Rule::Transitivity: return "transitivity";
    case Rule::Derivation: return "derivation";
  }
  return "";
}

inline std::optional<Rule> parse_rule(std::string_view s) {
  for (auto r : kAllRules)
    if (text::iequals(to_string(r), text::trim(s))) return r;
  return std::nullopt;
}

struct RuleConfig {
  std::set<Rule> enabled{kAllRules.begin(), kAllRules.end()};
  /// Application order within one round; only affects the `derived` tag of
  /// interactions reachable by more than one rule.
  std::vector<Rule> order{kAllRules.begin(), kAllRules.end()};
  int max_iterations = 10;

  [[nodiscard]] bool any_enabled() const noexcept { return !enabled.empty(); }
};

namespace detail {

/// Runs `fn(begin, end)` on each run of interactions sharing a paragraph.
template <typename Fn>
void for_each_paragraph(const InteractionSet& s, Fn&& fn) {
  auto it = s.begin();
  while (it != s.end()) {
    auto end = it;
    while (end != s.end() && end->paragraph == it->paragraph) ++end;
    fn(it, end);
    it = end;
  }
}

/// Connected components (size >= min_size) of the mutual-agreement graph of
/// one paragraph, keyed by topic. Members of each component are sorted.
template <typename It>
std::vector<std::pair<std::optional<TopicId>, std::vector<EntityRef>>> mutual_agreement_groups(It begin, It end,
                                                                                             std::size_t min_size) {
  std::map<std::optional<TopicId>, std::set<std::pair<EntityRef, EntityRef>>> directed;
  for (auto it = begin; it != end; ++it)
    if (it->relation == RelationType::Agreement) directed[it->topic].emplace(it->head, it->tail);

  std::vector<std::pair<std::optional<TopicId>, std::vector<EntityRef>>> out;
  for (const auto& [topic, edges] : directed) {
    std::map<EntityRef, EntityRef> parent;
    std::function<EntityRef(const EntityRef&)> find = [&](const EntityRef& x) -> EntityRef {
      auto p = parent.at(x);
      if (p == x) return x;
      auto root = find(p);
      parent[x] = root;
      return root;
    };
    for (const auto& [h, t] : edges) {
      if (h == t || !edges.contains({t, h})) continue;
      parent.emplace(h, h);
      parent.emplace(t, t);
      auto a = find(h);
      auto b = find(t);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::map<EntityRef, std::vector<EntityRef>> comps;
    for (const auto& [node, _] : parent) comps[find(node)].push_back(node);
    for (auto& [root, members] : comps)
      if (members.size() >= min_size) out.emplace_back(topic, std::move(members));
  }
  return out;
}

/// Agreements implied by co-support / co-opposition in one paragraph. A
/// derived agreement carries the topic when both source interactions share
/// it, otherwise no topic.
template <typename It>
std::vector<Interaction> derivation_obligations(It begin, It end) {
  std::map<std::pair<EntityRef, RelationType>, std::vector<const Interaction*>> groups;
  for (auto it = begin; it != end; ++it)
    if (it->relation == RelationType::Support || it->relation == RelationType::Opposition)
      groups[{it->tail, it->relation}].push_back(&*it);

  std::vector<Interaction> out;
  for (const auto& [key, members] : groups) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        const auto& a = *members[i];
        const auto& b = *members[j];
        if (a.head == b.head) continue;
        std::optional<TopicId> topic = a.topic == b.topic ? a.topic : std::nullopt;
        out.push_back({a.head, b.head, RelationType::Agreement, topic, a.paragraph, Derivation::ClosureDerivation});
        out.push_back({b.head, a.head, RelationType::Agreement, topic, a.paragraph, Derivation::ClosureDerivation});
      }
    }
  }
  return out;
}

}  // namespace detail

/// Adds the reverse of every Agreement / On-behalf-of interaction.
inline InteractionSet close_bidirectional(const InteractionSet& s) {
  InteractionSet out = s;
  for (const auto& x : s)
    if (is_bidirectional(x.relation) && x.head != x.tail) out.insert(x.reversed(Derivation::ClosureBidirectional));
  return out;
}

/// Completes every mutual-agreement component (per paragraph and topic) to
/// all ordered Agreement pairs.
inline InteractionSet close_transitive_agreement(const InteractionSet& s) {
  InteractionSet out = s;
  detail::for_each_paragraph(s, [&](auto begin, auto end) {
    const ParagraphRef& para = begin->paragraph;
    for (const auto& [topic, members] : detail::mutual_agreement_groups(begin, end, 3))
      for (const auto& a : members)
        for (const auto& b : members)
          if (a != b) out.insert({a, b, RelationType::Agreement, topic, para, Derivation::ClosureTransitive});
  });
  return out;
}

/// Adds Agreement in both directions between every two distinct senders
/// that support (or oppose) the same target in the same paragraph.
inline InteractionSet derive_agreements(const InteractionSet& s) {
  InteractionSet out = s;
  detail::for_each_paragraph(s, [&](auto begin, auto end) {
    for (auto& x : detail::derivation_obligations(begin, end)) out.insert(std::move(x));
  });
  return out;
}

inline InteractionSet apply_rule(Rule r, const InteractionSet& s) {
  switch (r) {
    case Rule::Bidirectionality: return close_bidirectional(s);
    case Rule::Transitivity: return close_transitive_agreement(s);
    case Rule::Derivation: return derive_agreements(s);
  }
  return s;
}

/// Applies the enabled rules round by round until a round adds nothing.
inline InteractionSet close_to_fixpoint(const InteractionSet& s, const RuleConfig& config = {}) {
  InteractionSet cur = s;
  for (int round = 0; round < config.max_iterations; ++round) {
    const auto before = cur.size();
    for (auto r : config.order)
      if (config.enabled.contains(r)) cur = apply_rule(r, cur);
    if (cur.size() == before) return cur;
  }
  throw InternalError("rule closure did not converge within " + std::to_string(config.max_iterations) + " rounds");
}

struct RuleCompliance {
  std::size_t obligated = 0;
  std::size_t satisfied = 0;

  /// Share of obligations met; 1.0 when nothing is obligated.
  [[nodiscard]] double fraction() const noexcept {
    return obligated == 0 ? 1.0 : static_cast<double>(satisfied) / static_cast<double>(obligated);
  }
};

struct ComplianceReport {
  RuleCompliance bidirectionality;
  RuleCompliance transitivity;
  RuleCompliance derivation;

  [[nodiscard]] const RuleCompliance& get(Rule r) const {
    switch (r) {
      case Rule::Bidirectionality: return bidirectionality;
      case Rule::Transitivity: return transitivity;
      case Rule::Derivation: return derivation;
    }
    return bidirectionality;
  }
};

/// Denominator definitions printed alongside audit results.
inline constexpr std::string_view kComplianceDefinition =
    "bidirectionality: both directions of every Agreement/On-behalf-of pair are obligated; "
    "transitivity: every ordered pair inside a mutual-agreement group of 3+ parties (same paragraph and topic) "
    "is obligated; derivation: Agreement in both directions between co-supporters/co-opposers of one target "
    "(same paragraph) is obligated.";

/// Measures how far `s` already satisfies each rule. Obligations are derived
/// from `s` itself.
inline ComplianceReport audit_compliance(const InteractionSet& s) {
  ComplianceReport report;
  auto count = [&](RuleCompliance& rc, const std::set<Interaction>& obligations) {
    rc.obligated += obligations.size();
    for (const auto& o : obligations) rc.satisfied += s.contains(o) ? 1 : 0;
  };
  detail::for_each_paragraph(s, [&](auto begin, auto end) {
    std::set<Interaction> bidi;
    for (auto it = begin; it != end; ++it) {
      if (!is_bidirectional(it->relation) || it->head == it->tail) continue;
      bidi.insert(*it);
      bidi.insert(it->reversed(Derivation::ClosureBidirectional));
    }
    count(report.bidirectionality, bidi);

    std::set<Interaction> trans;
    for (const auto& [topic, members] : detail::mutual_agreement_groups(begin, end, 3))
      for (const auto& a : members)
        for (const auto& b : members)
          if (a != b) trans.insert({a, b, RelationType::Agreement, topic, begin->paragraph, Derivation::ClosureTransitive});
    count(report.transitivity, trans);

    auto derived = detail::derivation_obligations(begin, end);
    count(report.derivation, std::set<Interaction>(derived.begin(), derived.end()));
  });
  return report;
}

}  // namespace annonet
