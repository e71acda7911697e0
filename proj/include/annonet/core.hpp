#pragma once

// Domain types shared by every module: entities and the entity label space,
// relation types, and the interaction quadruplet (sender, recipient,
// relation, topic) together with its provenance.

#include <algorithm>
#include <array>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include "annonet/error.hpp"
#include "annonet/text.hpp"

namespace annonet {

enum class EntityKind { NationState, Coalition };

inline std::string_view to_string(EntityKind k) noexcept {
  return k == EntityKind::Coalition ? "coalition" : "nation_state";
}

inline std::optional<EntityKind> parse_entity_kind(std::string_view s) {
  const auto k = text::ascii_lower(text::trim(s));
  if (k == "coalition") return EntityKind::Coalition;
  if (k == "nation_state" || k == "nation-state" || k == "country") return EntityKind::NationState;
  return std::nullopt;
}

enum class RelationType { OnBehalfOf, Support, Agreement, DelayingProposal, Opposition };

inline constexpr std::array<RelationType, 5> kAllRelations{
    RelationType::OnBehalfOf, RelationType::Support, RelationType::Agreement,
    RelationType::DelayingProposal, RelationType::Opposition};

/// Agreement and OnBehalfOf are coded in both directions.
constexpr bool is_bidirectional(RelationType r) noexcept {
  return r == RelationType::Agreement || r == RelationType::OnBehalfOf;
}

/// Human-readable label used in prompts, model output and exported files.
inline std::string_view relation_label(RelationType r) noexcept {
  switch (r) {
    case RelationType::OnBehalfOf: return "On behalf of";
    case RelationType::Support: return "Support";
    case RelationType::Agreement: return "Agreement";
    case RelationType::DelayingProposal: return "Delaying proposal";
    case RelationType::Opposition: return "Opposition";
  }
  return "";
}

/// Case-, space- and punctuation-insensitive match against the five labels
/// (and the short forms "behalf" / "delay").
inline std::optional<RelationType> parse_relation(std::string_view s) {
  std::string key;
  for (char c : text::fold(s))
    if (std::isalnum(static_cast<unsigned char>(c))) key.push_back(c);
  if (key == "onbehalfof" || key == "behalf") return RelationType::OnBehalfOf;
  if (key == "support") return RelationType::Support;
  if (key == "agreement") return RelationType::Agreement;
  if (key == "delayingproposal" || key == "delay") return RelationType::DelayingProposal;
  if (key == "opposition") return RelationType::Opposition;
  return std::nullopt;
}

struct Entity {
  std::string canonical_name;
  EntityKind kind = EntityKind::NationState;
  std::vector<std::string> aliases;
  bool in_space = true;

  bool operator==(const Entity&) const = default;
};

/// Marker for a name that falls outside the predefined entity space.
struct OutOfSpace {
  std::string raw;

  bool operator==(const OutOfSpace&) const = default;
};

using Resolution = std::variant<Entity, OutOfSpace>;

/// Key under which names and aliases are indexed: mojibake repaired,
/// case-folded, whitespace collapsed, surrounding punctuation and a leading
/// article "the" removed.
inline std::string entity_key(std::string_view raw) {
  std::string k = text::collapse_whitespace(text::fold(text::repair_mojibake(text::trim(raw))));
  auto strip = [](char c) { return c == '.' || c == ',' || c == ';' || c == ':' || c == '"' || c == '\''; };
  while (!k.empty() && strip(k.back())) k.pop_back();
  while (!k.empty() && strip(k.front())) k.erase(k.begin());
  if (k.rfind("the ", 0) == 0) k.erase(0, 4);
  return text::collapse_whitespace(k);
}

/// The predefined label space of parties and coalitions.
class EntitySpace {
public:
  EntitySpace() = default;

  explicit EntitySpace(std::vector<Entity> entities) : entities_(std::move(entities)) {
    std::sort(entities_.begin(), entities_.end(),
              [](const Entity& a, const Entity& b) { return a.canonical_name < b.canonical_name; });
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      auto& e = entities_[i];
      e.in_space = true;
      if (text::trim(e.canonical_name).empty()) throw ValidationError("entity with empty canonical name");
      add_key(e.canonical_name, i, true);
      for (const auto& alias : e.aliases) add_key(alias, i, false);
      keys_.push_back(entity_key(e.canonical_name));
    }
  }

  [[nodiscard]] std::span<const Entity> entities() const noexcept { return entities_; }
  [[nodiscard]] std::size_t size() const noexcept { return entities_.size(); }
  [[nodiscard]] bool empty() const noexcept { return entities_.empty(); }

  /// Exact lookup on the normalized key of a name or alias.
  [[nodiscard]] const Entity* find_exact(std::string_view raw) const {
    auto it = alias_index_.find(entity_key(raw));
    return it == alias_index_.end() ? nullptr : &entities_[it->second];
  }

  [[nodiscard]] const Entity* find_canonical(std::string_view canonical) const {
    auto it = std::lower_bound(entities_.begin(), entities_.end(), canonical,
                               [](const Entity& e, std::string_view n) { return e.canonical_name < n; });
    return it != entities_.end() && it->canonical_name == canonical ? &*it : nullptr;
  }

  /// Normalized key -> canonical name.
  [[nodiscard]] std::map<std::string, std::string> alias_index() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, i] : alias_index_) out.emplace(k, entities_[i].canonical_name);
    return out;
  }

  /// Normalized key of the i-th canonical name (same order as entities()).
  [[nodiscard]] const std::string& canonical_key(std::size_t i) const { return keys_[i]; }

private:
  void add_key(std::string_view name, std::size_t idx, bool canonical) {
    auto key = entity_key(name);
    if (key.empty()) throw ValidationError("entity '" + entities_[idx].canonical_name + "' has an empty alias");
    auto [it, inserted] = alias_index_.emplace(key, idx);
    if (!inserted && it->second != idx) {
      const auto& other = entities_[it->second].canonical_name;
      if (canonical && entity_key(other) == key)
        throw ValidationError("duplicate entity name '" + entities_[idx].canonical_name + "'");
      throw ValidationError("alias '" + std::string(name) + "' maps to both '" + other + "' and '" +
                            entities_[idx].canonical_name + "'");
    }
  }

  std::vector<Entity> entities_;
  std::vector<std::string> keys_;
  std::map<std::string, std::size_t> alias_index_;
};

inline constexpr double kDefaultFuzzyThreshold = 0.9;

/// Resolves a raw party mention to the entity space. Exact alias hits win;
/// otherwise the canonical name with the highest normalized edit similarity
/// is accepted when it reaches `fuzzy_threshold` (ties: lexicographically
/// smallest canonical name).
inline Resolution normalize_entity(std::string_view raw, const EntitySpace& space,
                                   double fuzzy_threshold = kDefaultFuzzyThreshold) {
  if (text::trim(raw).empty()) throw InvalidInput("normalize_entity: empty entity name");
  if (const Entity* hit = space.find_exact(raw)) return *hit;

  const std::string key = entity_key(raw);
  const Entity* best = nullptr;
  double best_sim = -1.0;
  const auto entities = space.entities();
  // entities() is sorted by canonical name, so strict > keeps the
  // lexicographically smallest name on ties.
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const double sim = text::edit_similarity(key, space.canonical_key(i));
    if (sim > best_sim) {
      best_sim = sim;
      best = &entities[i];
    }
  }
  if (best != nullptr && best_sim >= fuzzy_threshold) return *best;
  return OutOfSpace{std::string(text::trim(raw))};
}

/// A party as it appears inside an interaction.
struct EntityRef {
  std::string name;
  bool out_of_space = false;

  auto operator<=>(const EntityRef&) const = default;

  static EntityRef from(const Resolution& r) {
    if (const auto* e = std::get_if<Entity>(&r)) return {e->canonical_name, false};
    return {std::get<OutOfSpace>(r).raw, true};
  }
};

struct TopicId {
  std::string value;

  auto operator<=>(const TopicId&) const = default;
};

struct ParagraphRef {
  std::string report_id;
  std::size_t paragraph_index = 0;

  auto operator<=>(const ParagraphRef&) const = default;
};

/// How an interaction entered the set. Lower values are preferred when
/// duplicates are merged.
enum class Derivation { Stated, ClosureBidirectional, ClosureTransitive, ClosureDerivation };

inline std::string_view to_string(Derivation d) noexcept {
  switch (d) {
    case Derivation::Stated: return "stated";
    case Derivation::ClosureBidirectional: return "closure_bidirectional";
    case Derivation::ClosureTransitive: return "closure_transitive";
    case Derivation::ClosureDerivation: return "closure_derivation";
  }
  return "";
}

inline std::optional<Derivation> parse_derivation(std::string_view s) {
  for (auto d : {Derivation::Stated, Derivation::ClosureBidirectional, Derivation::ClosureTransitive,
                 Derivation::ClosureDerivation})
    if (to_string(d) == s) return d;
  return std::nullopt;
}

/// The annotated quadruplet plus provenance. Equality and ordering ignore
/// `derived`.
struct Interaction {
  EntityRef head;
  EntityRef tail;
  RelationType relation = RelationType::Support;
  std::optional<TopicId> topic;
  ParagraphRef paragraph;
  Derivation derived = Derivation::Stated;

  [[nodiscard]] auto key() const { return std::tie(paragraph, head, tail, relation, topic); }

  friend bool operator==(const Interaction& a, const Interaction& b) { return a.key() == b.key(); }
  friend bool operator<(const Interaction& a, const Interaction& b) { return a.key() < b.key(); }

  /// Same interaction with sender and recipient swapped.
  [[nodiscard]] Interaction reversed(Derivation how) const {
    return Interaction{tail, head, relation, topic, paragraph, how};
  }
};

using InteractionSet = std::set<Interaction>;

/// Sender, recipient and relation without the topic attribute.
struct Triplet {
  EntityRef head;
  EntityRef tail;
  RelationType relation = RelationType::Support;

  auto operator<=>(const Triplet&) const = default;
};

/// Collapses duplicates (per Interaction equality). When copies differ only
/// in provenance the stated one is kept.
inline InteractionSet dedupe(std::span<const Interaction> items) {
  std::vector<Interaction> sorted(items.begin(), items.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const Interaction& a, const Interaction& b) {
    if (a.key() != b.key()) return a.key() < b.key();
    return a.derived < b.derived;
  });
  InteractionSet out;
  for (auto& x : sorted) out.insert(out.end(), std::move(x));
  return out;
}

}  // namespace annonet
