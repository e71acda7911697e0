#pragma once

// The expert codebook (label definitions, coding rules, topic definitions,
// example bank) and prompt assembly for the three annotation subtasks.
//
// Codebook file layout, one section per bracketed header:
//
//   [entities]        Name | nation_state|coalition | alias; alias
//   [relations]       Label: definition text
//   [rules]           - rule text (continuation lines are appended)
//   [topics]          T001 | Name | description
//   [task:<subtask>]  free text
//   [format:<subtask>] free text
//   [examples]        one JSON object per line:
//                     {"id", "subtask", "paragraph", "gold": [{"Party1", "Party2", "Relation", "Topic"}]}
//
// Lines starting with '#' are comments everywhere.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "annonet/core.hpp"
#include "annonet/error.hpp"
#include "annonet/text.hpp"

namespace annonet {

enum class Subtask { Presence, Relation, Attribute };

inline std::string_view to_string(Subtask s) noexcept {
  switch (s) {
    case Subtask::Presence: return "presence";
    case Subtask::Relation: return "relation";
    case Subtask::Attribute: return "attribute";
  }
  return "";
}

inline std::optional<Subtask> parse_subtask(std::string_view s) {
  const auto k = text::ascii_lower(text::trim(s));
  if (k == "presence") return Subtask::Presence;
  if (k == "relation") return Subtask::Relation;
  if (k == "attribute") return Subtask::Attribute;
  return std::nullopt;
}

struct TopicDefinition {
  TopicId id;
  std::string name;
  std::string description;

  bool operator==(const TopicDefinition&) const = default;
};

/// One gold interaction of an example paragraph; the topic is kept by name so
/// examples survive topic-space revisions.
struct ExampleInteraction {
  Triplet triplet;
  std::optional<std::string> topic_name;
};

struct AnnotatedExample {
  std::string id;
  Subtask subtask = Subtask::Relation;
  std::string paragraph;
  std::vector<ExampleInteraction> gold;
};

struct Codebook {
  EntitySpace entity_space;
  std::map<RelationType, std::string> relation_definitions;
  std::vector<std::string> coding_rules;
  std::vector<TopicDefinition> topic_definitions;
  std::vector<AnnotatedExample> example_bank;
  std::map<Subtask, std::string> task_instructions;
  std::map<Subtask, std::string> format_instructions;

  [[nodiscard]] const AnnotatedExample* find_example(std::string_view id) const {
    for (const auto& e : example_bank)
      if (e.id == id) return &e;
    return nullptr;
  }

  /// Case-insensitive lookup by topic name.
  [[nodiscard]] const TopicDefinition* topic_by_name(std::string_view name) const {
    const auto key = text::collapse_whitespace(text::trim(name));
    for (const auto& t : topic_definitions)
      if (text::iequals(t.name, key)) return &t;
    return nullptr;
  }

  [[nodiscard]] const TopicDefinition* topic_by_id(const TopicId& id) const {
    for (const auto& t : topic_definitions)
      if (t.id == id) return &t;
    return nullptr;
  }

  /// Replaces the topic label space (e.g. with the active topic-space version).
  void set_topics(std::vector<TopicDefinition> topics);
};

inline std::string default_task_instruction(Subtask s) {
  switch (s) {
    case Subtask::Presence:
      return "Please determine whether this paragraph contains any interaction between parties.";
    case Subtask::Relation:
      return "Please extract all the interactions between parties from this paragraph.";
    case Subtask::Attribute:
      return "Please identify the topic of each of the given interactions between parties in this paragraph.";
  }
  return "";
}

inline std::string default_format_instruction(Subtask s) {
  switch (s) {
    case Subtask::Presence:
      return "Answer with a single word: \"Yes\" if the paragraph contains at least one interaction "
             "between parties, otherwise \"No\".";
    case Subtask::Relation:
      return "The output should be a list of JSON objects. Each JSON object codes one interaction, "
             "with keys \"Party1\", \"Party2\", and \"Relation\".";
    case Subtask::Attribute:
      return "The output should be a list of JSON objects, one for each given interaction, with keys "
             "\"Party1\", \"Party2\", \"Relation\", and \"Topic\". The value of \"Topic\" must be one "
             "of the topic names listed above.";
  }
  return "";
}

namespace detail {

inline void check_topics(const std::vector<TopicDefinition>& topics) {
  for (std::size_t i = 0; i < topics.size(); ++i) {
    if (topics[i].id.value.empty()) throw ValidationError("topic with empty id");
    if (text::trim(topics[i].name).empty())
      throw ValidationError("topic '" + topics[i].id.value + "' has an empty name");
    for (std::size_t j = 0; j < i; ++j) {
      if (topics[i].id == topics[j].id) throw ValidationError("duplicate topic id '" + topics[i].id.value + "'");
      if (text::iequals(topics[i].name, topics[j].name))
        throw ValidationError("duplicate topic name '" + topics[i].name + "'");
    }
  }
}

inline AnnotatedExample parse_example(const nlohmann::json& j, const EntitySpace& space) {
  AnnotatedExample ex;
  ex.id = j.value("id", "");
  if (ex.id.empty()) throw ValidationError("example without id");
  const auto st = parse_subtask(j.value("subtask", "relation"));
  if (!st) throw ValidationError("example '" + ex.id + "' has an unknown subtask");
  ex.subtask = *st;
  ex.paragraph = j.value("paragraph", "");
  if (text::trim(ex.paragraph).empty()) throw ValidationError("example '" + ex.id + "' has an empty paragraph");
  for (const auto& g : j.value("gold", nlohmann::json::array())) {
    auto resolve = [&](const char* key) {
      const auto raw = g.value(key, "");
      if (raw.empty()) throw ValidationError("example '" + ex.id + "' gold record lacks " + key);
      auto r = normalize_entity(raw, space);
      if (std::holds_alternative<OutOfSpace>(r))
        throw ValidationError("example '" + ex.id + "' references out-of-space entity '" + raw + "'");
      return EntityRef::from(r);
    };
    ExampleInteraction gi;
    gi.triplet.head = resolve("Party1");
    gi.triplet.tail = resolve("Party2");
    const auto rel = parse_relation(g.value("Relation", ""));
    if (!rel) throw ValidationError("example '" + ex.id + "' has an unknown relation");
    gi.triplet.relation = *rel;
    if (g.contains("Topic") && g["Topic"].is_string()) gi.topic_name = g["Topic"].get<std::string>();
    ex.gold.push_back(std::move(gi));
  }
  return ex;
}

}  // namespace detail

inline void Codebook::set_topics(std::vector<TopicDefinition> topics) {
  detail::check_topics(topics);
  topic_definitions = std::move(topics);
}

/// Parses codebook text. Throws ValidationError naming the first problem.
inline Codebook parse_codebook(std::string_view content) {
  Codebook cb;
  std::vector<Entity> entities;
  std::string section;
  std::map<std::string, std::string> free_text;
  std::vector<std::string> example_lines;

  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto t = text::trim(line);
    if (t.starts_with("#")) continue;
    if (t.starts_with("[") && t.ends_with("]")) {
      section = text::ascii_lower(text::trim(t.substr(1, t.size() - 2)));
      continue;
    }
    const auto where = " (line " + std::to_string(lineno) + ")";
    if (section.starts_with("task:") || section.starts_with("format:")) {
      auto& buf = free_text[section];
      if (!buf.empty() || !t.empty()) {
        buf.append(t);
        buf.push_back('\n');
      }
      continue;
    }
    if (t.empty()) continue;
    if (section == "entities") {
      auto parts = text::split(t, '|');
      Entity e;
      e.canonical_name = std::string(text::trim(parts[0]));
      if (parts.size() > 1) {
        auto kind = parse_entity_kind(parts[1]);
        if (!kind) throw ValidationError("unknown entity kind '" + parts[1] + "'" + where);
        e.kind = *kind;
      }
      if (parts.size() > 2)
        for (auto& a : text::split(parts[2], ';'))
          if (!text::trim(a).empty()) e.aliases.emplace_back(text::trim(a));
      entities.push_back(std::move(e));
    } else if (section == "relations") {
      const auto colon = t.find(':');
      if (colon == std::string_view::npos) throw ValidationError("relation definition without ':'" + where);
      const auto rel = parse_relation(t.substr(0, colon));
      if (!rel) throw ValidationError("unknown relation '" + std::string(t.substr(0, colon)) + "'" + where);
      if (cb.relation_definitions.contains(*rel))
        throw ValidationError("duplicate definition for relation '" + std::string(relation_label(*rel)) + "'");
      cb.relation_definitions[*rel] = std::string(text::trim(t.substr(colon + 1)));
    } else if (section == "rules") {
      if (t.starts_with("- ")) {
        cb.coding_rules.emplace_back(text::trim(t.substr(2)));
      } else if (!cb.coding_rules.empty()) {
        cb.coding_rules.back().append(" ").append(t);
      } else {
        cb.coding_rules.emplace_back(t);
      }
    } else if (section == "topics") {
      auto parts = text::split(t, '|');
      if (parts.size() < 2) throw ValidationError("topic line needs 'id | name | description'" + where);
      TopicDefinition td{TopicId{std::string(text::trim(parts[0]))}, std::string(text::trim(parts[1])),
                         parts.size() > 2 ? std::string(text::trim(parts[2])) : std::string{}};
      cb.topic_definitions.push_back(std::move(td));
    } else if (section == "examples") {
      example_lines.emplace_back(t);
    } else {
      throw ValidationError("content outside a known section" + where);
    }
  }

  cb.entity_space = EntitySpace(std::move(entities));
  for (auto r : kAllRelations)
    if (!cb.relation_definitions.contains(r))
      throw ValidationError("missing relation definition '" + std::string(relation_label(r)) + "'");
  detail::check_topics(cb.topic_definitions);

  for (auto s : {Subtask::Presence, Subtask::Relation, Subtask::Attribute}) {
    auto task = free_text.find("task:" + std::string(to_string(s)));
    cb.task_instructions[s] = task != free_text.end() ? std::string(text::trim(task->second)) : default_task_instruction(s);
    auto fmt = free_text.find("format:" + std::string(to_string(s)));
    cb.format_instructions[s] = fmt != free_text.end() ? std::string(text::trim(fmt->second)) : default_format_instruction(s);
  }

  for (const auto& l : example_lines) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(l);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("malformed example record: ") + e.what());
    }
    auto ex = detail::parse_example(j, cb.entity_space);
    if (cb.find_example(ex.id)) throw ValidationError("duplicate example id '" + ex.id + "'");
    cb.example_bank.push_back(std::move(ex));
  }
  return cb;
}

inline Codebook load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read codebook " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_codebook(ss.str());
}

// ---------------------------------------------------------------------------
// Prompt assembly

inline constexpr std::string_view kSectionTask = "Task Instruction";
inline constexpr std::string_view kSectionLabels = "Label Definitions";
inline constexpr std::string_view kSectionRules = "Coding Rules";
inline constexpr std::string_view kSectionExamples = "Examples";
inline constexpr std::string_view kSectionFormat = "Format Instruction";
inline constexpr std::string_view kSectionInstance = "Inference Instance";

struct PromptBundle {
  Subtask subtask = Subtask::Relation;
  std::vector<std::pair<std::string, std::string>> sections;
  std::string rendered;
};

/// JSON list of {"Party1", "Party2", "Relation"[, "Topic"]} records.
inline std::string render_triplets(std::span<const Triplet> triplets) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : triplets)
    arr.push_back({{"Party1", t.head.name}, {"Party2", t.tail.name}, {"Relation", relation_label(t.relation)}});
  return arr.dump();
}

inline std::string render_example_output(Subtask subtask, const AnnotatedExample& ex) {
  if (subtask == Subtask::Presence) return ex.gold.empty() ? "No" : "Yes";
  auto arr = nlohmann::ordered_json::array();
  for (const auto& g : ex.gold) {
    nlohmann::ordered_json rec{{"Party1", g.triplet.head.name},
                               {"Party2", g.triplet.tail.name},
                               {"Relation", relation_label(g.triplet.relation)}};
    if (subtask == Subtask::Attribute) rec["Topic"] = g.topic_name.value_or("");
    arr.push_back(std::move(rec));
  }
  return arr.dump();
}

namespace detail {

inline std::string label_definitions(Subtask subtask, const Codebook& cb) {
  std::string out;
  if (subtask == Subtask::Attribute) {
    out = "The variable 'topic' can take the following values.";
    for (const auto& t : cb.topic_definitions) {
      out += "\n- " + t.name;
      if (!t.description.empty()) out += ": " + t.description;
    }
    return out;
  }
  std::vector<std::string> names;
  for (const auto& e : cb.entity_space.entities()) names.push_back(e.canonical_name);
  std::sort(names.begin(), names.end());
  out = "Each party should be a country or a coalition, in the list " + nlohmann::json(names).dump() + "\n";
  out += "The variable 'interaction' can take the following values.";
  for (auto r : kAllRelations) out += "\n" + std::string(relation_label(r)) + ": " + cb.relation_definitions.at(r);
  return out;
}

inline std::string instance_block(Subtask subtask, std::string_view paragraph, std::span<const Triplet> context) {
  std::string out = "Paragraph:\n" + std::string(text::trim(paragraph)) + "\n";
  if (subtask == Subtask::Attribute) out += "Interactions:\n" + render_triplets(context) + "\n";
  out += "Output:";
  return out;
}

}  // namespace detail

/// Builds the prompt for one paragraph. Sections always appear in the order
/// Task Instruction, Label Definitions, Coding Rules, [Examples], Format
/// Instruction, Inference Instance; Examples is omitted when `examples` is
/// empty. The attribute subtask requires `context` (the triplets to label).
inline PromptBundle assemble_prompt(Subtask subtask, const Codebook& cb, std::span<const AnnotatedExample> examples,
                                    std::string_view paragraph,
                                    std::optional<std::span<const Triplet>> context = std::nullopt) {
  if (subtask == Subtask::Attribute && !context)
    throw InvalidInput("assemble_prompt: the attribute subtask needs the interactions to label");

  PromptBundle b;
  b.subtask = subtask;
  b.sections.emplace_back(kSectionTask, cb.task_instructions.at(subtask));
  b.sections.emplace_back(kSectionLabels, detail::label_definitions(subtask, cb));
  std::string rules = "Further coding rules:";
  for (const auto& r : cb.coding_rules) rules += "\n- " + r;
  b.sections.emplace_back(kSectionRules, std::move(rules));
  if (!examples.empty()) {
    std::string ex_text;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto& ex = examples[i];
      if (i) ex_text += "\n\n";
      ex_text += "Example " + std::to_string(i + 1) + ":\n";
      std::vector<Triplet> gold_triplets;
      for (const auto& g : ex.gold) gold_triplets.push_back(g.triplet);
      std::string block = detail::instance_block(subtask, ex.paragraph, gold_triplets);
      ex_text += block + "\n" + render_example_output(subtask, ex);
    }
    b.sections.emplace_back(kSectionExamples, std::move(ex_text));
  }
  b.sections.emplace_back(kSectionFormat, cb.format_instructions.at(subtask));
  const std::span<const Triplet> ctx = context.value_or(std::span<const Triplet>{});
  b.sections.emplace_back(kSectionInstance, detail::instance_block(subtask, paragraph, ctx));

  for (std::size_t i = 0; i < b.sections.size(); ++i) {
    if (i) b.rendered += "\n\n";
    b.rendered += "### " + b.sections[i].first + "\n" + b.sections[i].second;
  }
  return b;
}

}  // namespace annonet
