#pragma once

// Instruction/output pairs for supervised tuning of the data-rich model.
//
// Input lines look like codebook examples:
//   {"id": "...", "paragraph": "...", "gold": [{"Party1", "Party2", "Relation", "Topic"}]}
// Each paragraph yields a presence pair, a relation pair and (when it has
// gold interactions) an attribute pair. Instructions carry no examples.

#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "annonet/codebook.hpp"
#include "annonet/error.hpp"

namespace annonet {

struct InstructionPair {
  Subtask subtask = Subtask::Presence;
  std::string source_id;
  std::string instruction;
  std::string output;
};

inline std::vector<InstructionPair> make_instruction_pairs(const AnnotatedExample& ex, const Codebook& cb) {
  std::vector<InstructionPair> out;
  for (auto s : {Subtask::Presence, Subtask::Relation, Subtask::Attribute}) {
    if (s == Subtask::Attribute && ex.gold.empty()) continue;
    std::vector<Triplet> triplets;
    for (const auto& g : ex.gold) triplets.push_back(g.triplet);
    const auto prompt = s == Subtask::Attribute ? assemble_prompt(s, cb, {}, ex.paragraph, triplets)
                                                : assemble_prompt(s, cb, {}, ex.paragraph);
    out.push_back({s, ex.id, prompt.rendered, render_example_output(s, ex)});
  }
  return out;
}

/// Parses training lines (see above) against the codebook's entity space.
/// Errors name the offending line.
inline std::vector<AnnotatedExample> parse_training_examples(std::string_view content, const Codebook& cb) {
  std::vector<AnnotatedExample> out;
  std::istringstream in{std::string(content)};
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError("training line " + std::to_string(n) + ": invalid JSON");
    if (!j.contains("id")) j["id"] = "line-" + std::to_string(n);
    j["subtask"] = "relation";
    try {
      out.push_back(detail::parse_example(j, cb.entity_space));
    } catch (const ValidationError& e) {
      throw ValidationError("training line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline std::string serialize_pairs(const std::vector<InstructionPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["instruction"] = p.instruction;
    j["output"] = p.output;
    j["subtask"] = to_string(p.subtask);
    j["source_id"] = p.source_id;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace annonet
