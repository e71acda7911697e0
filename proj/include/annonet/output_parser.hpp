#pragma once

// Parsing of raw model text: yes/no verdicts for the presence filter and
// JSON record lists ({"Party1", "Party2", "Relation"[, "Topic"]}) for the
// extraction and attribute steps. Models like to wrap JSON in prose or code
// fences, so the first top-level array in the text is used.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "annonet/core.hpp"
#include "annonet/error.hpp"
#include "annonet/text.hpp"

namespace annonet {

/// "Yes"/"No" (or true/false), ignoring case, quotes and trailing prose.
inline std::optional<bool> parse_verdict(std::string_view raw) {
  std::string s = text::ascii_lower(text::trim(raw));
  std::size_t i = 0;
  while (i < s.size() && (s[i] == '"' || s[i] == '\'' || s[i] == '*' || s[i] == '`' || text::is_space(s[i]))) ++i;
  s.erase(0, i);
  auto word_at_start = [&](std::string_view w) {
    return s.rfind(w, 0) == 0 && (s.size() == w.size() || !std::isalnum(static_cast<unsigned char>(s[w.size()])));
  };
  if (word_at_start("yes") || word_at_start("true")) return true;
  if (word_at_start("no") || word_at_start("false")) return false;
  return std::nullopt;
}

/// Finds a JSON array in `raw`: the whole text, the body of a code fence,
/// or the span from the first '[' to the last ']'.
inline std::optional<nlohmann::json> extract_json_array(std::string_view raw) {
  auto try_parse = [](std::string_view s) -> std::optional<nlohmann::json> {
    auto j = nlohmann::json::parse(s.begin(), s.end(), nullptr, false);
    if (j.is_discarded() || !j.is_array()) return std::nullopt;
    return j;
  };
  if (auto j = try_parse(text::trim(raw))) return j;
  if (auto fence = raw.find("```"); fence != std::string_view::npos) {
    auto body_start = raw.find('\n', fence);
    auto close = body_start == std::string_view::npos ? std::string_view::npos : raw.find("```", body_start);
    if (close != std::string_view::npos)
      if (auto j = try_parse(text::trim(raw.substr(body_start + 1, close - body_start - 1)))) return j;
  }
  const auto open = raw.find('[');
  const auto last = raw.rfind(']');
  if (open != std::string_view::npos && last != std::string_view::npos && last > open)
    return try_parse(raw.substr(open, last - open + 1));
  return std::nullopt;
}

struct RawRecord {
  std::string party1;
  std::string party2;
  std::string relation;
  std::optional<std::string> topic;
};

struct ParsedRecords {
  std::vector<RawRecord> records;
  std::vector<std::string> warnings;
};

/// Throws ParseError when no JSON array is present. Elements that are not
/// objects with string Party1/Party2/Relation are skipped with a warning.
inline ParsedRecords parse_records(std::string_view raw) {
  auto arr = extract_json_array(raw);
  if (!arr) throw ParseError("model output is not a JSON list");
  ParsedRecords out;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto& item = (*arr)[i];
    auto str = [&](const char* key) -> std::optional<std::string> {
      if (!item.is_object() || !item.contains(key) || !item[key].is_string()) return std::nullopt;
      return item[key].get<std::string>();
    };
    auto p1 = str("Party1");
    auto p2 = str("Party2");
    auto rel = str("Relation");
    if (!p1 || !p2 || !rel || text::trim(*p1).empty() || text::trim(*p2).empty()) {
      out.warnings.push_back("record " + std::to_string(i) + " lacks Party1/Party2/Relation; dropped");
      continue;
    }
    RawRecord r{*p1, *p2, *rel, str("Topic")};
    out.records.push_back(std::move(r));
  }
  return out;
}

struct TripletParse {
  std::vector<Triplet> triplets;  // sorted, unique
  std::vector<std::string> warnings;
};

/// Turns raw records into normalized triplets. Unknown relations and
/// self-interactions are dropped with a warning; out-of-space parties are
/// kept and flagged.
inline TripletParse to_triplets(const ParsedRecords& parsed, const EntitySpace& space, double fuzzy_threshold) {
  TripletParse out{{}, parsed.warnings};
  for (const auto& r : parsed.records) {
    const auto rel = parse_relation(r.relation);
    if (!rel) {
      out.warnings.push_back("unknown relation '" + r.relation + "'; record dropped");
      continue;
    }
    Triplet t{EntityRef::from(normalize_entity(r.party1, space, fuzzy_threshold)),
              EntityRef::from(normalize_entity(r.party2, space, fuzzy_threshold)), *rel};
    if (t.head.name == t.tail.name) {
      out.warnings.push_back("self-interaction of '" + t.head.name + "'; record dropped");
      continue;
    }
    if (t.head.out_of_space) out.warnings.push_back("out-of-space entity '" + t.head.name + "'");
    if (t.tail.out_of_space) out.warnings.push_back("out-of-space entity '" + t.tail.name + "'");
    out.triplets.push_back(std::move(t));
  }
  std::sort(out.triplets.begin(), out.triplets.end());
  out.triplets.erase(std::unique(out.triplets.begin(), out.triplets.end()), out.triplets.end());
  return out;
}

}  // namespace annonet
