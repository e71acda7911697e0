#pragma once

// Annotation records, the longitudinal dataset built from them, its CSV and
// JSONL forms, and descriptive statistics.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "annonet/core.hpp"
#include "annonet/corpus.hpp"
#include "annonet/error.hpp"
#include "annonet/pipeline.hpp"

namespace annonet {

// ---------------------------------------------------------------------------
// Annotation records (one JSON object per line)

struct AnnotationRecord {
  std::string run_id;
  Interaction interaction;
  std::string model_id;

  bool operator==(const AnnotationRecord& o) const {
    return run_id == o.run_id && interaction == o.interaction && interaction.derived == o.interaction.derived &&
           model_id == o.model_id;
  }
};

inline nlohmann::ordered_json to_json(const AnnotationRecord& r) {
  const auto& x = r.interaction;
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["report_id"] = x.paragraph.report_id;
  j["paragraph_index"] = x.paragraph.paragraph_index;
  j["party1"] = x.head.name;
  j["party2"] = x.tail.name;
  j["relation"] = relation_label(x.relation);
  j["topic"] = x.topic ? nlohmann::ordered_json(x.topic->value) : nlohmann::ordered_json(nullptr);
  j["derived"] = to_string(x.derived);
  j["out_of_space_flags"] = {{"party1", x.head.out_of_space}, {"party2", x.tail.out_of_space}};
  j["model_id"] = r.model_id;
  return j;
}

inline AnnotationRecord annotation_record_from_json(const nlohmann::json& j) {
  try {
    AnnotationRecord r;
    r.run_id = j.value("run_id", std::string{});
    r.model_id = j.value("model_id", std::string{});
    auto& x = r.interaction;
    x.paragraph = {j.at("report_id").get<std::string>(), j.at("paragraph_index").get<std::size_t>()};
    const auto flags = j.value("out_of_space_flags", nlohmann::json::object());
    x.head = {j.at("party1").get<std::string>(), flags.value("party1", false)};
    x.tail = {j.at("party2").get<std::string>(), flags.value("party2", false)};
    const auto rel = parse_relation(j.at("relation").get<std::string>());
    if (!rel) throw ValidationError("unknown relation '" + j.at("relation").get<std::string>() + "'");
    x.relation = *rel;
    if (j.contains("topic") && !j["topic"].is_null()) x.topic = TopicId{j["topic"].get<std::string>()};
    const auto d = parse_derivation(j.value("derived", std::string("stated")));
    if (!d) throw ValidationError("unknown derivation '" + j.value("derived", std::string{}) + "'");
    x.derived = *d;
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed annotation record: ") + e.what());
  }
}

/// Records of a run in corpus order, one line each.
inline std::string serialize_annotations(const AnnotationRun& run) {
  std::string out;
  for (const auto& rec : run.records)
    for (const auto& x : rec.interactions) out += to_json(AnnotationRecord{run.run_id, x, run.model_id}).dump() + "\n";
  return out;
}

inline std::string serialize_annotations(std::span<const AnnotationRecord> records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

inline std::vector<AnnotationRecord> parse_annotations(std::string_view content) {
  std::vector<AnnotationRecord> out;
  std::istringstream in{std::string(content)};
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ValidationError("annotation line " + std::to_string(n) + ": invalid JSON");
    try {
      out.push_back(annotation_record_from_json(j));
    } catch (const ValidationError& e) {
      throw ValidationError("annotation line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

/// Per-paragraph log of a run: verdicts, raw model texts, warnings, errors.
inline std::string serialize_run_log(const AnnotationRun& run) {
  std::string out;
  for (const auto& rec : run.records) {
    nlohmann::ordered_json j;
    j["run_id"] = run.run_id;
    j["report_id"] = rec.ref.report_id;
    j["paragraph_index"] = rec.ref.paragraph_index;
    j["presence"] = rec.presence ? nlohmann::ordered_json(*rec.presence) : nlohmann::ordered_json(nullptr);
    auto calls = nlohmann::ordered_json::array();
    for (const auto& c : rec.calls)
      calls.push_back({{"step", to_string(c.step)}, {"fingerprint", c.prompt_fingerprint}, {"raw", c.raw}});
    j["calls"] = std::move(calls);
    j["triplet_count"] = rec.triplets.size();
    j["interaction_count"] = rec.interactions.size();
    j["warnings"] = rec.warnings;
    j["errors"] = rec.errors;
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Longitudinal dataset

struct DatasetRow {
  std::chrono::year_month_day date{};
  std::string meeting;
  std::string run_id;
  Interaction interaction;

  [[nodiscard]] int year() const { return static_cast<int>(date.year()); }

  bool operator==(const DatasetRow& o) const {
    return date == o.date && meeting == o.meeting && run_id == o.run_id && interaction == o.interaction &&
           interaction.derived == o.interaction.derived && interaction.head.out_of_space == o.interaction.head.out_of_space &&
           interaction.tail.out_of_space == o.interaction.tail.out_of_space;
  }
};

struct LongitudinalDataset {
  std::vector<DatasetRow> rows;
  std::string topic_space_version;
  std::vector<std::string> run_ids;  // sorted

  bool operator==(const LongitudinalDataset&) const = default;
};

/// Export order: date, report, paragraph, party1, party2, relation, topic.
inline void sort_rows(std::vector<DatasetRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const DatasetRow& a, const DatasetRow& b) {
    const auto& x = a.interaction;
    const auto& y = b.interaction;
    return std::tie(a.date, x.paragraph.report_id, x.paragraph.paragraph_index, x.head.name, x.tail.name, x.relation, x.topic) <
           std::tie(b.date, y.paragraph.report_id, y.paragraph.paragraph_index, y.head.name, y.tail.name, y.relation, y.topic);
  });
}

struct BuildOptions {
  bool include_out_of_space = false;
  bool stated_only = false;
  std::string topic_space_version;
};

/// Joins records to their reports. Duplicates collapse (stated copies win);
/// out-of-space rows are dropped unless asked for. A record whose report is
/// not in `corpus` is a validation error.
inline LongitudinalDataset build_dataset(std::span<const AnnotationRecord> records, std::span<const Report> corpus,
                                         const BuildOptions& options = {}) {
  std::map<std::string, const Report*> by_id;
  for (const auto& r : corpus) by_id.emplace(r.report_id, &r);

  std::vector<Interaction> xs;
  std::map<Interaction, std::string> run_of;
  std::set<std::string> runs;
  for (const auto& rec : records) {
    const auto& x = rec.interaction;
    if (!by_id.contains(x.paragraph.report_id))
      throw ValidationError("annotation refers to unknown report '" + x.paragraph.report_id + "'");
    if (!options.include_out_of_space && (x.head.out_of_space || x.tail.out_of_space)) continue;
    if (options.stated_only && x.derived != Derivation::Stated) continue;
    xs.push_back(x);
    run_of.emplace(x, rec.run_id);
    runs.insert(rec.run_id);
  }

  LongitudinalDataset ds;
  ds.topic_space_version = options.topic_space_version;
  ds.run_ids.assign(runs.begin(), runs.end());
  for (const auto& x : dedupe(xs)) {
    const Report& rep = *by_id.at(x.paragraph.report_id);
    ds.rows.push_back({rep.date, rep.meeting, run_of.at(x), x});
  }
  sort_rows(ds.rows);
  return ds;
}

inline LongitudinalDataset stated_only(const LongitudinalDataset& ds) {
  LongitudinalDataset out = ds;
  std::erase_if(out.rows, [](const DatasetRow& r) { return r.interaction.derived != Derivation::Stated; });
  return out;
}

namespace detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string export_csv(const LongitudinalDataset& ds) {
  std::string out = "date,meeting,party1,party2,relation,topic,derived\r\n";
  auto rows = ds.rows;
  sort_rows(rows);
  for (const auto& r : rows) {
    const auto& x = r.interaction;
    out += format_date(r.date) + "," + detail::csv_field(r.meeting) + "," + detail::csv_field(x.head.name) + "," +
           detail::csv_field(x.tail.name) + "," + std::string(relation_label(x.relation)) + "," +
           detail::csv_field(x.topic ? x.topic->value : "") + "," + std::string(to_string(x.derived)) + "\r\n";
  }
  return out;
}

/// First line describes the dataset, then one line per row.
inline std::string export_jsonl(const LongitudinalDataset& ds) {
  nlohmann::ordered_json head;
  head["kind"] = "dataset";
  head["topic_space_version"] = ds.topic_space_version;
  head["run_ids"] = ds.run_ids;
  std::string out = head.dump() + "\n";
  auto rows = ds.rows;
  sort_rows(rows);
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["kind"] = "interaction";
    j["date"] = format_date(r.date);
    j["meeting"] = r.meeting;
    auto rec = to_json(AnnotationRecord{r.run_id, r.interaction, ""});
    rec.erase("model_id");
    for (auto it = rec.begin(); it != rec.end(); ++it) j[it.key()] = it.value();
    out += j.dump() + "\n";
  }
  return out;
}

inline LongitudinalDataset import_jsonl(std::string_view content) {
  LongitudinalDataset ds;
  std::istringstream in{std::string(content)};
  std::string line;
  bool seen_head = false;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    const auto where = "dataset line " + std::to_string(n) + ": ";
    if (j.is_discarded() || !j.is_object()) throw ValidationError(where + "invalid JSON");
    const auto kind = j.value("kind", std::string{});
    if (kind == "dataset") {
      if (seen_head) throw ValidationError(where + "second dataset header");
      seen_head = true;
      ds.topic_space_version = j.value("topic_space_version", std::string{});
      ds.run_ids = j.value("run_ids", std::vector<std::string>{});
    } else if (kind == "interaction") {
      const auto date = parse_date(j.value("date", std::string{}));
      if (!date) throw ValidationError(where + "bad date");
      DatasetRow r;
      r.date = *date;
      r.meeting = j.value("meeting", std::string{});
      try {
        auto rec = annotation_record_from_json(j);
        r.run_id = rec.run_id;
        r.interaction = rec.interaction;
      } catch (const ValidationError& e) {
        throw ValidationError(where + e.what());
      }
      ds.rows.push_back(std::move(r));
    } else {
      throw ValidationError(where + "unknown record kind '" + kind + "'");
    }
  }
  if (!seen_head) throw ValidationError("dataset file has no header line");
  return ds;
}

// ---------------------------------------------------------------------------
// Statistics

/// Pearson correlation; nullopt for fewer than two points or zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("pearson: series lengths differ");
  const auto n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct YearCount {
  int year = 0;
  std::size_t reports = 0;
  std::size_t interactions = 0;
};

struct YearlyDistribution {
  std::vector<YearCount> years;  // ascending
  std::optional<double> correlation;
};

/// Daily reports and interactions per year over the union of years.
inline YearlyDistribution yearly_distribution(const LongitudinalDataset& ds, std::span<const Report> corpus) {
  std::map<int, YearCount> m;
  for (const auto& r : corpus)
    if (r.kind == ReportKind::Daily) ++m[r.year()].reports;
  for (const auto& row : ds.rows) ++m[row.year()].interactions;
  YearlyDistribution out;
  std::vector<double> xs, ys;
  for (auto& [year, c] : m) {
    c.year = year;
    out.years.push_back(c);
    xs.push_back(static_cast<double>(c.reports));
    ys.push_back(static_cast<double>(c.interactions));
  }
  out.correlation = pearson(xs, ys);
  return out;
}

struct Degree {
  std::string entity;
  std::size_t out = 0;
  std::size_t in = 0;
};

/// Sender/recipient counts, most active sender first (ties by name).
inline std::vector<Degree> activity_degrees(const LongitudinalDataset& ds) {
  std::map<std::string, Degree> m;
  for (const auto& row : ds.rows) {
    auto& h = m[row.interaction.head.name];
    h.entity = row.interaction.head.name;
    ++h.out;
    auto& t = m[row.interaction.tail.name];
    t.entity = row.interaction.tail.name;
    ++t.in;
  }
  std::vector<Degree> out;
  for (auto& [_, d] : m) out.push_back(d);
  std::stable_sort(out.begin(), out.end(), [](const Degree& a, const Degree& b) {
    if (a.out != b.out) return a.out > b.out;
    if (a.in != b.in) return a.in > b.in;
    return a.entity < b.entity;
  });
  return out;
}

/// year -> relation -> count; every year present lists all five relations.
inline std::map<int, std::map<RelationType, std::size_t>> relation_frequencies(const LongitudinalDataset& ds) {
  std::map<int, std::map<RelationType, std::size_t>> out;
  for (const auto& row : ds.rows) {
    auto& y = out[row.year()];
    if (y.empty())
      for (auto r : kAllRelations) y[r] = 0;
    ++y[row.interaction.relation];
  }
  return out;
}

struct TopicDistribution {
  std::map<std::string, std::size_t> counts;  // by topic id
  std::size_t no_topic = 0;
  std::map<int, std::map<std::string, std::size_t>> by_year;  // "" is the no-topic bucket

  [[nodiscard]] std::size_t total() const {
    std::size_t n = no_topic;
    for (const auto& [_, c] : counts) n += c;
    return n;
  }
};

inline TopicDistribution topic_distribution(const LongitudinalDataset& ds) {
  TopicDistribution out;
  for (const auto& row : ds.rows) {
    const auto& t = row.interaction.topic;
    if (t)
      ++out.counts[t->value];
    else
      ++out.no_topic;
    ++out.by_year[row.year()][t ? t->value : ""];
  }
  return out;
}

}  // namespace annonet
