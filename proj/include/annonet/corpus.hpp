#pragma once

// Report ingestion. A report file is a small `key: value` metadata header,
// a blank line, then the body; paragraphs are blank-line separated blocks.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "annonet/error.hpp"
#include "annonet/text.hpp"

namespace annonet {

enum class ReportKind { Daily, Summary };

inline std::string_view to_string(ReportKind k) noexcept { return k == ReportKind::Daily ? "daily" : "summary"; }

struct Paragraph {
  std::size_t index = 0;
  std::string text;
  std::size_t word_count = 0;

  bool operator==(const Paragraph&) const = default;
};

struct Report {
  std::string report_id;
  std::chrono::year_month_day date{};
  std::string meeting;
  ReportKind kind = ReportKind::Daily;
  std::string framework;
  std::vector<Paragraph> paragraphs;

  [[nodiscard]] int year() const { return static_cast<int>(date.year()); }

  bool operator==(const Report&) const = default;
};

inline std::string format_date(const std::chrono::year_month_day& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

/// Strict ISO-8601 calendar date (YYYY-MM-DD).
inline std::optional<std::chrono::year_month_day> parse_date(std::string_view s) {
  s = text::trim(s);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto digits = [&](std::size_t from, std::size_t n) -> std::optional<int> {
    int v = 0;
    for (std::size_t i = from; i < from + n; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  auto y = digits(0, 4);
  auto m = digits(5, 2);
  auto d = digits(8, 2);
  if (!y || !m || !d) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                                  std::chrono::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

struct ParseOptions {
  /// Paragraphs whose whole text matches one of these are dropped before
  /// indexing (page headers, bulletin footers).
  std::vector<std::regex> boilerplate;
};

/// Footer and masthead lines that recur in bulletin pages.
inline std::vector<std::regex> default_boilerplate() {
  return {
      std::regex(R"(^This issue of the Earth Negotiations Bulletin.*)", std::regex::icase),
      std::regex(R"(^The Earth Negotiations Bulletin is (written|published).*)", std::regex::icase),
      std::regex(R"(^Earth Negotiations Bulletin\s*\|?\s*Vol\..*)", std::regex::icase),
  };
}

namespace detail {

inline std::string normalize_newlines(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\r') {
      out.push_back('\n');
      if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
    } else {
      out.push_back(raw[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Splits a body into blank-line separated blocks, each whitespace-collapsed.
inline std::vector<std::string> segment_paragraphs(std::string_view body) {
  std::vector<std::string> blocks;
  std::string current;
  std::istringstream in(detail::normalize_newlines(body));
  std::string line;
  auto flush = [&] {
    auto block = text::collapse_whitespace(current);
    if (!block.empty()) blocks.push_back(std::move(block));
    current.clear();
  };
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) {
      flush();
    } else {
      current.append(line);
      current.push_back('\n');
    }
  }
  flush();
  return blocks;
}

/// The body as the segmenter sees it: paragraphs joined by one blank line.
inline std::string normalize_body(std::string_view body) {
  return text::join(segment_paragraphs(body), "\n\n");
}

struct ParsedReport {
  Report report;
  std::vector<std::string> warnings;
};

inline ParsedReport parse_report(std::string_view raw, const ParseOptions& options = {}) {
  const std::string doc = detail::normalize_newlines(raw);
  std::map<std::string, std::string> meta;
  std::size_t pos = 0;
  while (pos < doc.size()) {
    std::size_t eol = doc.find('\n', pos);
    if (eol == std::string::npos) eol = doc.size();
    std::string_view line(doc.data() + pos, eol - pos);
    pos = eol + 1;
    if (text::trim(line).empty()) {
      if (meta.empty()) continue;  // leading blank lines
      break;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos)
      throw IngestError("", "malformed metadata line '" + std::string(line) + "'");
    meta[text::ascii_lower(text::trim(line.substr(0, colon)))] = std::string(text::trim(line.substr(colon + 1)));
  }
  const std::string_view body = pos < doc.size() ? std::string_view(doc).substr(pos) : std::string_view{};

  auto require = [&](const char* field) -> const std::string& {
    auto it = meta.find(field);
    if (it == meta.end() || it->second.empty())
      throw IngestError(field, std::string("missing metadata field '") + field + "'");
    return it->second;
  };

  ParsedReport out;
  Report& r = out.report;
  r.report_id = require("report_id");
  const auto date = parse_date(require("date"));
  if (!date) throw IngestError("date", "invalid date '" + meta["date"] + "' in report " + r.report_id);
  r.date = *date;
  r.meeting = require("meeting");
  const auto kind = text::ascii_lower(require("kind"));
  if (kind == "daily") {
    r.kind = ReportKind::Daily;
  } else if (kind == "summary") {
    r.kind = ReportKind::Summary;
  } else {
    throw IngestError("kind", "invalid report kind '" + kind + "' in report " + r.report_id);
  }
  r.framework = require("framework");

  for (auto& block : segment_paragraphs(body)) {
    const bool boiler = std::any_of(options.boilerplate.begin(), options.boilerplate.end(),
                                    [&](const std::regex& re) { return std::regex_match(block, re); });
    if (boiler) continue;
    Paragraph p;
    p.index = r.paragraphs.size();
    p.word_count = text::split_whitespace(block).size();
    p.text = std::move(block);
    r.paragraphs.push_back(std::move(p));
  }
  if (r.paragraphs.empty()) out.warnings.push_back("report " + r.report_id + " has an empty body");
  return out;
}

struct CorpusLoad {
  std::vector<Report> reports;
  std::vector<std::string> warnings;
};

/// Parses every regular, non-hidden file in `dir`, in file-name order.
/// Duplicate report ids are rejected.
inline CorpusLoad load_corpus(const std::filesystem::path& dir, const ParseOptions& options = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IngestError("", "corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename().string().starts_with(".")) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  CorpusLoad out;
  std::set<std::string> seen;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw IngestError("", "cannot read " + f.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ParsedReport parsed;
    try {
      parsed = parse_report(ss.str(), options);
    } catch (const IngestError& e) {
      throw IngestError(e.field(), f.filename().string() + ": " + e.what());
    }
    if (!seen.insert(parsed.report.report_id).second)
      throw IngestError("report_id", "duplicate report id '" + parsed.report.report_id + "' in " + f.string());
    for (auto& w : parsed.warnings) out.warnings.push_back(std::move(w));
    out.reports.push_back(std::move(parsed.report));
  }
  return out;
}

/// Keeps reports whose framework is in `allow` (case-insensitive), in order.
inline std::vector<Report> filter_corpus(const std::vector<Report>& reports, const std::set<std::string>& allow) {
  std::set<std::string> keys;
  for (const auto& a : allow) keys.insert(text::ascii_lower(text::trim(a)));
  std::vector<Report> out;
  for (const auto& r : reports)
    if (keys.contains(text::ascii_lower(text::trim(r.framework)))) out.push_back(r);
  return out;
}

struct CorpusStats {
  std::size_t report_count = 0;
  std::map<int, std::size_t> reports_per_year;
  std::size_t paragraph_count = 0;
  std::size_t word_count = 0;
  double mean_paragraphs_per_report = 0.0;
  double mean_words_per_paragraph = 0.0;
};

inline CorpusStats corpus_stats(const std::vector<Report>& reports) {
  CorpusStats s;
  s.report_count = reports.size();
  for (const auto& r : reports) {
    ++s.reports_per_year[r.year()];
    s.paragraph_count += r.paragraphs.size();
    for (const auto& p : r.paragraphs) s.word_count += p.word_count;
  }
  if (s.report_count > 0)
    s.mean_paragraphs_per_report = static_cast<double>(s.paragraph_count) / static_cast<double>(s.report_count);
  if (s.paragraph_count > 0)
    s.mean_words_per_paragraph = static_cast<double>(s.word_count) / static_cast<double>(s.paragraph_count);
  return s;
}

}  // namespace annonet
