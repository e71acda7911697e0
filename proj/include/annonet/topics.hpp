#pragma once

// Dynamic topic space. Topic words pulled from summary reports are embedded
// and clustered with k-means into the base space; later stages add words one
// at a time, either joining the most similar topic or opening a new one.
// Similarity is cosine on unit vectors throughout.
//
// Incremental assignment depends on word order, so each stage processes its
// words in sorted order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "annonet/codebook.hpp"
#include "annonet/core.hpp"
#include "annonet/corpus.hpp"
#include "annonet/error.hpp"
#include "annonet/gateway.hpp"
#include "annonet/text.hpp"

namespace annonet {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// L2-normalized mean. Throws if the mean is the zero vector.
inline Vec normalized_mean(std::span<const Vec> vs) {
  if (vs.empty()) throw InvalidInput("mean of no vectors");
  Vec m(vs.front().size(), 0.0);
  for (const auto& v : vs)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += v[i];
  double norm = 0.0;
  for (double& x : m) {
    x /= static_cast<double>(vs.size());
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw InvalidInput("cannot normalize a zero mean vector");
  for (double& x : m) x /= norm;
  return m;
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
  std::vector<std::size_t> assignment;  // cluster per point
  std::vector<Vec> centroids;
  int iterations = 0;
  double inertia = 0.0;  // sum of squared distances to assigned centroids
};

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t nearest(const Vec& p, const std::vector<Vec>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding, stopping when assignments settle
/// or after `max_iterations`. A cluster that empties is re-seeded with the
/// point farthest from its current centroid.
inline KMeansResult kmeans(std::span<const Vec> points, std::size_t k, std::uint64_t seed, int max_iterations = 100) {
  if (k == 0) throw InvalidInput("k must be positive");
  if (points.size() < k) throw InvalidInput("fewer points than clusters");
  const auto dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw InvalidInput("points have different dimensions");

  std::mt19937_64 rng(seed);
  KMeansResult r;
  r.centroids.push_back(points[static_cast<std::size_t>(detail::unit_uniform(rng) * static_cast<double>(points.size()))]);
  std::vector<double> d2(points.size());
  while (r.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = squared_distance(points[i], r.centroids[detail::nearest(points[i], r.centroids)]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = detail::unit_uniform(rng) * total;
      double acc = 0.0;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(detail::unit_uniform(rng) * static_cast<double>(points.size()));
    }
    r.centroids.push_back(points[pick]);
  }

  r.assignment.assign(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) r.assignment[i] = detail::nearest(points[i], r.centroids);
  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    std::vector<Vec> sums(k, Vec(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      ++counts[r.assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[r.assignment[i]][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) r.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = squared_distance(points[i], r.centroids[r.assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      r.centroids[c] = points[far];
      r.assignment[far] = c;
    }
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = detail::nearest(points[i], r.centroids);
      if (c != r.assignment[i]) {
        r.assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
  }
  r.iterations = std::min(r.iterations, max_iterations);
  for (std::size_t i = 0; i < points.size(); ++i) r.inertia += squared_distance(points[i], r.centroids[r.assignment[i]]);
  return r;
}

// ---------------------------------------------------------------------------
// Topic space

struct TopicMember {
  std::string word;
  Vec embedding;

  bool operator==(const TopicMember&) const = default;
};

struct Topic {
  TopicId id;
  std::string name;
  std::string description;
  std::vector<TopicMember> members;
  Vec centroid;
  int stage_added = 1;
  bool human_revised = false;
  int revisions = 0;

  void recompute_centroid() {
    std::vector<Vec> vs;
    vs.reserve(members.size());
    for (const auto& m : members) vs.push_back(m.embedding);
    centroid = normalized_mean(vs);
  }

  /// Smallest cosine between a member and the centroid.
  [[nodiscard]] double min_member_similarity() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& w : members) m = std::min(m, dot(w.embedding, centroid));
    return m;
  }

  bool operator==(const Topic&) const = default;
};

struct TopicSpaceConfig {
  std::size_t k = 30;
  std::uint64_t seed = 0;

  bool operator==(const TopicSpaceConfig&) const = default;
};

struct TopicSpace {
  int version = 1;
  int revision = 0;
  std::size_t embedding_dim = 0;
  TopicSpaceConfig config;
  std::vector<Topic> topics;

  [[nodiscard]] const Topic* find(const TopicId& id) const {
    for (const auto& t : topics)
      if (t.id == id) return &t;
    return nullptr;
  }

  [[nodiscard]] Topic* find(const TopicId& id) {
    for (auto& t : topics)
      if (t.id == id) return &t;
    return nullptr;
  }

  [[nodiscard]] bool contains_word(std::string_view w) const {
    for (const auto& t : topics)
      for (const auto& m : t.members)
        if (m.word == w) return true;
    return false;
  }

  [[nodiscard]] std::size_t member_count() const {
    std::size_t n = 0;
    for (const auto& t : topics) n += t.members.size();
    return n;
  }

  /// Next unused id of the form T001, T002, ...
  [[nodiscard]] TopicId next_id() const {
    int max_n = 0;
    for (const auto& t : topics)
      if (t.id.value.size() > 1 && t.id.value[0] == 'T') max_n = std::max(max_n, std::atoi(t.id.value.c_str() + 1));
    char buf[16];
    std::snprintf(buf, sizeof buf, "T%03d", max_n + 1);
    return TopicId{buf};
  }

  /// Label space for the attribute step.
  [[nodiscard]] std::vector<TopicDefinition> definitions() const {
    std::vector<TopicDefinition> out;
    for (const auto& t : topics) out.push_back({t.id, t.name, t.description});
    return out;
  }

  /// Checks dimensions, non-empty membership, unique names and ids, and that
  /// every centroid matches its members within `tol`.
  void validate(double tol = 1e-9) const {
    std::set<std::string> names, ids;
    for (const auto& t : topics) {
      if (t.members.empty()) throw ValidationError("topic " + t.id.value + " has no members");
      if (!ids.insert(t.id.value).second) throw ValidationError("duplicate topic id " + t.id.value);
      if (!names.insert(text::ascii_lower(t.name)).second) throw ValidationError("duplicate topic name '" + t.name + "'");
      if (t.centroid.size() != embedding_dim) throw ValidationError("topic " + t.id.value + " centroid has the wrong dimension");
      for (const auto& m : t.members)
        if (m.embedding.size() != embedding_dim) throw ValidationError("member '" + m.word + "' has the wrong dimension");
      Topic copy = t;
      copy.recompute_centroid();
      for (std::size_t i = 0; i < embedding_dim; ++i)
        if (std::abs(copy.centroid[i] - t.centroid[i]) > tol)
          throw ValidationError("topic " + t.id.value + " centroid does not match its members");
    }
  }

  bool operator==(const TopicSpace&) const = default;
};

struct TopicWordResult {
  std::vector<std::string> words;
  std::vector<std::string> warnings;
};

inline std::string topic_word_prompt(const Report& report) {
  std::string body;
  for (const auto& p : report.paragraphs) body += (body.empty() ? "" : "\n\n") + p.text;
  return "### Task Instruction\nList the negotiation topics discussed in the following summary report of a climate "
         "negotiation meeting. Use short topic words or phrases such as \"finance\" or \"adaptation\".\n\n"
         "### Format Instruction\nAnswer with a comma-separated list of topic words and nothing else.\n\n"
         "### Report\n" +
         body;
}

/// Splits a comma/newline separated answer into lower-cased topic words.
inline std::vector<std::string> parse_topic_words(std::string_view raw) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::string_view w = text::trim(cur);
    while (!w.empty() && (w.front() == '-' || w.front() == '*' || w.front() == '.' ||
                          std::isdigit(static_cast<unsigned char>(w.front()))))
      w = text::trim(w.substr(1));
    while (!w.empty() && (w.back() == '.' || w.back() == ';')) w.remove_suffix(1);
    auto s = text::collapse_whitespace(text::ascii_lower(text::trim(w)));
    if (!s.empty()) out.push_back(std::move(s));
    cur.clear();
  };
  for (char c : raw) {
    if (c == ',' || c == '\n' || c == ';')
      flush();
    else
      cur += c;
  }
  flush();
  return out;
}

/// One model call per summary report; words are lower-cased and kept in
/// first-seen order without duplicates. Failed reports are skipped with a
/// warning.
inline TopicWordResult extract_topic_words(std::span<const Report> reports, Gateway& gateway,
                                           const GenerationConfig& gen) {
  TopicWordResult r;
  std::set<std::string> seen;
  for (const auto& report : reports) {
    if (report.kind != ReportKind::Summary) {
      r.warnings.push_back(report.report_id + ": not a summary report; skipped");
      continue;
    }
    try {
      for (auto& w : parse_topic_words(gateway.complete(topic_word_prompt(report), gen)))
        if (seen.insert(w).second) r.words.push_back(std::move(w));
    } catch (const Error& e) {
      r.warnings.push_back(report.report_id + ": " + e.what());
    }
  }
  return r;
}

inline std::string topic_naming_prompt(std::span<const std::string> words) {
  return "### Task Instruction\nThe following topic words from climate negotiation reports form one topic. Give the "
         "topic a short name and a one-sentence description.\n\n"
         "### Format Instruction\nAnswer with a JSON object {\"name\": ..., \"description\": ...}.\n\n"
         "### Topic Words\n" +
         nlohmann::json(std::vector<std::string>(words.begin(), words.end())).dump();
}

namespace detail {

/// Name and description from the model, falling back to the member words.
inline std::pair<std::string, std::string> name_topic(std::span<const std::string> words, Gateway& gateway,
                                                      const GenerationConfig& gen, std::vector<std::string>& warnings) {
  std::string fallback;
  for (std::size_t i = 0; i < words.size() && i < 3; ++i) fallback += (i ? ", " : "") + words[i];
  try {
    const auto raw = gateway.complete(topic_naming_prompt(words), gen);
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open != std::string::npos && close != std::string::npos && close > open) {
      const auto j = nlohmann::json::parse(raw.substr(open, close - open + 1), nullptr, false);
      if (j.is_object() && j.contains("name") && j["name"].is_string() && !text::trim(j["name"].get<std::string>()).empty())
        return {std::string(text::trim(j["name"].get<std::string>())), j.value("description", std::string{})};
    }
    warnings.push_back("topic naming answer unparseable; using member words");
  } catch (const Error& e) {
    warnings.push_back(std::string("topic naming failed: ") + e.what());
  }
  return {fallback, ""};
}

/// Appends " (2)", " (3)", ... until the name is unused (ignoring case).
inline std::string unique_name(const TopicSpace& space, std::string name) {
  auto taken = [&](const std::string& n) {
    for (const auto& t : space.topics)
      if (text::iequals(t.name, n)) return true;
    return false;
  };
  if (!taken(name)) return name;
  for (int i = 2;; ++i) {
    auto candidate = name + " (" + std::to_string(i) + ")";
    if (!taken(candidate)) return candidate;
  }
}

}  // namespace detail

struct BuildResult {
  TopicSpace space;
  std::vector<std::string> warnings;
};

/// Embeds `words`, clusters them into k topics and names each topic.
/// Clusters are numbered by their first member in input order.
inline BuildResult build_base_space(std::span<const std::string> words, const TopicSpaceConfig& config,
                                    Gateway& gateway, const GenerationConfig& gen) {
  if (config.k == 0) throw InvalidInput("k must be positive");
  if (words.size() < config.k)
    throw InvalidInput("need at least k=" + std::to_string(config.k) + " topic words, got " + std::to_string(words.size()));
  const auto vecs = gateway.embed(std::vector<std::string>(words.begin(), words.end()));
  const auto km = kmeans(vecs, config.k, config.seed);

  std::vector<std::size_t> order;  // cluster ids by first appearance
  for (auto c : km.assignment)
    if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);

  BuildResult r;
  r.space.version = 1;
  r.space.config = config;
  r.space.embedding_dim = vecs.front().size();
  for (auto c : order) {
    Topic t;
    t.id = r.space.next_id();
    std::vector<std::string> member_words;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (km.assignment[i] != c) continue;
      t.members.push_back({words[i], vecs[i]});
      member_words.push_back(words[i]);
    }
    t.recompute_centroid();
    auto [name, desc] = detail::name_topic(member_words, gateway, gen, r.warnings);
    t.name = detail::unique_name(r.space, std::move(name));
    t.description = std::move(desc);
    t.stage_added = 1;
    r.space.topics.push_back(std::move(t));
  }
  return r;
}

struct Assignment {
  TopicId topic;
  bool created = false;
};

/// Adds `word` to the most similar topic when it is at least as similar to
/// that centroid as the topic's least similar member; otherwise opens a new
/// topic for it. Similarity ties go to the lowest topic id.
inline Assignment assign_or_create(const std::string& word, TopicSpace& space, Gateway& gateway,
                                   const GenerationConfig& gen, std::vector<std::string>* warnings = nullptr) {
  if (text::trim(word).empty()) throw InvalidInput("assign_or_create: empty word");
  if (space.topics.empty()) throw InvalidInput("assign_or_create: empty topic space");
  auto v = gateway.embed({word}).front();
  if (v.size() != space.embedding_dim)
    throw InvalidInput("embedding dimension " + std::to_string(v.size()) + " does not match the topic space (" +
                       std::to_string(space.embedding_dim) + ")");

  Topic* best = nullptr;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (auto& t : space.topics) {
    const double s = dot(v, t.centroid);
    if (s > best_sim || (s == best_sim && best != nullptr && t.id < best->id)) {
      best_sim = s;
      best = &t;
    }
  }
  if (best_sim >= best->min_member_similarity()) {
    best->members.push_back({word, std::move(v)});
    best->recompute_centroid();
    return {best->id, false};
  }

  Topic t;
  t.id = space.next_id();
  t.members.push_back({word, std::move(v)});
  t.recompute_centroid();
  std::vector<std::string> scratch;
  const std::vector<std::string> member_words{word};
  auto [name, desc] = detail::name_topic(member_words, gateway, gen, warnings ? *warnings : scratch);
  t.name = detail::unique_name(space, std::move(name));
  t.description = std::move(desc);
  t.stage_added = space.version;
  space.topics.push_back(std::move(t));
  return {space.topics.back().id, true};
}

struct StageResult {
  TopicSpace space;
  std::vector<std::string> new_words;  // sorted, words already in the space removed
  std::vector<Assignment> assignments;
  std::vector<std::string> warnings;
};

/// Next version of `space`: words from `reports` not yet in the space are
/// assigned in sorted order. Per-word failures are warnings.
inline StageResult advance_stage(const TopicSpace& space, std::span<const Report> reports, Gateway& gateway,
                                 const GenerationConfig& gen) {
  StageResult r;
  r.space = space;
  r.space.version = space.version + 1;
  r.space.revision = 0;
  auto extracted = extract_topic_words(reports, gateway, gen);
  r.warnings = std::move(extracted.warnings);
  for (auto& w : extracted.words)
    if (!space.contains_word(w)) r.new_words.push_back(std::move(w));
  std::sort(r.new_words.begin(), r.new_words.end());
  for (const auto& w : r.new_words) {
    try {
      r.assignments.push_back(assign_or_create(w, r.space, gateway, gen, &r.warnings));
    } catch (const Error& e) {
      r.warnings.push_back("word '" + w + "': " + e.what());
    }
  }
  return r;
}

/// Human revision of a topic's name and description. Membership is unchanged.
inline TopicSpace revise_topic(const TopicSpace& space, const TopicId& id, std::string name, std::string description) {
  TopicSpace out = space;
  Topic* t = out.find(id);
  if (!t) throw InvalidInput("unknown topic id '" + id.value + "'");
  name = std::string(text::trim(name));
  if (name.empty()) throw ValidationError("topic name must not be empty");
  for (const auto& other : out.topics)
    if (other.id != id && text::iequals(other.name, name))
      throw ValidationError("topic name '" + name + "' is already used by " + other.id.value);
  t->name = std::move(name);
  t->description = std::move(description);
  t->human_revised = true;
  ++t->revisions;
  ++out.revision;
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: {"format": "annonet-topic-space", "versions": [...]}, the last
// entry being the active space. Earlier entries are never modified.

inline nlohmann::ordered_json to_json(const TopicSpace& s) {
  nlohmann::ordered_json j;
  j["version"] = s.version;
  j["revision"] = s.revision;
  j["embedding_dim"] = s.embedding_dim;
  j["config"] = {{"k", s.config.k}, {"seed", s.config.seed}};
  auto topics = nlohmann::ordered_json::array();
  for (const auto& t : s.topics) {
    nlohmann::ordered_json tj;
    tj["id"] = t.id.value;
    tj["name"] = t.name;
    tj["description"] = t.description;
    tj["stage_added"] = t.stage_added;
    tj["human_revised"] = t.human_revised;
    tj["revisions"] = t.revisions;
    auto members = nlohmann::ordered_json::array();
    for (const auto& m : t.members) members.push_back({{"word", m.word}, {"embedding", m.embedding}});
    tj["members"] = std::move(members);
    tj["centroid"] = t.centroid;
    topics.push_back(std::move(tj));
  }
  j["topics"] = std::move(topics);
  return j;
}

inline TopicSpace topic_space_from_json(const nlohmann::json& j) {
  try {
    TopicSpace s;
    s.version = j.at("version").get<int>();
    s.revision = j.value("revision", 0);
    s.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    s.config.k = j.at("config").at("k").get<std::size_t>();
    s.config.seed = j.at("config").at("seed").get<std::uint64_t>();
    for (const auto& tj : j.at("topics")) {
      Topic t;
      t.id = TopicId{tj.at("id").get<std::string>()};
      t.name = tj.at("name").get<std::string>();
      t.description = tj.value("description", std::string{});
      t.stage_added = tj.value("stage_added", 1);
      t.human_revised = tj.value("human_revised", false);
      t.revisions = tj.value("revisions", 0);
      for (const auto& m : tj.at("members")) t.members.push_back({m.at("word").get<std::string>(), m.at("embedding").get<Vec>()});
      t.centroid = tj.at("centroid").get<Vec>();
      s.topics.push_back(std::move(t));
    }
    s.validate(1e-6);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed topic space: ") + e.what());
  }
}

class TopicSpaceHistory {
public:
  TopicSpaceHistory() = default;
  explicit TopicSpaceHistory(TopicSpace first) { versions_.push_back(std::move(first)); }

  void push(TopicSpace next) {
    next.validate();
    versions_.push_back(std::move(next));
  }

  [[nodiscard]] bool empty() const noexcept { return versions_.empty(); }
  [[nodiscard]] const std::vector<TopicSpace>& versions() const noexcept { return versions_; }

  [[nodiscard]] const TopicSpace& active() const {
    if (versions_.empty()) throw InvalidInput("topic space history is empty");
    return versions_.back();
  }

  [[nodiscard]] std::string serialize() const {
    nlohmann::ordered_json j;
    j["format"] = "annonet-topic-space";
    auto arr = nlohmann::ordered_json::array();
    for (const auto& v : versions_) arr.push_back(to_json(v));
    j["versions"] = std::move(arr);
    return j.dump(1) + "\n";
  }

  static TopicSpaceHistory parse(std::string_view content) {
    const auto j = nlohmann::json::parse(content.begin(), content.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("format", "") != "annonet-topic-space" || !j.contains("versions"))
      throw ValidationError("not a topic space file");
    TopicSpaceHistory h;
    for (const auto& v : j.at("versions")) h.versions_.push_back(topic_space_from_json(v));
    if (h.versions_.empty()) throw ValidationError("topic space file has no versions");
    return h;
  }

  static TopicSpaceHistory load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read topic space " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

private:
  std::vector<TopicSpace> versions_;
};

}  // namespace annonet
