#pragma once

// Scoring against gold annotations and quote alignment.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "annonet/core.hpp"
#include "annonet/corpus.hpp"
#include "annonet/error.hpp"
#include "annonet/text.hpp"

namespace annonet {

struct PrecisionRecall {
  double precision = 1.0;
  double recall = 1.0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t matched = 0;
};

/// Set-based precision/recall. Precision is 1 for an empty prediction and
/// recall is 1 for an empty gold set.
template <typename T>
PrecisionRecall triplet_prf(const std::set<T>& pred, const std::set<T>& gold) {
  PrecisionRecall r;
  r.predicted = pred.size();
  r.gold = gold.size();
  for (const auto& p : pred) r.matched += gold.contains(p) ? 1 : 0;
  r.precision = pred.empty() ? 1.0 : static_cast<double>(r.matched) / static_cast<double>(pred.size());
  r.recall = gold.empty() ? 1.0 : static_cast<double>(r.matched) / static_cast<double>(gold.size());
  return r;
}

/// A triplet pinned to its paragraph; the unit matched by triplet_prf.
struct ScopedTriplet {
  ParagraphRef paragraph;
  Triplet triplet;

  auto operator<=>(const ScopedTriplet&) const = default;
};

inline std::set<ScopedTriplet> scoped_triplets(std::span<const Interaction> xs) {
  std::set<ScopedTriplet> out;
  for (const auto& x : xs) out.insert({x.paragraph, {x.head, x.tail, x.relation}});
  return out;
}

struct LabelScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // occurrences in gold
};

template <typename L>
struct AttributeMetrics {
  double accuracy = 1.0;
  /// Mean F1 over the labels that occur in gold.
  double macro_f1 = 1.0;
  std::map<L, LabelScore> per_label;
};

/// Accuracy and macro F1 of aligned label lists. Empty lists score 1.0.
template <typename L>
AttributeMetrics<L> attribute_metrics(const std::vector<L>& pred, const std::vector<L>& gold) {
  if (pred.size() != gold.size()) throw InvalidInput("attribute_metrics: prediction and gold lengths differ");
  AttributeMetrics<L> m;
  if (gold.empty()) return m;
  std::size_t correct = 0;
  std::map<L, std::size_t> tp, pred_count;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++m.per_label[gold[i]].support;
    ++pred_count[pred[i]];
    if (pred[i] == gold[i]) {
      ++correct;
      ++tp[gold[i]];
    }
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  double sum = 0.0;
  for (auto& [label, s] : m.per_label) {
    const double t = static_cast<double>(tp[label]);
    const auto pc = pred_count[label];
    s.precision = pc == 0 ? 0.0 : t / static_cast<double>(pc);
    s.recall = t / static_cast<double>(s.support);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    sum += s.f1;
  }
  m.macro_f1 = sum / static_cast<double>(m.per_label.size());
  return m;
}

/// Cohen's kappa for two annotators over the same items.
template <typename L>
double cohen_kappa(const std::vector<L>& a, const std::vector<L>& b) {
  if (a.size() != b.size()) throw InvalidInput("cohen_kappa: annotation lengths differ");
  if (a.empty()) throw InvalidInput("cohen_kappa: no items");
  const double n = static_cast<double>(a.size());
  std::map<L, double> ma, mb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[a[i]] += 1.0;
    mb[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double po = agree / n;
  double pe = 0.0;
  for (const auto& [label, ca] : ma)
    if (auto it = mb.find(label); it != mb.end()) pe += (ca / n) * (it->second / n);
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

// ---------------------------------------------------------------------------
// Quote alignment

enum class QuoteMatchStatus { Matched, Ambiguous, NoMatch };

struct QuoteMatch {
  QuoteMatchStatus status = QuoteMatchStatus::NoMatch;
  std::vector<std::size_t> candidates;  // paragraph indices above threshold
  double best_overlap = 0.0;

  [[nodiscard]] std::optional<std::size_t> index() const {
    if (status != QuoteMatchStatus::Matched) return std::nullopt;
    return candidates.front();
  }
};

/// Share of the quote's word tokens (as a multiset) that also occur in
/// `paragraph`.
inline double word_overlap(std::string_view quote, std::string_view paragraph) {
  const auto q = text::word_tokens(quote);
  if (q.empty()) return 0.0;
  std::map<std::string, std::size_t> avail;
  for (auto& w : text::word_tokens(paragraph)) ++avail[w];
  std::size_t hit = 0;
  for (const auto& w : q) {
    auto it = avail.find(w);
    if (it != avail.end() && it->second > 0) {
      --it->second;
      ++hit;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(q.size());
}

/// Paragraphs whose overlap is strictly above `threshold`.
inline QuoteMatch quote_to_paragraph(std::string_view quote, const Report& report, double threshold = 0.9) {
  if (text::word_tokens(quote).empty()) throw InvalidInput("quote_to_paragraph: empty quote");
  QuoteMatch m;
  for (const auto& p : report.paragraphs) {
    const double o = word_overlap(quote, p.text);
    m.best_overlap = std::max(m.best_overlap, o);
    if (o > threshold) m.candidates.push_back(p.index);
  }
  if (m.candidates.size() == 1)
    m.status = QuoteMatchStatus::Matched;
  else if (m.candidates.size() > 1)
    m.status = QuoteMatchStatus::Ambiguous;
  return m;
}

// ---------------------------------------------------------------------------
// Whole-file evaluation

struct MetricsReport {
  PrecisionRecall relations;
  AttributeMetrics<std::string> attributes;
  std::size_t attribute_items = 0;
  std::map<ParagraphRef, PrecisionRecall> per_paragraph;
};

/// Label used for a missing topic in attribute scoring.
inline constexpr std::string_view kNoTopicLabel = "(none)";

/// Relation P/R over paragraph-scoped triplets, and topic accuracy/macro F1
/// over gold interactions whose triplet was also predicted. When a triplet
/// carries several topics the smallest non-empty one is compared.
inline MetricsReport evaluate_annotations(std::span<const Interaction> pred, std::span<const Interaction> gold) {
  MetricsReport rep;
  const auto ps = scoped_triplets(pred);
  const auto gs = scoped_triplets(gold);
  rep.relations = triplet_prf(ps, gs);

  std::map<ParagraphRef, std::pair<std::set<ScopedTriplet>, std::set<ScopedTriplet>>> by_para;
  for (const auto& t : ps) by_para[t.paragraph].first.insert(t);
  for (const auto& t : gs) by_para[t.paragraph].second.insert(t);
  for (const auto& [ref, sets] : by_para) rep.per_paragraph[ref] = triplet_prf(sets.first, sets.second);

  auto topic_of = [](std::span<const Interaction> xs) {
    std::map<ScopedTriplet, std::string> out;
    for (const auto& x : xs) {
      const ScopedTriplet k{x.paragraph, {x.head, x.tail, x.relation}};
      const std::string label = x.topic ? x.topic->value : std::string(kNoTopicLabel);
      auto [it, inserted] = out.emplace(k, label);
      const bool better = it->second == kNoTopicLabel ? x.topic.has_value() : (x.topic && label < it->second);
      if (!inserted && better) it->second = label;
    }
    return out;
  };
  const auto pt = topic_of(pred);
  const auto gt = topic_of(gold);
  std::vector<std::string> pl, gl;
  for (const auto& [k, label] : gt) {
    auto it = pt.find(k);
    if (it == pt.end()) continue;
    gl.push_back(label);
    pl.push_back(it->second);
  }
  rep.attribute_items = gl.size();
  rep.attributes = attribute_metrics(pl, gl);
  return rep;
}

}  // namespace annonet
