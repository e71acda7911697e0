#pragma once

// Three-step annotation of daily-report paragraphs:
//
//   presence   -> does the paragraph contain any interaction? (yes/no)
//   relation   -> list of {Party1, Party2, Relation}
//   attribute  -> the same list with a Topic for each record
//
// followed by rule closure and deduplication. Every model call keeps its raw
// text. Failures are recorded on the paragraph and never abort a run.

#include <algorithm>
#include <atomic>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "annonet/codebook.hpp"
#include "annonet/core.hpp"
#include "annonet/corpus.hpp"
#include "annonet/error.hpp"
#include "annonet/gateway.hpp"
#include "annonet/output_parser.hpp"
#include "annonet/rules.hpp"

namespace annonet {

enum class Mode { DataRich, DataScarce };

inline std::string_view to_string(Mode m) noexcept { return m == Mode::DataRich ? "data_rich" : "data_scarce"; }

inline std::optional<Mode> parse_mode(std::string_view s) {
  const auto k = text::ascii_lower(text::trim(s));
  if (k == "data_rich" || k == "data-rich") return Mode::DataRich;
  if (k == "data_scarce" || k == "data-scarce") return Mode::DataScarce;
  return std::nullopt;
}

/// Everything a single step needs besides the paragraph.
struct StepContext {
  const Codebook& codebook;
  Gateway& gateway;
  GenerationConfig generation;
  /// In-context examples for this step (empty in data-rich mode).
  std::vector<AnnotatedExample> examples;
  double fuzzy_threshold = 0.9;
};

struct ModelCall {
  Subtask step = Subtask::Presence;
  std::string prompt_fingerprint;
  std::string raw;
};

struct PresenceResult {
  bool verdict = true;
  std::vector<ModelCall> calls;
  std::vector<std::string> warnings;
};

struct RelationResult {
  std::vector<Triplet> triplets;
  std::vector<ModelCall> calls;
  std::vector<std::string> warnings;
  std::optional<std::string> error;
};

struct AttributeResult {
  std::vector<Interaction> interactions;
  std::vector<ModelCall> calls;
  std::vector<std::string> warnings;
  std::optional<std::string> error;
};

/// Suffix appended to a prompt when the first answer could not be parsed.
inline std::string format_reminder(const Codebook& cb, Subtask s) {
  return "\n\nReminder: " + cb.format_instructions.at(s);
}

namespace detail {

inline ModelCall call_model(StepContext& ctx, Subtask step, const std::string& prompt) {
  ModelCall c{step, request_fingerprint(prompt, ctx.generation), {}};
  c.raw = ctx.gateway.complete(prompt, ctx.generation);
  return c;
}

}  // namespace detail

/// Gateway errors propagate. An answer that is still not yes/no after the
/// retry counts as yes.
inline PresenceResult detect_interactions(std::string_view paragraph, StepContext& ctx) {
  PresenceResult r;
  const auto prompt = assemble_prompt(Subtask::Presence, ctx.codebook, ctx.examples, paragraph).rendered;
  r.calls.push_back(detail::call_model(ctx, Subtask::Presence, prompt));
  auto verdict = parse_verdict(r.calls.back().raw);
  if (!verdict) {
    r.calls.push_back(detail::call_model(ctx, Subtask::Presence, prompt + format_reminder(ctx.codebook, Subtask::Presence)));
    verdict = parse_verdict(r.calls.back().raw);
  }
  if (!verdict) {
    r.warnings.push_back("presence verdict unparseable after retry; treated as yes");
    verdict = true;
  }
  r.verdict = *verdict;
  return r;
}

/// Gateway errors propagate; an unparseable answer after the retry sets
/// `error` and yields no triplets.
inline RelationResult extract_relations(std::string_view paragraph, StepContext& ctx) {
  RelationResult r;
  const auto prompt = assemble_prompt(Subtask::Relation, ctx.codebook, ctx.examples, paragraph).rendered;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto p = attempt == 0 ? prompt : prompt + format_reminder(ctx.codebook, Subtask::Relation);
    r.calls.push_back(detail::call_model(ctx, Subtask::Relation, p));
    try {
      auto parsed = to_triplets(parse_records(r.calls.back().raw), ctx.codebook.entity_space, ctx.fuzzy_threshold);
      r.triplets = std::move(parsed.triplets);
      r.warnings.insert(r.warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
      return r;
    } catch (const ParseError& e) {
      if (attempt == 1) r.error = std::string("relation step: ") + e.what();
    }
  }
  return r;
}

/// Attaches topics to `triplets` (never adds any). Triplets the model did not
/// label, or labelled with an unknown topic, keep a null topic.
inline AttributeResult predict_attributes(std::string_view paragraph, std::span<const Triplet> triplets,
                                          const ParagraphRef& ref, StepContext& ctx) {
  AttributeResult r;
  if (triplets.empty()) return r;

  std::vector<std::optional<TopicId>> topics(triplets.size());
  const auto prompt =
      assemble_prompt(Subtask::Attribute, ctx.codebook, ctx.examples, paragraph, triplets).rendered;
  std::optional<ParsedRecords> parsed;
  for (int attempt = 0; attempt < 2 && !parsed; ++attempt) {
    const auto p = attempt == 0 ? prompt : prompt + format_reminder(ctx.codebook, Subtask::Attribute);
    r.calls.push_back(detail::call_model(ctx, Subtask::Attribute, p));
    try {
      parsed = parse_records(r.calls.back().raw);
    } catch (const ParseError& e) {
      if (attempt == 1) r.error = std::string("attribute step: ") + e.what();
    }
  }

  if (parsed) {
    r.warnings = parsed->warnings;
    for (const auto& rec : parsed->records) {
      const auto rel = parse_relation(rec.relation);
      if (!rel) {
        r.warnings.push_back("attribute record with unknown relation '" + rec.relation + "' ignored");
        continue;
      }
      const Triplet t{EntityRef::from(normalize_entity(rec.party1, ctx.codebook.entity_space, ctx.fuzzy_threshold)),
                      EntityRef::from(normalize_entity(rec.party2, ctx.codebook.entity_space, ctx.fuzzy_threshold)),
                      *rel};
      const auto it = std::find(triplets.begin(), triplets.end(), t);
      if (it == triplets.end()) {
        r.warnings.push_back("attribute record for an unextracted interaction ignored");
        continue;
      }
      auto& slot = topics[static_cast<std::size_t>(it - triplets.begin())];
      if (slot) continue;
      if (!rec.topic || text::trim(*rec.topic).empty()) continue;
      if (const auto* def = ctx.codebook.topic_by_name(*rec.topic))
        slot = def->id;
      else
        r.warnings.push_back("unknown topic '" + *rec.topic + "'; left empty");
    }
  }

  for (std::size_t i = 0; i < triplets.size(); ++i)
    r.interactions.push_back({triplets[i].head, triplets[i].tail, triplets[i].relation, topics[i], ref, Derivation::Stated});
  return r;
}

// ---------------------------------------------------------------------------
// Corpus runs

struct ParagraphRecord {
  ParagraphRef ref;
  std::optional<bool> presence;  // unset when the presence call failed
  std::vector<ModelCall> calls;
  std::vector<Triplet> triplets;
  std::vector<Interaction> interactions;  // closed and deduplicated
  std::vector<std::string> warnings;
  std::vector<std::string> errors;
};

struct AnnotationRun {
  std::string run_id;
  Mode mode = Mode::DataScarce;
  std::string model_id;
  std::vector<ParagraphRecord> records;

  /// All interactions in corpus order.
  [[nodiscard]] std::vector<Interaction> interactions() const {
    std::vector<Interaction> out;
    for (const auto& r : records) out.insert(out.end(), r.interactions.begin(), r.interactions.end());
    return out;
  }
};

struct PipelineConfig {
  Mode mode = Mode::DataScarce;
  GenerationConfig generation;
  /// Example ids for data-scarce mode. Empty means every bank example.
  std::vector<std::string> example_ids;
  RuleConfig rules;
  double fuzzy_threshold = 0.9;
  int concurrency = 4;
  std::string run_id;
};

/// Examples of `subtask` used in `mode`. Unknown ids are an error.
inline std::vector<AnnotatedExample> select_examples(const Codebook& cb, const PipelineConfig& cfg, Subtask subtask) {
  std::vector<AnnotatedExample> out;
  if (cfg.mode == Mode::DataRich) return out;
  if (cfg.example_ids.empty()) {
    for (const auto& e : cb.example_bank)
      if (e.subtask == subtask) out.push_back(e);
    return out;
  }
  for (const auto& id : cfg.example_ids) {
    const auto* e = cb.find_example(id);
    if (!e) throw InvalidInput("unknown example id '" + id + "'");
    if (e->subtask == subtask) out.push_back(*e);
  }
  return out;
}

/// Content-derived id: same mode, model, examples and reports give the same id.
inline std::string default_run_id(const PipelineConfig& cfg, std::span<const Report> reports) {
  nlohmann::json key = {std::string(to_string(cfg.mode)), cfg.generation.model_id, cfg.example_ids};
  for (const auto& r : reports) key.push_back(r.report_id);
  return "run-" + sha256_hex(key.dump()).substr(0, 12);
}

namespace detail {

struct StepContexts {
  StepContext presence;
  StepContext relation;
  StepContext attribute;
};

inline void annotate_paragraph(const Paragraph& para, ParagraphRecord& rec, StepContexts& ctx, const RuleConfig& rules) {
  auto absorb = [&rec](auto& step) {
    rec.calls.insert(rec.calls.end(), step.calls.begin(), step.calls.end());
    rec.warnings.insert(rec.warnings.end(), step.warnings.begin(), step.warnings.end());
  };
  try {
    auto presence = detect_interactions(para.text, ctx.presence);
    absorb(presence);
    rec.presence = presence.verdict;
  } catch (const Error& e) {
    rec.errors.push_back(std::string("presence step: ") + e.what());
    return;
  }
  if (!*rec.presence) return;

  try {
    auto rel = extract_relations(para.text, ctx.relation);
    absorb(rel);
    if (rel.error) {
      rec.errors.push_back(*rel.error);
      return;
    }
    rec.triplets = std::move(rel.triplets);
  } catch (const Error& e) {
    rec.errors.push_back(std::string("relation step: ") + e.what());
    return;
  }
  if (rec.triplets.empty()) return;

  std::vector<Interaction> stated;
  try {
    auto attr = predict_attributes(para.text, rec.triplets, rec.ref, ctx.attribute);
    absorb(attr);
    if (attr.error) rec.errors.push_back(*attr.error);
    stated = std::move(attr.interactions);
  } catch (const Error& e) {
    rec.errors.push_back(std::string("attribute step: ") + e.what());
    for (const auto& t : rec.triplets) stated.push_back({t.head, t.tail, t.relation, std::nullopt, rec.ref, Derivation::Stated});
  }

  try {
    const auto closed = close_to_fixpoint(InteractionSet(stated.begin(), stated.end()), rules);
    const std::vector<Interaction> all(closed.begin(), closed.end());
    const auto unique = dedupe(all);
    rec.interactions.assign(unique.begin(), unique.end());
  } catch (const Error& e) {
    rec.errors.push_back(std::string("rule closure: ") + e.what());
    rec.interactions = std::move(stated);
  }
}

}  // namespace detail

/// Annotates every paragraph of every daily report. Paragraphs run
/// concurrently (bounded by `concurrency` and the gateway); records come back
/// in corpus order regardless of scheduling.
inline AnnotationRun annotate_corpus(std::span<const Report> reports, const Codebook& codebook, Gateway& gateway,
                                     const PipelineConfig& config) {
  if (config.rules.any_enabled() && codebook.coding_rules.empty())
    throw InvalidInput("rules are enabled but the codebook has no coding rules");
  if (config.concurrency < 1) throw InvalidInput("concurrency must be at least 1");
  config.generation.validate();

  AnnotationRun run;
  run.mode = config.mode;
  run.model_id = config.generation.model_id;
  run.run_id = config.run_id.empty() ? default_run_id(config, reports) : config.run_id;

  auto make_ctx = [&](Subtask s) {
    return StepContext{codebook, gateway, config.generation, select_examples(codebook, config, s), config.fuzzy_threshold};
  };
  detail::StepContexts ctx{make_ctx(Subtask::Presence), make_ctx(Subtask::Relation), make_ctx(Subtask::Attribute)};
  if (config.mode == Mode::DataScarce && ctx.presence.examples.empty() && ctx.relation.examples.empty() &&
      ctx.attribute.examples.empty())
    throw InvalidInput("data-scarce mode needs at least one example");

  std::vector<const Paragraph*> work;
  for (const auto& report : reports) {
    if (report.kind != ReportKind::Daily) continue;
    for (const auto& p : report.paragraphs) {
      run.records.push_back(ParagraphRecord{{report.report_id, p.index}, {}, {}, {}, {}, {}, {}});
      work.push_back(&p);
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++)
      detail::annotate_paragraph(*work[i], run.records[i], ctx, config.rules);
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(config.concurrency), work.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return run;
}

}  // namespace annonet
