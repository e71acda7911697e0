// annonet command-line entry point.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags,
// missing files, inconsistent configuration). Errors are printed to stderr
// as one JSON object: {"error": <kind>, "message": <text>}.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "annonet.hpp"
#include "annonet/http_transport.hpp"

namespace fs = std::filesystem;
using namespace annonet;
using nlohmann::ordered_json;

namespace {

/// Configuration problem detected after flag parsing; exits with status 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

void print_error(std::string_view kind, std::string_view message) {
  std::cerr << ordered_json{{"error", kind}, {"message", message}}.dump() << "\n";
}

void print_warnings(const std::vector<std::string>& ws) {
  for (const auto& w : ws) std::cerr << "warning: " << w << "\n";
}

std::string pct(double f, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, f * 100.0);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared option groups

struct CorpusOpts {
  std::string input;
  std::vector<std::string> frameworks;

  void add(CLI::App* cmd, bool required = true) {
    auto* o = cmd->add_option("--input", input, "Directory of report files")->check(CLI::ExistingDirectory);
    if (required) o->required();
    cmd->add_option("--framework", frameworks, "Keep only reports of these frameworks (repeatable)");
  }

  [[nodiscard]] std::vector<Report> load() const {
    auto loaded = load_corpus(input, ParseOptions{default_boilerplate()});
    print_warnings(loaded.warnings);
    if (frameworks.empty()) return loaded.reports;
    return filter_corpus(loaded.reports, {frameworks.begin(), frameworks.end()});
  }
};

struct BackendOpts {
  std::string replay;
  std::string endpoint;
  std::string api_key_env = "ANNONET_API_KEY";
  std::string record;
  std::string model = GenerationConfig{}.model_id;
  std::string embedding_model = EmbeddingConfig{}.model_id;
  int max_length = GenerationConfig{}.max_length;
  int concurrency = 4;

  void add(CLI::App* cmd) {
    cmd->add_option("--replay", replay, "Serve model calls from this replay file (offline)")->check(CLI::ExistingFile);
    cmd->add_option("--endpoint", endpoint, "Base URL of an OpenAI-compatible API (live mode)");
    cmd->add_option("--api-key-env", api_key_env, "Environment variable holding the API key")->capture_default_str();
    cmd->add_option("--record", record, "Append every live request/response to this replay file");
    cmd->add_option("--model", model, "Generation model id")->capture_default_str();
    cmd->add_option("--embedding-model", embedding_model, "Embedding model id")->capture_default_str();
    cmd->add_option("--max-length", max_length, "Maximum generated tokens")->capture_default_str();
    cmd->add_option("--concurrency", concurrency, "Maximum requests in flight")->check(CLI::Range(1, 64))->capture_default_str();
  }

  [[nodiscard]] GenerationConfig generation() const {
    GenerationConfig g;
    g.model_id = model;
    g.max_length = max_length;
    return g;
  }

  [[nodiscard]] ordered_json describe() const {
    return {{"backend", replay.empty() ? "live" : "replay"},
            {"replay", replay},
            {"endpoint", endpoint},
            {"model", model},
            {"embedding_model", embedding_model},
            {"max_length", max_length},
            {"concurrency", concurrency}};
  }
};

/// Owns the backend chain (replay or live, optionally recorded) and the gateway.
class Services {
public:
  explicit Services(const BackendOpts& o) {
    if (!o.replay.empty() && !o.endpoint.empty()) throw UsageError("--replay and --endpoint are mutually exclusive");
    if (!o.replay.empty() && !o.record.empty()) throw UsageError("--record only applies to live calls");
    if (!o.replay.empty()) {
      base_ = std::make_unique<ReplayBackend>(std::make_shared<const ReplayStore>(ReplayStore::load(o.replay)));
    } else {
      EndpointConfig ep;
      if (!o.endpoint.empty()) ep.base_url = o.endpoint;
      ep.api_key_env = o.api_key_env;
      auto live = std::make_unique<LiveBackend>(ep, std::make_unique<HttplibTransport>(ep.base_url));
      if (!live->has_api_key())
        std::cerr << "warning: " << ep.api_key_env << " is not set; sending requests without credentials\n";
      base_ = std::move(live);
    }
    Backend* top = base_.get();
    if (!o.record.empty()) {
      recorder_ = std::make_unique<RecordingBackend>(*base_, o.record);
      top = recorder_.get();
    }
    EmbeddingConfig emb;
    emb.model_id = o.embedding_model;
    gateway_ = std::make_unique<Gateway>(*top, o.concurrency, emb);
  }

  Gateway& gateway() { return *gateway_; }

  void report() const {
    if (recorder_) print_warnings(recorder_->warnings());
  }

private:
  std::unique_ptr<Backend> base_;
  std::unique_ptr<RecordingBackend> recorder_;
  std::unique_ptr<Gateway> gateway_;
};

fs::path manifest_path(const std::string& override_path, const fs::path& primary_output, const std::string& command) {
  if (!override_path.empty()) return override_path;
  if (!primary_output.empty()) {
    auto p = primary_output;
    p += ".manifest.json";
    return p;
  }
  return "annonet-" + command + ".manifest.json";
}

/// Inclusive year ranges, e.g. "1995-2013,2014-2018,2019-2024".
std::vector<std::pair<int, int>> parse_stages(const std::string& ranges) {
  std::vector<std::pair<int, int>> out;
  for (const auto& part : text::split(ranges, ',')) {
    const auto bounds = text::split(text::trim(part), '-');
    if (bounds.size() != 2) throw UsageError("bad stage range '" + std::string(part) + "'");
    try {
      const int a = std::stoi(std::string(text::trim(bounds[0])));
      const int b = std::stoi(std::string(text::trim(bounds[1])));
      if (a > b) throw UsageError("stage range '" + std::string(part) + "' is reversed");
      out.emplace_back(a, b);
    } catch (const std::logic_error&) {
      throw UsageError("bad stage range '" + std::string(part) + "'");
    }
  }
  if (out.empty()) throw UsageError("no stages given");
  return out;
}

std::vector<Report> summaries_in(const std::vector<Report>& reports, std::pair<int, int> years) {
  std::vector<Report> out;
  for (const auto& r : reports)
    if (r.kind == ReportKind::Summary && r.year() >= years.first && r.year() <= years.second) out.push_back(r);
  return out;
}

ordered_json topic_space_summary(const TopicSpace& s) {
  ordered_json topics = ordered_json::array();
  for (const auto& t : s.topics)
    topics.push_back({{"id", t.id.value}, {"name", t.name}, {"members", t.members.size()}, {"stage_added", t.stage_added}});
  return {{"version", s.version}, {"revision", s.revision}, {"topics", topics}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"annonet: LLM-assisted annotation of negotiation reports"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  std::string manifest_override;
  app.add_option("--manifest", manifest_override, "Where to write the run manifest");

  std::function<void()> run;

  // ingest ------------------------------------------------------------------
  CorpusOpts ingest_corpus;
  std::string ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Parse and validate a report directory");
  ingest_corpus.add(ingest);
  ingest->add_option("--out", ingest_out, "Write corpus statistics as JSON here");
  ingest->callback([&] {
    run = [&] {
      const auto reports = ingest_corpus.load();
      const auto s = corpus_stats(reports);
      ordered_json per_year = ordered_json::object();
      for (const auto& [y, n] : s.reports_per_year) per_year[std::to_string(y)] = n;
      const ordered_json j{{"reports", s.report_count},
                           {"paragraphs", s.paragraph_count},
                           {"words", s.word_count},
                           {"mean_paragraphs_per_report", s.mean_paragraphs_per_report},
                           {"mean_words_per_paragraph", s.mean_words_per_paragraph},
                           {"reports_per_year", per_year}};
      std::cout << j.dump(2) << "\n";
      Manifest m{"ingest", {{"input", ingest_corpus.input}, {"frameworks", ingest_corpus.frameworks}}, {}, {}, {}, {}};
      if (!ingest_out.empty()) {
        atomic_write(ingest_out, j.dump(2) + "\n");
        m.outputs.push_back(ingest_out);
      }
      atomic_write(manifest_path(manifest_override, ingest_out, "ingest"), m.serialize());
    };
  });

  // topics --------------------------------------------------------------------
  auto* topics = app.add_subcommand("topics", "Build and evolve the topic space");
  topics->require_subcommand(1);
  std::string stages_spec = "1995-2013,2014-2018,2019-2024";
  std::string topics_file;

  CorpusOpts tb_corpus;
  BackendOpts tb_backend;
  std::size_t tb_k = 30;
  std::uint64_t tb_seed = 0;
  auto* tbuild = topics->add_subcommand("build", "Cluster stage-1 topic words into the base space");
  tb_corpus.add(tbuild);
  tb_backend.add(tbuild);
  tbuild->add_option("--k", tb_k, "Number of base topics")->check(CLI::PositiveNumber)->capture_default_str();
  tbuild->add_option("--seed", tb_seed, "k-means seed")->capture_default_str();
  tbuild->add_option("--stages", stages_spec, "Stage year ranges")->capture_default_str();
  tbuild->add_option("--out", topics_file, "Topic space file to create")->required();
  tbuild->callback([&] {
    run = [&] {
      const auto stages = parse_stages(stages_spec);
      const auto reports = summaries_in(tb_corpus.load(), stages.front());
      Services svc(tb_backend);
      const auto gen = tb_backend.generation();
      auto words = extract_topic_words(reports, svc.gateway(), gen);
      print_warnings(words.warnings);
      if (words.words.size() < tb_k)
        throw UsageError("only " + std::to_string(words.words.size()) + " topic words for k=" + std::to_string(tb_k));
      auto built = build_base_space(words.words, {tb_k, tb_seed}, svc.gateway(), gen);
      print_warnings(built.warnings);
      TopicSpaceHistory h(built.space);
      atomic_write(topics_file, h.serialize());
      std::cout << topic_space_summary(built.space).dump(2) << "\n";
      svc.report();
      Manifest m{"topics build",
                 {{"input", tb_corpus.input}, {"k", tb_k}, {"seed", tb_seed}, {"stages", stages_spec}, {"gateway", tb_backend.describe()}},
                 {},
                 {topics_file},
                 svc.gateway().fingerprints(),
                 {{"topic_space_version", built.space.version}}};
      if (!tb_backend.replay.empty()) m.inputs.push_back(tb_backend.replay);
      atomic_write(manifest_path(manifest_override, topics_file, "topics-build"), m.serialize());
    };
  });

  CorpusOpts ta_corpus;
  BackendOpts ta_backend;
  int ta_stage = 2;
  auto* tadv = topics->add_subcommand("advance", "Add the topic words of a later stage");
  ta_corpus.add(tadv);
  ta_backend.add(tadv);
  tadv->add_option("--stage", ta_stage, "Stage number (2 or later)")->required()->check(CLI::Range(2, 1000));
  tadv->add_option("--stages", stages_spec, "Stage year ranges")->capture_default_str();
  tadv->add_option("--topics", topics_file, "Topic space file to extend")->required()->check(CLI::ExistingFile);
  tadv->callback([&] {
    run = [&] {
      const auto stages = parse_stages(stages_spec);
      if (static_cast<std::size_t>(ta_stage) > stages.size())
        throw UsageError("stage " + std::to_string(ta_stage) + " is not configured");
      auto history = TopicSpaceHistory::load(topics_file);
      if (history.active().version != ta_stage - 1)
        throw UsageError("topic space is at version " + std::to_string(history.active().version) + "; cannot apply stage " +
                         std::to_string(ta_stage));
      const auto reports = summaries_in(ta_corpus.load(), stages[static_cast<std::size_t>(ta_stage - 1)]);
      Services svc(ta_backend);
      auto stage = advance_stage(history.active(), reports, svc.gateway(), ta_backend.generation());
      print_warnings(stage.warnings);
      history.push(stage.space);
      atomic_write(topics_file, history.serialize());
      std::size_t created = 0;
      for (const auto& a : stage.assignments) created += a.created ? 1 : 0;
      std::cout << "stage " << ta_stage << ": " << stage.new_words.size() << " new words, " << created
                << " new topics, version " << stage.space.version << "\n";
      svc.report();
      Manifest m{"topics advance",
                 {{"input", ta_corpus.input}, {"stage", ta_stage}, {"stages", stages_spec}, {"gateway", ta_backend.describe()}},
                 {topics_file},
                 {topics_file},
                 svc.gateway().fingerprints(),
                 {{"topic_space_version", stage.space.version}, {"topics_created", created}}};
      if (!ta_backend.replay.empty()) m.inputs.push_back(ta_backend.replay);
      atomic_write(manifest_path(manifest_override, topics_file, "topics-advance"), m.serialize());
    };
  });

  std::string tr_id;
  std::string tr_name;
  std::optional<std::string> tr_description;
  auto* trev = topics->add_subcommand("revise", "Rename or re-describe a topic");
  trev->add_option("id", tr_id, "Topic id, e.g. T004")->required();
  trev->add_option("--topics", topics_file, "Topic space file")->required()->check(CLI::ExistingFile);
  trev->add_option("--name", tr_name, "New name")->required();
  trev->add_option("--description", tr_description, "New description (kept when omitted)");
  trev->callback([&] {
    run = [&] {
      auto history = TopicSpaceHistory::load(topics_file);
      const auto* current = history.active().find(TopicId{tr_id});
      if (!current) throw UsageError("unknown topic id '" + tr_id + "'");
      auto revised = revise_topic(history.active(), TopicId{tr_id}, tr_name, tr_description.value_or(current->description));
      history.push(revised);
      atomic_write(topics_file, history.serialize());
      std::cout << tr_id << " -> " << tr_name << "\n";
      Manifest m{"topics revise", {{"id", tr_id}, {"name", tr_name}}, {topics_file}, {topics_file}, {}, {}};
      atomic_write(manifest_path(manifest_override, topics_file, "topics-revise"), m.serialize());
    };
  });

  // annotate ------------------------------------------------------------------
  CorpusOpts an_corpus;
  BackendOpts an_backend;
  std::string an_mode_str;
  std::string an_codebook;
  std::string an_topics;
  std::string an_out;
  std::string an_log;
  std::string an_run_id;
  std::vector<std::string> an_examples;
  std::string an_rules = "bidirectionality,transitivity,derivation";
  bool an_model_given = false;
  auto* annotate = app.add_subcommand("annotate", "Annotate daily reports");
  an_corpus.add(annotate);
  an_backend.add(annotate);
  annotate->add_option("--mode", an_mode_str, "data-rich or data-scarce")
      ->required()
      ->check(CLI::IsMember({"data-rich", "data-scarce", "data_rich", "data_scarce"}));
  annotate->add_option("--codebook", an_codebook, "Codebook file")->required()->check(CLI::ExistingFile);
  annotate->add_option("--topics", an_topics, "Topic space file (replaces the codebook topics)")->check(CLI::ExistingFile);
  annotate->add_option("--out", an_out, "Annotation output (JSONL)")->required();
  annotate->add_option("--log", an_log, "Per-paragraph run log with raw model texts (JSONL)");
  annotate->add_option("--run-id", an_run_id, "Run id (derived from the inputs when omitted)");
  annotate->add_option("--examples", an_examples, "Example ids for data-scarce mode")->delimiter(',');
  annotate->add_option("--rules", an_rules, "Comma-separated rules to apply, or 'none'")->capture_default_str();
  annotate->callback([&] {
    an_model_given = annotate->count("--model") > 0;
    run = [&] {
      PipelineConfig cfg;
      cfg.mode = *parse_mode(an_mode_str);
      if (cfg.mode == Mode::DataRich && !an_model_given) throw UsageError("data-rich mode needs --model (the tuned model id)");
      if (cfg.mode == Mode::DataRich && !an_examples.empty()) throw UsageError("data-rich mode takes no --examples");
      cfg.generation = an_backend.generation();
      cfg.example_ids = an_examples;
      cfg.concurrency = an_backend.concurrency;
      cfg.run_id = an_run_id;
      cfg.rules.enabled.clear();
      if (text::ascii_lower(text::trim(an_rules)) != "none") {
        for (const auto& r : text::split(an_rules, ',')) {
          const auto rule = parse_rule(r);
          if (!rule) throw UsageError("unknown rule '" + std::string(r) + "'");
          cfg.rules.enabled.insert(*rule);
        }
      }

      auto codebook = load_codebook(an_codebook);
      std::string topic_version = "codebook";
      if (!an_topics.empty()) {
        const auto history = TopicSpaceHistory::load(an_topics);
        codebook.set_topics(history.active().definitions());
        topic_version = std::to_string(history.active().version) + "." + std::to_string(history.active().revision);
      }
      try {
        if (cfg.mode == Mode::DataScarce) {
          std::size_t n = 0;
          for (auto s : {Subtask::Presence, Subtask::Relation, Subtask::Attribute}) n += select_examples(codebook, cfg, s).size();
          if (n == 0) throw UsageError("data-scarce mode needs at least one example");
        }
      } catch (const InvalidInput& e) {
        throw UsageError(e.what());
      }
      const auto reports = an_corpus.load();
      Services svc(an_backend);
      const auto result = annotate_corpus(reports, codebook, svc.gateway(), cfg);

      std::size_t errors = 0, paragraphs_with = 0;
      for (const auto& r : result.records) {
        errors += r.errors.size();
        paragraphs_with += r.interactions.empty() ? 0 : 1;
        for (const auto& e : r.errors)
          std::cerr << "error: " << r.ref.report_id << "#" << r.ref.paragraph_index << ": " << e << "\n";
      }
      atomic_write(an_out, serialize_annotations(result));
      if (!an_log.empty()) atomic_write(an_log, serialize_run_log(result));
      svc.report();
      std::cout << "run " << result.run_id << ": " << result.records.size() << " paragraphs, " << paragraphs_with
                << " with interactions, " << result.interactions().size() << " interactions, " << errors << " errors\n";

      Manifest m;
      m.command = "annotate";
      m.config = {{"mode", std::string(to_string(cfg.mode))},
                  {"codebook", an_codebook},
                  {"topics", an_topics},
                  {"input", an_corpus.input},
                  {"frameworks", an_corpus.frameworks},
                  {"examples", an_examples},
                  {"rules", an_rules},
                  {"gateway", an_backend.describe()}};
      m.inputs = {an_codebook};
      if (!an_topics.empty()) m.inputs.emplace_back(an_topics);
      if (!an_backend.replay.empty()) m.inputs.emplace_back(an_backend.replay);
      m.outputs = {an_out};
      if (!an_log.empty()) m.outputs.emplace_back(an_log);
      m.fingerprints = svc.gateway().fingerprints();
      m.extra = {{"run_id", result.run_id}, {"topic_space_version", topic_version}, {"errors", errors}};
      atomic_write(manifest_path(manifest_override, an_out, "annotate"), m.serialize());
    };
  });

  // evaluate ------------------------------------------------------------------
  std::string ev_pred;
  std::string ev_gold;
  std::string ev_json;
  auto* evaluate = app.add_subcommand("evaluate", "Score predicted annotations against gold");
  evaluate->add_option("--pred", ev_pred, "Predicted annotations (JSONL)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gold", ev_gold, "Gold annotations (JSONL)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--json", ev_json, "Also write the metrics as JSON here");
  evaluate->callback([&] {
    run = [&] {
      auto to_interactions = [](const std::vector<AnnotationRecord>& rs) {
        std::vector<Interaction> out;
        for (const auto& r : rs) out.push_back(r.interaction);
        return out;
      };
      const auto pred = to_interactions(parse_annotations(read_file(ev_pred)));
      const auto gold = to_interactions(parse_annotations(read_file(ev_gold)));
      const auto rep = evaluate_annotations(pred, gold);

      std::cout << "Relation extraction (" << rep.relations.matched << " matched, " << rep.relations.predicted
                << " predicted, " << rep.relations.gold << " gold)\n";
      std::cout << "  Precision  " << pct(rep.relations.precision, 1) << "\n";
      std::cout << "  Recall     " << pct(rep.relations.recall, 1) << "\n";
      std::cout << "Attribute prediction (" << rep.attribute_items << " interactions; macro F1 over labels in gold)\n";
      std::cout << "  Accuracy   " << pct(rep.attributes.accuracy, 1) << "\n";
      std::cout << "  Macro F1   " << pct(rep.attributes.macro_f1, 1) << "\n";
      for (const auto& [label, s] : rep.attributes.per_label)
        std::cout << "    " << label << "  F1 " << pct(s.f1, 1) << "  support " << s.support << "\n";

      ordered_json j;
      j["precision"] = rep.relations.precision;
      j["recall"] = rep.relations.recall;
      j["matched"] = rep.relations.matched;
      j["predicted"] = rep.relations.predicted;
      j["gold"] = rep.relations.gold;
      j["accuracy"] = rep.attributes.accuracy;
      j["macro_f1"] = rep.attributes.macro_f1;
      j["macro_f1_labels"] = "labels present in gold";
      ordered_json labels = ordered_json::object();
      for (const auto& [label, s] : rep.attributes.per_label)
        labels[label] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
      j["per_label"] = labels;
      ordered_json paras = ordered_json::array();
      for (const auto& [ref, pr] : rep.per_paragraph)
        paras.push_back({{"report_id", ref.report_id}, {"paragraph_index", ref.paragraph_index}, {"precision", pr.precision}, {"recall", pr.recall}});
      j["per_paragraph"] = paras;
      Manifest m{"evaluate", {{"pred", ev_pred}, {"gold", ev_gold}}, {ev_pred, ev_gold}, {}, {}, {}};
      if (!ev_json.empty()) {
        atomic_write(ev_json, j.dump(2) + "\n");
        m.outputs.push_back(ev_json);
      }
      atomic_write(manifest_path(manifest_override, ev_json, "evaluate"), m.serialize());
    };
  });

  // audit-rules ---------------------------------------------------------------
  std::string au_file;
  auto* audit = app.add_subcommand("audit-rules", "Report how far annotations satisfy the coding rules");
  audit->add_option("annotations", au_file, "Annotation file (JSONL)")->required()->check(CLI::ExistingFile);
  audit->callback([&] {
    run = [&] {
      InteractionSet s;
      for (const auto& r : parse_annotations(read_file(au_file))) s.insert(r.interaction);
      const auto rep = audit_compliance(s);
      for (auto r : kAllRules) {
        const auto& c = rep.get(r);
        std::cout << to_string(r) << ": " << pct(c.fraction(), 2) << "% (" << c.satisfied << "/" << c.obligated << ")\n";
      }
      std::cout << pct(rep.bidirectionality.fraction(), 2) << " / " << pct(rep.transitivity.fraction(), 2) << " / "
                << pct(rep.derivation.fraction(), 2) << "\n";
      std::cout << "denominators: " << kComplianceDefinition << "\n";
      Manifest m{"audit-rules", {{"annotations", au_file}}, {au_file}, {}, {}, {}};
      atomic_write(manifest_path(manifest_override, "", "audit-rules"), m.serialize());
    };
  });

  // export --------------------------------------------------------------------
  CorpusOpts ex_corpus;
  std::string ex_annotations;
  std::string ex_format = "csv";
  std::string ex_out;
  std::string ex_topic_version;
  bool ex_stated_only = false;
  bool ex_include_oos = false;
  auto* exportc = app.add_subcommand("export", "Compile annotations into the longitudinal dataset");
  ex_corpus.add(exportc);
  exportc->add_option("--annotations", ex_annotations, "Annotation files (JSONL)")->required()->check(CLI::ExistingFile);
  exportc->add_option("--format", ex_format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
  exportc->add_option("--out", ex_out, "Output file")->required();
  exportc->add_option("--topic-space-version", ex_topic_version, "Recorded in the dataset header");
  exportc->add_flag("--stated-only", ex_stated_only, "Drop rule-derived interactions");
  exportc->add_flag("--include-out-of-space", ex_include_oos, "Keep interactions with unrecognized parties");
  exportc->callback([&] {
    run = [&] {
      const auto records = parse_annotations(read_file(ex_annotations));
      const auto reports = ex_corpus.load();
      const auto ds = build_dataset(records, reports, {ex_include_oos, ex_stated_only, ex_topic_version});
      atomic_write(ex_out, ex_format == "csv" ? export_csv(ds) : export_jsonl(ds));
      std::cout << ds.rows.size() << " rows written to " << ex_out << "\n";
      Manifest m{"export",
                 {{"annotations", ex_annotations}, {"input", ex_corpus.input}, {"format", ex_format},
                  {"stated_only", ex_stated_only}, {"include_out_of_space", ex_include_oos}},
                 {ex_annotations},
                 {ex_out},
                 {},
                 {{"run_ids", ds.run_ids}}};
      atomic_write(manifest_path(manifest_override, ex_out, "export"), m.serialize());
    };
  });

  // stats ---------------------------------------------------------------------
  CorpusOpts st_corpus;
  std::string st_annotations;
  std::string st_json;
  bool st_by_year = false;
  bool st_stated_only = false;
  auto* stats = app.add_subcommand("stats", "Descriptive statistics of the dataset");
  st_corpus.add(stats);
  stats->add_option("--annotations", st_annotations, "Annotation file (JSONL)")->required()->check(CLI::ExistingFile);
  stats->add_option("--json", st_json, "Also write the tables as JSON here");
  stats->add_flag("--by-year", st_by_year, "Break relation and topic counts down by year");
  stats->add_flag("--stated-only", st_stated_only, "Drop rule-derived interactions");
  stats->callback([&] {
    run = [&] {
      const auto reports = st_corpus.load();
      const auto ds = build_dataset(parse_annotations(read_file(st_annotations)), reports, {false, st_stated_only, ""});
      ordered_json j;
      j["interactions"] = ds.rows.size();
      std::cout << "interactions: " << ds.rows.size() << (st_stated_only ? " (stated only)" : "") << "\n";

      const auto yd = yearly_distribution(ds, reports);
      std::cout << "\nyear,reports,interactions\n";
      ordered_json years = ordered_json::array();
      for (const auto& y : yd.years) {
        std::cout << y.year << "," << y.reports << "," << y.interactions << "\n";
        years.push_back({{"year", y.year}, {"reports", y.reports}, {"interactions", y.interactions}});
      }
      j["yearly"] = years;
      j["correlation"] = yd.correlation ? ordered_json(*yd.correlation) : ordered_json(nullptr);
      if (yd.correlation) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", *yd.correlation);
        std::cout << "correlation: " << buf << "\n";
      } else {
        std::cout << "correlation: undefined\n";
      }

      std::cout << "\nentity,out,in\n";
      ordered_json degrees = ordered_json::array();
      for (const auto& d : activity_degrees(ds)) {
        std::cout << d.entity << "," << d.out << "," << d.in << "\n";
        degrees.push_back({{"entity", d.entity}, {"out", d.out}, {"in", d.in}});
      }
      j["degrees"] = degrees;

      const auto rf = relation_frequencies(ds);
      std::map<RelationType, std::size_t> rel_total;
      for (const auto& [year, m] : rf)
        for (const auto& [rel, n] : m) rel_total[rel] += n;
      ordered_json rel_json = ordered_json::object();
      if (st_by_year) {
        std::cout << "\nyear,relation,count\n";
        for (const auto& [year, m] : rf)
          for (const auto& [rel, n] : m) {
            std::cout << year << "," << relation_label(rel) << "," << n << "\n";
            rel_json[std::to_string(year)][std::string(relation_label(rel))] = n;
          }
      } else {
        std::cout << "\nrelation,count\n";
        for (auto rel : kAllRelations) {
          std::cout << relation_label(rel) << "," << rel_total[rel] << "\n";
          rel_json[std::string(relation_label(rel))] = rel_total[rel];
        }
      }
      j["relations"] = rel_json;

      const auto td = topic_distribution(ds);
      ordered_json topic_json = ordered_json::object();
      if (st_by_year) {
        std::cout << "\nyear,topic,count\n";
        for (const auto& [year, m] : td.by_year)
          for (const auto& [topic, n] : m) {
            std::cout << year << "," << topic << "," << n << "\n";
            topic_json[std::to_string(year)][topic] = n;
          }
      } else {
        std::cout << "\ntopic,count\n";
        for (const auto& [topic, n] : td.counts) {
          std::cout << topic << "," << n << "\n";
          topic_json[topic] = n;
        }
        std::cout << "," << td.no_topic << "\n";
        topic_json[""] = td.no_topic;
      }
      j["topics"] = topic_json;

      Manifest m{"stats",
                 {{"annotations", st_annotations}, {"input", st_corpus.input}, {"by_year", st_by_year}, {"stated_only", st_stated_only}},
                 {st_annotations},
                 {},
                 {},
                 {}};
      if (!st_json.empty()) {
        atomic_write(st_json, j.dump(2) + "\n");
        m.outputs.push_back(st_json);
      }
      atomic_write(manifest_path(manifest_override, st_json, "stats"), m.serialize());
    };
  });

  // prepare-finetune ----------------------------------------------------------
  std::string pf_train;
  std::string pf_codebook;
  std::string pf_topics;
  std::string pf_out;
  auto* prep = app.add_subcommand("prepare-finetune", "Write instruction/output pairs for tuning");
  prep->add_option("--train", pf_train, "Training paragraphs with gold interactions (JSONL)")->required()->check(CLI::ExistingFile);
  prep->add_option("--codebook", pf_codebook, "Codebook file")->required()->check(CLI::ExistingFile);
  prep->add_option("--topics", pf_topics, "Topic space file (replaces the codebook topics)")->check(CLI::ExistingFile);
  prep->add_option("--out", pf_out, "Instruction-pair file (JSONL)")->required();
  prep->callback([&] {
    run = [&] {
      auto cb = load_codebook(pf_codebook);
      if (!pf_topics.empty()) cb.set_topics(TopicSpaceHistory::load(pf_topics).active().definitions());
      std::vector<InstructionPair> pairs;
      for (const auto& ex : parse_training_examples(read_file(pf_train), cb)) {
        auto ps = make_instruction_pairs(ex, cb);
        pairs.insert(pairs.end(), ps.begin(), ps.end());
      }
      atomic_write(pf_out, serialize_pairs(pairs));
      std::cout << pairs.size() << " pairs written to " << pf_out << "\n";
      Manifest m{"prepare-finetune", {{"train", pf_train}, {"codebook", pf_codebook}, {"topics", pf_topics}}, {pf_train, pf_codebook}, {pf_out}, {}, {}};
      atomic_write(manifest_path(manifest_override, pf_out, "prepare-finetune"), m.serialize());
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (run) run();
    return 0;
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    return 2;
  } catch (const IngestError& e) {
    print_error("ingest", e.what());
    return 1;
  } catch (const ValidationError& e) {
    print_error("validation", e.what());
    return 1;
  } catch (const InvalidInput& e) {
    print_error("invalid_input", e.what());
    return 2;
  } catch (const ReplayMiss& e) {
    print_error("replay_miss", e.what());
    return 1;
  } catch (const Error& e) {
    print_error("error", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
}
