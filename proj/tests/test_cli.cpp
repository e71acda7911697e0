#include "catch_amalgamated.hpp"

#include "cli_runner.hpp"
#include "expected.hpp"
#include "fixture_script.hpp"

using namespace annonet;
using fixture::run_cli;

namespace {

std::string fx(const std::string& name) { return (fixture::dir() / name).string(); }

std::vector<std::string> annotate_args(const std::string& out) {
  return {"annotate", "--mode",     "data-scarce",    "--input", fx("corpus"), "--framework",
          "UNFCCC",   "--codebook", fx("codebook.txt"), "--replay", fx("replay.jsonl"), "--out",
          out};
}

}  // namespace

TEST_CASE("replay fixture is current with the scripted model") {
  const fixture::ScratchDir dir("cli-fresh");
  const auto fresh = fixture::record_store(dir.path() / "replay.jsonl");
  CHECK(fresh == read_file(fixture::dir() / "replay.jsonl"));
}

TEST_CASE("usage errors exit with code 2") {
  const fixture::ScratchDir dir("cli-usage");
  CHECK(run_cli({}, dir.path()).exit_code == 2);
  CHECK(run_cli({"annotate"}, dir.path()).exit_code == 2);
  CHECK(run_cli({"frobnicate"}, dir.path()).exit_code == 2);

  auto both = annotate_args(dir / "a.jsonl");
  both.insert(both.end(), {"--endpoint", "http://127.0.0.1:1/v1"});
  const auto r = run_cli(both, dir.path());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("mutually exclusive") != std::string::npos);
  CHECK(r.err.find(R"({"error":"usage")") != std::string::npos);

  auto rich = annotate_args(dir / "a.jsonl");
  rich[2] = "data-rich";
  CHECK(run_cli(rich, dir.path()).exit_code == 2);

  // no flag takes the key itself
  auto key = annotate_args(dir / "a.jsonl");
  key.insert(key.end(), {"--api-key", "sk-x"});
  CHECK(run_cli(key, dir.path()).exit_code == 2);
}

TEST_CASE("version flag") {
  const fixture::ScratchDir dir("cli-version");
  const auto r = run_cli({"--version"}, dir.path());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find(std::string(kVersion)) != std::string::npos);
}

TEST_CASE("annotate with the replay store is byte-identical across runs") {
  const fixture::ScratchDir dir("cli-annotate");
  std::vector<std::string> outputs;
  for (int i = 0; i < 3; ++i) {
    const auto out = dir / ("run" + std::to_string(i) + ".jsonl");
    auto args = annotate_args(out);
    args.insert(args.end(), {"--concurrency", std::to_string(1 + 3 * i)});
    const auto r = run_cli(args, dir.path());
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("9 paragraphs") != std::string::npos);
    outputs.push_back(read_file(out));
  }
  CHECK(outputs[0] == outputs[1]);
  CHECK(outputs[1] == outputs[2]);

  InteractionSet got;
  for (const auto& rec : parse_annotations(outputs[0])) got.insert(rec.interaction);
  CHECK(got == fixture::expected_unfccc());

  const auto manifest = nlohmann::json::parse(read_file(dir / "run0.jsonl.manifest.json"));
  CHECK(manifest.at("command") == "annotate");
  CHECK_FALSE(manifest.at("replay_fingerprints").empty());

  // replay misses become per-paragraph errors and the run completes
  auto miss = annotate_args(dir / "miss.jsonl");
  miss.insert(miss.end(), {"--model", "unrecorded-model"});
  const auto r = run_cli(miss, dir.path());
  CHECK(r.exit_code == 0);
  CHECK(r.err.find("presence step: replay miss for fingerprint") != std::string::npos);
}

TEST_CASE("audit, evaluate, export and stats on the annotated corpus") {
  const fixture::ScratchDir dir("cli-downstream");
  const auto ann = dir / "ann.jsonl";
  REQUIRE(run_cli(annotate_args(ann), dir.path()).exit_code == 0);

  const auto audit = run_cli({"audit-rules", ann}, dir.path());
  REQUIRE(audit.exit_code == 0);
  CHECK(audit.out.find("100.00 / 100.00 / 100.00") != std::string::npos);

  const auto ev = run_cli({"evaluate", "--pred", ann, "--gold", ann, "--json", dir / "eval.json"}, dir.path());
  REQUIRE(ev.exit_code == 0);
  const auto metrics = nlohmann::json::parse(read_file(dir / "eval.json"));
  CHECK(metrics.at("precision") == 1.0);
  CHECK(metrics.at("recall") == 1.0);
  CHECK(metrics.at("macro_f1") == 1.0);

  const auto csv = dir / "ds.csv";
  const auto ex = run_cli({"export", "--annotations", ann, "--input", fx("corpus"), "--out", csv}, dir.path());
  INFO(ex.err);
  REQUIRE(ex.exit_code == 0);
  // the two interactions with the Chair are out of space
  CHECK(ex.out.starts_with(std::to_string(fixture::expected_unfccc().size() - 2) + " rows"));
  CHECK(read_file(csv).starts_with("date,meeting,party1,party2,relation,topic,derived\r\n"));

  const auto st = run_cli({"stats", "--annotations", ann, "--input", fx("corpus"), "--json", dir / "stats.json"},
                          dir.path());
  REQUIRE(st.exit_code == 0);
  const auto stats = nlohmann::json::parse(read_file(dir / "stats.json"));
  CHECK(stats.at("interactions") == fixture::expected_unfccc().size() - 2);
  std::size_t out_sum = 0, in_sum = 0;
  for (const auto& d : stats.at("degrees")) {
    out_sum += d.at("out").get<std::size_t>();
    in_sum += d.at("in").get<std::size_t>();
  }
  CHECK(out_sum == stats.at("interactions").get<std::size_t>());
  CHECK(in_sum == out_sum);
}

TEST_CASE("topics build and advance from the replay store") {
  const fixture::ScratchDir dir("cli-topics");
  auto topic_file = [&](int run) {
    const auto file = dir / ("topics" + std::to_string(run) + ".json");
    const auto b = run_cli({"topics", "build", "--input", fx("corpus"), "--replay", fx("replay.jsonl"), "--k",
                            std::to_string(fixture::kTopicK), "--seed", std::to_string(fixture::kTopicSeed),
                            "--out", file},
                           dir.path());
    INFO(b.err);
    REQUIRE(b.exit_code == 0);
    const auto a = run_cli({"topics", "advance", "--input", fx("corpus"), "--replay", fx("replay.jsonl"), "--stage",
                            "2", "--topics", file},
                           dir.path());
    INFO(a.err);
    REQUIRE(a.exit_code == 0);
    CHECK(a.out.find("3 new topics, version 2") != std::string::npos);
    return file;
  };
  const auto one = topic_file(1);
  const auto two = topic_file(2);
  CHECK(read_file(one) == read_file(two));

  const auto rev = run_cli({"topics", "revise", "T004", "--topics", one, "--name", "Loss & Damage"}, dir.path());
  REQUIRE(rev.exit_code == 0);
  CHECK(TopicSpaceHistory::load(one).active().find({"T004"})->name == "Loss & Damage");

  // stage 2 cannot be applied twice
  CHECK(run_cli({"topics", "advance", "--input", fx("corpus"), "--replay", fx("replay.jsonl"), "--stage", "2",
                 "--topics", two},
                dir.path())
            .exit_code == 2);
}

TEST_CASE("prepare-finetune writes instruction/output pairs") {
  const fixture::ScratchDir dir("cli-finetune");
  const auto out = dir / "pairs.jsonl";
  const auto r =
      run_cli({"prepare-finetune", "--train", fx("train.jsonl"), "--codebook", fx("codebook.txt"), "--out", out},
              dir.path());
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.starts_with("8 pairs"));
  std::size_t n = 0;
  for (const auto& [line, j] : read_jsonl(out)) {
    ++n;
    CHECK(j.at("instruction").is_string());
    CHECK(j.at("output").is_string());
  }
  CHECK(n == 8);
}
