#include "catch_amalgamated.hpp"

#include "annonet/codebook.hpp"
#include "annonet/corpus.hpp"
#include "fixture_script.hpp"

using namespace annonet;

namespace {

const char* kHeader = "report_id: r1\ndate: 2002-10-25\nmeeting: COP8\nkind: daily\nframework: UNFCCC\n\n";

std::string codebook_without(std::string_view needle) {
  const auto full = read_file(fixture::dir() / "codebook.txt");
  std::string out;
  std::istringstream in(full);
  for (std::string line; std::getline(in, line);)
    if (line.find(needle) == std::string::npos) out += line + "\n";
  return out;
}

}  // namespace

TEST_CASE("reports parse into indexed paragraphs") {
  const auto parsed = parse_report(std::string(kHeader) + "First   paragraph\nwraps here.\r\n\r\n\n\nSecond.\n");
  const auto& r = parsed.report;
  CHECK(r.report_id == "r1");
  CHECK(format_date(r.date) == "2002-10-25");
  CHECK(r.year() == 2002);
  CHECK(r.kind == ReportKind::Daily);
  REQUIRE(r.paragraphs.size() == 2);
  CHECK(r.paragraphs[0].text == "First paragraph wraps here.");
  CHECK(r.paragraphs[0].word_count == 4);
  CHECK(r.paragraphs[1].index == 1);
  CHECK(parsed.warnings.empty());
}

TEST_CASE("paragraph text joins back to the normalized body") {
  const std::string body = "  A  b\nc\n\n\n d e \n\nf\n";
  const auto r = parse_report(std::string(kHeader) + body).report;
  std::vector<std::string> texts;
  for (const auto& p : r.paragraphs) texts.push_back(p.text);
  CHECK(text::join(texts, "\n\n") == normalize_body(body));
  for (std::size_t i = 0; i < r.paragraphs.size(); ++i) CHECK(r.paragraphs[i].index == i);
}

TEST_CASE("missing or bad metadata names the field") {
  auto field_of = [](const std::string& doc) {
    try {
      parse_report(doc);
    } catch (const IngestError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of("date: 2002-10-25\nmeeting: x\nkind: daily\nframework: UNFCCC\n\nText.") == "report_id");
  CHECK(field_of("report_id: a\ndate: 2002-13-40\nmeeting: x\nkind: daily\nframework: UNFCCC\n\nText.") == "date");
  CHECK(field_of("report_id: a\ndate: 2002-10-25\nmeeting: x\nkind: weekly\nframework: UNFCCC\n\nText.") == "kind");
  CHECK(field_of("report_id: a\ndate: 2002-10-25\nkind: daily\nframework: UNFCCC\n\nText.") == "meeting");
  CHECK(field_of("report_id: a\ndate: 2002-10-25\nmeeting: x\nkind: daily\n\nText.") == "framework");
  CHECK(field_of("no metadata here\n\nText.") == "");
}

TEST_CASE("empty body is a warning, not an error") {
  const auto parsed = parse_report(std::string(kHeader));
  CHECK(parsed.report.paragraphs.empty());
  CHECK(parsed.warnings.size() == 1);
}

TEST_CASE("boilerplate paragraphs are dropped before indexing") {
  const std::string doc = std::string(kHeader) +
                          "Kept one.\n\nThis issue of the Earth Negotiations Bulletin is written by someone.\n\nKept two.";
  const auto plain = parse_report(doc).report;
  CHECK(plain.paragraphs.size() == 3);
  const auto cleaned = parse_report(doc, ParseOptions{default_boilerplate()}).report;
  REQUIRE(cleaned.paragraphs.size() == 2);
  CHECK(cleaned.paragraphs[1].text == "Kept two.");
  CHECK(cleaned.paragraphs[1].index == 1);
}

TEST_CASE("fixture corpus loads in file order and filters by framework") {
  const auto all = fixture::corpus();
  REQUIRE(all.size() == 8);
  CHECK(all.front().report_id == "enb-0120");
  CHECK(all.front().paragraphs.size() == 2);  // footer removed
  const auto unfccc = fixture::unfccc_corpus();
  CHECK(unfccc.size() == 7);
  CHECK(filter_corpus(all, {"ipcc"}).size() == 1);
  const auto stats = corpus_stats(all);
  CHECK(stats.report_count == 8);
  CHECK(stats.reports_per_year.at(2019) == 2);
  CHECK_THROWS_AS(load_corpus(fixture::dir() / "missing"), IngestError);
}

TEST_CASE("fixture codebook parses") {
  const auto cb = fixture::codebook();
  CHECK(cb.entity_space.size() == 20);
  CHECK(cb.relation_definitions.size() == 5);
  CHECK(cb.coding_rules.size() == 4);
  CHECK(cb.topic_definitions.size() == 6);
  CHECK(cb.topic_by_name("loss AND damage")->id.value == "T006");
  REQUIRE(cb.example_bank.size() == 4);
  const auto* ex = cb.find_example("ex-attribute-1");
  REQUIRE(ex);
  CHECK(ex->subtask == Subtask::Attribute);
  CHECK(ex->gold.at(0).triplet.head.name == "G-77/China");
  CHECK(ex->gold.at(0).topic_name == "Adaptation");
  CHECK(cb.task_instructions.at(Subtask::Relation) == default_task_instruction(Subtask::Relation));
}

TEST_CASE("codebook validation errors") {
  CHECK_THROWS_WITH(parse_codebook(codebook_without("Delaying proposal:")),
                    Catch::Matchers::ContainsSubstring("missing relation definition 'Delaying proposal'"));
  CHECK_THROWS_AS(parse_codebook("[entities]\nA | planet\n"), ValidationError);
  CHECK_THROWS_AS(parse_codebook("stray line\n"), ValidationError);
  const auto dup_topic = codebook_without("T006") + "";
  CHECK_THROWS_AS(parse_codebook(dup_topic + "[topics]\nT007 | finance | again\n"), ValidationError);
  CHECK_THROWS_AS(parse_codebook(codebook_without("ex-presence-2") +
                                 "[examples]\n{\"id\": \"x\", \"paragraph\": \"p\", \"gold\": [{\"Party1\": \"Mars\", "
                                 "\"Party2\": \"EU\", \"Relation\": \"Support\"}]}\n"),
                  ValidationError);
}

TEST_CASE("prompt sections appear in a fixed order") {
  const auto cb = fixture::codebook();
  const std::vector<AnnotatedExample> examples{*cb.find_example("ex-relation-1")};
  const auto with = assemble_prompt(Subtask::Relation, cb, examples, "  CHINA opposed the US.  ");
  std::vector<std::string> names;
  for (const auto& [name, _] : with.sections) names.push_back(name);
  CHECK(names == std::vector<std::string>{"Task Instruction", "Label Definitions", "Coding Rules", "Examples",
                                          "Format Instruction", "Inference Instance"});
  std::size_t last = 0;
  for (const auto& n : names) {
    const auto at = with.rendered.find("### " + n + "\n");
    REQUIRE(at != std::string::npos);
    CHECK(at >= last);
    last = at;
  }
  CHECK(with.rendered.ends_with("Paragraph:\nCHINA opposed the US.\nOutput:"));
  CHECK(with.rendered.find(R"([{"Party1":"China","Party2":"US","Relation":"Opposition"}])") != std::string::npos);
  CHECK(with.rendered.find("- Only nation-states and coalitions are coded") != std::string::npos);

  const auto without = assemble_prompt(Subtask::Presence, cb, {}, "x");
  CHECK(without.sections.size() == 5);
  CHECK(without.rendered.find("### Examples") == std::string::npos);
}

TEST_CASE("attribute prompts list topics and the interactions to label") {
  const auto cb = fixture::codebook();
  const std::vector<Triplet> ctx{{{"Norway"}, {"Türkiye"}, RelationType::Support}};
  const auto p = assemble_prompt(Subtask::Attribute, cb, {}, "para", std::span<const Triplet>(ctx));
  CHECK(p.rendered.find("- Loss and damage: Addressing losses") != std::string::npos);
  CHECK(p.rendered.find("Interactions:\n[{\"Party1\":\"Norway\",\"Party2\":\"Türkiye\",\"Relation\":\"Support\"}]") !=
        std::string::npos);
  CHECK_THROWS_AS(assemble_prompt(Subtask::Attribute, cb, {}, "para"), InvalidInput);
}

TEST_CASE("example outputs render per subtask") {
  const auto cb = fixture::codebook();
  CHECK(render_example_output(Subtask::Presence, *cb.find_example("ex-presence-1")) == "Yes");
  CHECK(render_example_output(Subtask::Presence, *cb.find_example("ex-presence-2")) == "No");
  CHECK(render_example_output(Subtask::Attribute, *cb.find_example("ex-attribute-1")) ==
        R"([{"Party1":"G-77/China","Party2":"Kenya","Relation":"Support","Topic":"Adaptation"}])");
}
