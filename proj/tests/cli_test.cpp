#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "attackdet/dataset_io.hpp"
#include "attackdet/taxonomy.hpp"
#include "test_support.hpp"

using namespace attackdet;

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string command = std::string(ATTACKDET_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buffer[4096];
  std::size_t n;
  while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0) {
    result.out.append(buffer, n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "attackdet_cli_test";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
}

// Small gold-labeled corpus with one explicit, one implicit and two benign
// comments, matching the lexicon rules below.
fs::path fixture_corpus() {
  Corpus corpus;
  ThreadBlock block = build_thread_block("b1", {{
                                                   {"r", "what an idiot", 0, std::nullopt},
                                                   {"s", "this is a scam", 10, "r"},
                                                   {"t", "I agree with them", 20, "r"},
                                                   {"u", "have a nice day", 30, "s"},
                                               }});
  LabelRecord exp = null_record();
  exp.presence = AttackPresence::Explicit;
  exp.form = AttackForm::Targeted;
  exp.target = AttackTarget::Individuals;
  exp.type = AttackType::Abusive;
  exp.intent = AttackIntent::PersonalAttacks;
  exp.hazard = 60;
  exp.confidence = 90;
  LabelRecord imp = null_record();
  imp.presence = AttackPresence::Implicit;
  imp.form = AttackForm::Targeted;
  imp.target = AttackTarget::Individuals;
  imp.type = AttackType::Satirical;
  imp.intent = AttackIntent::VerbalMockery;
  imp.hazard = 40;
  imp.confidence = 80;
  corpus.gold.emplace(GoldKey{"b1", {1, 1}}, exp);
  corpus.gold.emplace(GoldKey{"b1", {2, 1}}, null_record());
  corpus.gold.emplace(GoldKey{"b1", {2, 2}}, imp);
  corpus.gold.emplace(GoldKey{"b1", {3, 1}}, null_record());
  corpus.blocks.push_back(std::move(block));

  const auto path = scratch_dir() / "corpus.jsonl";
  std::ofstream out(path, std::ios::binary);
  write_corpus(corpus, out);
  return path;
}

fs::path fixture_config() {
  const nlohmann::json rules = {
      {"explicit_tokens", {"idiot", "trash"}},
      {"implicit_trigger_tokens", {"scam"}},
      {"implicit_marker_tokens", {"them"}},
      {"explicit_analyzer_defaults",
       {{"attack_or_not", "Explicit attack"},
        {"attack_form", "Targeted"},
        {"attack_target", "Individuals"},
        {"attack_type", "Abusive"},
        {"attack_intent", "Personal attacks"},
        {"hazard_level", 60},
        {"confidence_level", 90}}},
      {"implicit_analyzer_defaults",
       {{"attack_or_not", "Implicit attack"},
        {"attack_form", "Targeted"},
        {"attack_target", "Individuals"},
        {"attack_type", "Satirical"},
        {"attack_intent", "Verbal mockery"},
        {"hazard_level", 40},
        {"confidence_level", 80}}},
  };
  nlohmann::json config;
  config["roles"] = nlohmann::json::object();
  for (const char* role :
       {"explicit_detector", "explicit_analyzer", "implicit_detector", "implicit_analyzer"}) {
    config["roles"][role] = {{"kind", "lexicon"}, {"rules", rules}};
  }
  const auto path = scratch_dir() / "config.json";
  write_file(path, config.dump());
  return path;
}

}  // namespace

TEST_CASE("validate reports zero violations on a clean corpus") {
  const auto corpus = fixture_corpus();
  const RunResult result = run_cli("validate " + corpus.string());
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("0 violations") != std::string::npos);
}

TEST_CASE("validate fails on malformed input") {
  const auto path = scratch_dir() / "broken.jsonl";
  write_file(path, "{\"block_id\": \"x\"}\n");
  const RunResult result = run_cli("validate " + path.string());
  CHECK(result.exit_code == 1);
}

TEST_CASE("context prints the rendered window") {
  const auto corpus = fixture_corpus();
  const RunResult result =
      run_cli("context --block b1 --level 2 --seq 2 " + corpus.string());
  CHECK(result.exit_code == 0);
  CHECK(result.out == "[L1.1] what an idiot\n[L2.1] this is a scam\n");

  const RunResult same_parent = run_cli("context --block b1 --level 3 --seq 1 --policy "
                                        "same-parent " +
                                        corpus.string());
  CHECK(same_parent.exit_code == 0);
  CHECK(same_parent.out == "[L1.1] what an idiot\n[L2.1] this is a scam\n");
}

TEST_CASE("detect emits deterministic outcome JSONL") {
  const auto corpus = fixture_corpus();
  const auto config = fixture_config();
  const std::string args = "detect --backend-config " + config.string() + " " + corpus.string();
  const RunResult first = run_cli(args);
  const RunResult second = run_cli(args);
  CHECK(first.exit_code == 0);
  CHECK(first.out == second.out);

  std::istringstream lines(first.out);
  std::string line;
  std::size_t count = 0;
  std::size_t explicit_count = 0, implicit_count = 0, none_count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);  // stdout is valid JSONL
    ++count;
    const std::string presence = j["record"]["attack_or_not"];
    explicit_count += presence == "Explicit attack";
    implicit_count += presence == "Implicit attack";
    none_count += presence == "No attack";
  }
  CHECK(count == 4);
  CHECK(explicit_count == 1);
  CHECK(implicit_count == 1);
  CHECK(none_count == 2);
}

TEST_CASE("evaluate scores detect output against the gold corpus") {
  const auto corpus = fixture_corpus();
  const auto config = fixture_config();
  const auto outcomes = scratch_dir() / "outcomes.jsonl";
  const RunResult detect =
      run_cli("detect --backend-config " + config.string() + " " + corpus.string());
  REQUIRE(detect.exit_code == 0);
  write_file(outcomes, detect.out);

  const RunResult result =
      run_cli("evaluate --gold " + corpus.string() + " " + outcomes.string());
  CHECK(result.exit_code == 0);
  const auto j = nlohmann::json::parse(result.out);
  CHECK(j["attack_or_not_acc"] == 1.0);
  CHECK(j["all_in_one_acc"] == 1.0);
  CHECK(j["evaluated"] == 4);
  CHECK(j["schema_version"] == 1);

  const RunResult table = run_cli("evaluate --format table --gold " + corpus.string() + " " +
                                  outcomes.string());
  CHECK(table.out.find("All_in_One_Acc") != std::string::npos);
}

TEST_CASE("split validates ratios and is stable under a fixed seed") {
  const auto corpus = scratch_dir() / "ten.jsonl";
  {
    std::mt19937_64 rng(211);
    Corpus c;
    for (int i = 0; i < 10; ++i) {
      c.blocks.push_back(testing::random_block(rng, "b" + std::to_string(i), 4, 10));
    }
    std::ofstream out(corpus, std::ios::binary);
    write_corpus(c, out);
  }
  const auto prefix = (scratch_dir() / "split").string();

  const RunResult bad = run_cli("split --ratios 0.8,0.3,0.1 --seed 7 --out-prefix " + prefix +
                                " " + corpus.string());
  CHECK(bad.exit_code == 2);

  const std::string good_args =
      "split --ratios 0.8,0.1,0.1 --seed 7 --out-prefix " + prefix + " " + corpus.string();
  const RunResult first = run_cli(good_args);
  CHECK(first.exit_code == 0);
  const auto summary = nlohmann::json::parse(first.out);
  CHECK(summary["train"] == 8);
  CHECK(summary["val"] == 1);
  CHECK(summary["test"] == 1);

  std::ifstream test_a(prefix + ".test.jsonl");
  std::stringstream buf_a;
  buf_a << test_a.rdbuf();
  const RunResult second = run_cli(good_args);
  CHECK(second.out == first.out);
  std::ifstream test_b(prefix + ".test.jsonl");
  std::stringstream buf_b;
  buf_b << test_b.rdbuf();
  CHECK(buf_a.str() == buf_b.str());
}

TEST_CASE("partition writes four sub-datasets plus a manifest") {
  const auto corpus = fixture_corpus();
  const auto dir = scratch_dir() / "partition";
  const RunResult result =
      run_cli("partition --out-dir " + dir.string() + " " + corpus.string());
  CHECK(result.exit_code == 0);
  const auto summary = nlohmann::json::parse(result.out);
  CHECK(summary["explicit_detector"] == 4);
  CHECK(summary["explicit_analyzer"] == 1);
  CHECK(summary["implicit_detector"] == 3);
  CHECK(summary["implicit_analyzer"] == 1);
  for (const char* name : {"explicit_detector.jsonl", "explicit_analyzer.jsonl",
                           "implicit_detector.jsonl", "implicit_analyzer.jsonl",
                           "manifest.json"}) {
    CHECK(fs::exists(dir / name));
  }
  std::ifstream manifest(dir / "manifest.json");
  nlohmann::json m;
  manifest >> m;
  CHECK(m["counts"]["implicit_detector"] == 3);
}

TEST_CASE("kappa reproduces the worked 2x2 example") {
  std::string a, b;
  const auto fill = [&](int n, const char* va, const char* vb) {
    for (int i = 0; i < n; ++i) {
      a += std::string(va) + "\n";
      b += std::string(vb) + "\n";
    }
  };
  fill(45, "pos", "pos");
  fill(5, "pos", "neg");
  fill(15, "neg", "pos");
  fill(35, "neg", "neg");
  const auto path_a = scratch_dir() / "a.txt";
  const auto path_b = scratch_dir() / "b.txt";
  write_file(path_a, a);
  write_file(path_b, b);

  const RunResult result = run_cli("kappa " + path_a.string() + " " + path_b.string());
  CHECK(result.exit_code == 0);
  const auto j = nlohmann::json::parse(result.out);
  CHECK(j["kappa"] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(j["consistency_rate"] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(j["n"] == 100);
}

TEST_CASE("stats prints the distribution in table layout") {
  const auto corpus = fixture_corpus();
  const RunResult result = run_cli("stats " + corpus.string());
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("Attack or not") != std::string::npos);
  CHECK(result.out.find("Explicit attack") != std::string::npos);
  CHECK(result.out.find("25.0%") != std::string::npos);  // 1 of 4
  CHECK(result.out.find("50.0%") != std::string::npos);  // 2 of 4 No attack

  const RunResult json_result = run_cli("stats --format json " + corpus.string());
  const auto j = nlohmann::json::parse(json_result.out);
  CHECK(j["total"] == 4);
  CHECK(j["attack_or_not"][0]["value"] == "Explicit attack");
  CHECK(j["attack_or_not"][0]["percent"] == 25.0);
}

TEST_CASE("flat CSV corpora load through --input-format") {
  const auto csv = scratch_dir() / "flat.csv";
  write_file(csv, "class,tweet\n0,first\n1,second\n1,third\n");
  LabelRecord exp = null_record();
  exp.presence = AttackPresence::Explicit;
  const nlohmann::json mapping = {
      {"text_column", "tweet"},
      {"rules",
       {{{"name", "attack"}, {"when", {{"class", "0"}}}, {"label", record_to_json(exp)}},
        {{"name", "clean"}, {"when", {{"class", "1"}}}, {"label", record_to_json(null_record())}}}},
  };
  const auto mapping_path = scratch_dir() / "mapping.json";
  write_file(mapping_path, mapping.dump());

  const RunResult result = run_cli("stats --format json --input-format flat-csv --mapping " +
                                   mapping_path.string() + " " + csv.string());
  CHECK(result.exit_code == 0);
  const auto j = nlohmann::json::parse(result.out);
  CHECK(j["total"] == 3);

  const RunResult missing_mapping =
      run_cli("stats --input-format flat-csv " + csv.string());
  CHECK(missing_mapping.exit_code == 2);
}

TEST_CASE("unknown subcommands are usage errors") {
  const RunResult result = run_cli("frobnicate");
  CHECK(result.exit_code == 2);
}
