// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Oracles here are independent re-derivations, never calls
// into the code paths they check.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "attackdet/dataset_io.hpp"
#include "attackdet/evaluation.hpp"
#include "attackdet/pipeline.hpp"
#include "test_support.hpp"

using namespace attackdet;
namespace fs = std::filesystem;

#define EXPECT(cond, msg)                                    \
  do {                                                       \
    if (!(cond)) throw std::runtime_error(std::string(msg)); \
  } while (0)

namespace {

int failures = 0;

void criterion(int number, const std::string& name, const std::function<void()>& body) {
  const auto start = std::chrono::steady_clock::now();
  try {
    body();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("PASS criterion %d: %s (%.2fs)\n", number, name.c_str(), secs);
  } catch (const std::exception& e) {
    std::printf("FAIL criterion %d: %s -- %s\n", number, name.c_str(), e.what());
    ++failures;
  }
  std::fflush(stdout);
}

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string command = std::string(ATTACKDET_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult result;
  FILE* pipe = popen(command.c_str(), "r");
  EXPECT(pipe != nullptr, "popen failed");
  char buffer[4096];
  std::size_t n;
  while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0) result.out.append(buffer, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "attackdet_acceptance";
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// Synthetic 30-comment corpus and lexicon rules for the routing criterion.

constexpr const char* kExplicitTokens[] = {"idiot", "trash"};
constexpr const char* kTriggerToken = "scam";
constexpr const char* kMarkerToken = "them";

struct SyntheticComment {
  const char* id;
  const char* text;
  const char* parent;  // nullptr for the anchor
  int ts;
};

// Explicit-token, trigger+marker and benign comments mixed across levels;
// triggers reach targets through ancestors in block A and through an earlier
// same-level peer in block B.
const std::vector<std::pair<const char*, std::vector<SyntheticComment>>> kSyntheticBlocks = {
    {"blockA",
     {
         {"a1", "what an idiot this guy is", nullptr, 0},
         {"a2", "i would not trust this scam shop", "a1", 10},
         {"a3", "sure, tell them why", "a2", 20},
         {"a4", "lovely weather today", "a1", 30},
         {"a5", "agreed, quite nice", "a4", 40},
         {"a6", "this whole thread is trash", "a1", 50},
         {"a7", "why do you say that", "a6", 60},
         {"a8", "i already told them everything", "a3", 70},
         {"a9", "morning everyone", "a1", 80},
         {"a10", "good morning to you too", "a9", 90},
     }},
    {"blockB",
     {
         {"b1", "discussion about the new update", nullptr, 0},
         {"b2", "the rollout was a scam from day one", "b1", 10},
         {"b3", "could not have said it better about them", "b1", 20},
         {"b4", "you absolute idiot", "b1", 30},
         {"b5", "the patch notes are long", "b1", 40},
         {"b6", "I only read half of them", "b2", 50},
         {"b7", "performance looks better", "b5", 60},
         {"b8", "frame rates doubled here", "b5", 70},
         {"b9", "what trash servers", "b2", 80},
         {"b10", "see you all tomorrow", "b1", 90},
     }},
    {"blockC",
     {
         {"c1", "recipe thread: share your best soup", nullptr, 0},
         {"c2", "leek and potato, family classic", "c1", 10},
         {"c3", "miso with extra ginger", "c1", 20},
         {"c4", "only an idiot skips the roux", "c1", 30},
         {"c5", "that joke was trash, sorry", "c4", 40},
         {"c6", "adding cream is a scam honestly", "c1", 50},
         {"c7", "I simmer them for hours", "c6", 60},
         {"c8", "pressure cooker saves time", "c1", 70},
         {"c9", "broth quality decides everything", "c8", 80},
         {"c10", "thanks for the ideas", "c1", 90},
     }},
};

nlohmann::json synthetic_rules() {
  return {
      {"explicit_tokens", {kExplicitTokens[0], kExplicitTokens[1]}},
      {"implicit_trigger_tokens", {kTriggerToken}},
      {"implicit_marker_tokens", {kMarkerToken}},
  };
}

PipelineConfig synthetic_config(bool capture) {
  PipelineConfig config;
  for (ModelRole role : kModelRoles) {
    BackendConfig b;
    b.kind = BackendKind::Lexicon;
    b.lexicon_rules = synthetic_rules();
    config.backends[role] = b;
  }
  config.capture_text = capture;
  return config;
}

std::vector<ThreadBlock> synthetic_corpus() {
  std::vector<ThreadBlock> blocks;
  for (const auto& [block_id, comments] : kSyntheticBlocks) {
    std::vector<RawComment> raw;
    for (const auto& c : comments) {
      raw.push_back({c.id, c.text,
                     static_cast<std::int64_t>(c.ts),
                     c.parent ? std::optional<std::string>(c.parent) : std::nullopt});
    }
    blocks.push_back(build_thread_block(block_id, raw));
  }
  return blocks;
}

bool contains(std::string_view text, std::string_view token) {
  return text.find(token) != std::string_view::npos;
}

enum class ExpectedRoute { Explicit, Implicit, None };

// Independent routing oracle: explicit iff the comment holds an explicit
// token; implicit iff the oracle context holds the trigger and the comment
// the marker; null otherwise.
ExpectedRoute expected_route(const ThreadBlock& block, const CommentNode& node) {
  for (const char* token : kExplicitTokens) {
    if (contains(node.text, token)) return ExpectedRoute::Explicit;
  }
  std::string transcript;
  for (const auto& entry :
       attackdet::testing::oracle_context(block, node.coord, ContextPolicy::SameLevel)) {
    transcript += entry.text;
    transcript += '\n';
  }
  if (contains(transcript, kTriggerToken) && contains(node.text, kMarkerToken)) {
    return ExpectedRoute::Implicit;
  }
  return ExpectedRoute::None;
}

std::string context_section(const std::string& prompt) {
  const auto begin = prompt.find(kContextBegin);
  const auto end = prompt.find(kContextEnd);
  EXPECT(begin != std::string::npos && end != std::string::npos,
         "prompt lacks a context section");
  const auto content_begin = begin + kContextBegin.size() + 1;   // skip "<context>\n"
  return prompt.substr(content_begin, end - 1 - content_begin);  // up to "\n</context>"
}

// ---------------------------------------------------------------------------

void criterion_context_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20250801);
  std::size_t windows = 0;
  for (int i = 0; i < 1000; ++i) {
    const ThreadBlock block =
        attackdet::testing::random_block(rng, "b" + std::to_string(i), 6, 60);
    for (const auto& node : block.nodes()) {
      for (const auto policy : {ContextPolicy::SameLevel, ContextPolicy::SameParent}) {
        const ContextWindow window = select_context(block, node.coord, policy);
        const auto expected = attackdet::testing::oracle_context(block, node.coord, policy);
        EXPECT(window.entries == expected,
               "window mismatch at block " + block.block_id() + " " + to_string(node.coord));
        ++windows;
      }
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT(secs < 5.0, "took " + std::to_string(secs) + "s, budget is 5s");
  EXPECT(windows > 2000, "generator produced suspiciously few windows");
}

void criterion_routing() {
  const auto start = std::chrono::steady_clock::now();
  const auto blocks = synthetic_corpus();
  std::size_t total = 0;
  for (const auto& block : blocks) total += block.nodes().size();
  EXPECT(total == 30, "synthetic corpus must hold exactly 30 comments");

  const Pipeline pipeline(synthetic_config(true), TemplateSet::builtin());
  std::size_t n_explicit = 0, n_implicit = 0, n_null = 0;
  for (const auto& block : blocks) {
    for (const auto& outcome : pipeline.detect_block(block)) {
      EXPECT(outcome.ok(), "diagnostic outcome in the synthetic corpus");
      const CommentNode& node = block.node_at(outcome.coord);
      switch (expected_route(block, node)) {
        case ExpectedRoute::Explicit: {
          ++n_explicit;
          EXPECT(outcome.record->presence == AttackPresence::Explicit,
                 node.id + std::string(": expected presence Explicit"));
          EXPECT(!outcome.check2.has_value(), node.id + std::string(": check2 must be absent"));
          EXPECT(outcome.trace.size() == 2, "explicit route runs exactly two stages");
          const std::string& analyzer_prompt = *outcome.trace[1].request_text;
          EXPECT(analyzer_prompt.find(kContextBegin) == std::string::npos,
                 node.id + std::string(": explicit analyzer prompt must be context-free"));
          break;
        }
        case ExpectedRoute::Implicit: {
          ++n_implicit;
          EXPECT(outcome.record->presence == AttackPresence::Implicit,
                 node.id + std::string(": expected presence Implicit"));
          EXPECT(outcome.check2 && outcome.check2->verdict == Verdict::Positive,
                 node.id + std::string(": check2 must be positive"));
          EXPECT(outcome.trace.size() == 3, "implicit route runs exactly three stages");
          ContextWindow oracle_window;
          oracle_window.target = node.coord;
          oracle_window.entries =
              attackdet::testing::oracle_context(block, node.coord, ContextPolicy::SameLevel);
          const std::string expected = render_context(oracle_window);
          EXPECT(context_section(*outcome.trace[2].request_text) == expected,
                 node.id + std::string(": analyzer context section differs from the window"));
          break;
        }
        case ExpectedRoute::None: {
          ++n_null;
          EXPECT(*outcome.record == null_record(),
                 node.id + std::string(": expected exactly the null record"));
          break;
        }
      }
    }
  }
  EXPECT(n_explicit >= 5 && n_implicit >= 4 && n_null >= 10,
         "synthetic corpus must exercise all three routes");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT(secs < 1.0, "took " + std::to_string(secs) + "s, budget is 1s");
}

void check_distribution(Dimension dim, const std::vector<std::pair<std::size_t, double>>& rows,
                        const std::function<void(LabelRecord&, std::size_t)>& assign) {
  std::vector<LabelRecord> records;
  for (std::size_t value = 0; value < rows.size(); ++value) {
    LabelRecord r;
    r.presence = AttackPresence::Explicit;  // distribution counting only
    assign(r, value);
    records.insert(records.end(), rows[value].first, r);
  }
  const DistributionReport report = label_distribution(records);
  for (std::size_t value = 0; value < rows.size(); ++value) {
    bool found = false;
    for (const auto& row : report.categorical.at(dim)) {
      if (row.count == rows[value].first && std::abs(row.percent - rows[value].second) <= 0.05) {
        found = true;
        break;
      }
    }
    std::ostringstream os;
    os << dimension_key(dim) << " row " << value << ": expected " << rows[value].first << " at "
       << rows[value].second << "%";
    EXPECT(found, os.str());
  }
}

void criterion_table2_statistics() {
  check_distribution(Dimension::AttackOrNot, {{9275, 35.1}, {4766, 18.0}, {12382, 46.9}},
                     [](LabelRecord& r, std::size_t v) {
                       r.presence = static_cast<AttackPresence>(v);
                       if (r.presence == AttackPresence::None) r = null_record();
                     });
  check_distribution(Dimension::AttackForm, {{10775, 40.8}, {6574, 24.9}, {9074, 34.3}},
                     [](LabelRecord& r, std::size_t v) { r.form = static_cast<AttackForm>(v); });
  check_distribution(Dimension::AttackTarget, {{10258, 38.8}, {740, 2.8}, {15425, 58.4}},
                     [](LabelRecord& r, std::size_t v) {
                       r.target = static_cast<AttackTarget>(v);
                     });
}

void criterion_kappa_oracle() {
  // exhaustive 2x2 tables with total <= 20 against the direct formula
  std::size_t tables = 0;
  for (int n = 1; n <= 20; ++n) {
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; a + b <= n; ++b) {
        for (int c = 0; a + b + c <= n; ++c) {
          const int d = n - a - b - c;
          std::vector<std::string> xs, ys;
          const auto fill = [&](int count, const char* x, const char* y) {
            for (int i = 0; i < count; ++i) {
              xs.emplace_back(x);
              ys.emplace_back(y);
            }
          };
          fill(a, "pos", "pos");
          fill(b, "pos", "neg");
          fill(c, "neg", "pos");
          fill(d, "neg", "neg");

          const KappaResult result = cohen_kappa(xs, ys);
          const double nn = n;
          const double p_o = (a + d) / nn;
          const double p_e = ((a + b) / nn) * ((a + c) / nn) + ((c + d) / nn) * ((b + d) / nn);
          EXPECT(std::abs(result.consistency_rate - p_o) <= 1e-12, "consistency rate mismatch");
          if (p_e < 1.0) {
            const double direct = (p_o - p_e) / (1.0 - p_e);
            EXPECT(std::abs(result.kappa - direct) <= 1e-12,
                   "kappa mismatch on table " + std::to_string(a) + "/" + std::to_string(b) +
                       "/" + std::to_string(c) + "/" + std::to_string(d));
          } else {
            EXPECT(result.kappa == 1.0, "p_e = 1 must give kappa = 1");
          }
          ++tables;
        }
      }
    }
  }
  EXPECT(tables > 10000, "enumeration looks incomplete");

  // identical lists give exactly 1.0
  const std::vector<std::string> labels = {"x", "y", "z", "x", "y"};
  const KappaResult identical = cohen_kappa(labels, labels);
  EXPECT(identical.kappa == 1.0, "kappa(identical) must be exactly 1.0");
  EXPECT(identical.consistency_rate == 1.0, "rate(identical) must be exactly 1.0");

  // the worked example
  std::vector<std::string> xs, ys;
  const auto fill = [&](int count, const char* x, const char* y) {
    for (int i = 0; i < count; ++i) {
      xs.emplace_back(x);
      ys.emplace_back(y);
    }
  };
  fill(45, "pos", "pos");
  fill(5, "pos", "neg");
  fill(15, "neg", "pos");
  fill(35, "neg", "neg");
  const KappaResult worked = cohen_kappa(xs, ys);
  EXPECT(std::abs(worked.kappa - 0.6) <= 1e-12, "worked example kappa must be 0.6");
  EXPECT(std::abs(worked.consistency_rate - 0.8) <= 1e-12, "worked example rate must be 0.8");
}

void criterion_metric_properties() {
  std::mt19937_64 rng(424242);
  // 100 lists x 100 pairs = 10,000 random prediction/gold record pairs
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LabelRecord> preds, golds;
    for (int i = 0; i < 100; ++i) {
      preds.push_back(attackdet::testing::random_record(rng));
      golds.push_back(attackdet::testing::random_record(rng));
    }
    const double aio = all_in_one_accuracy(preds, golds);
    for (Dimension dim : kDimensions) {
      EXPECT(aio <= accuracy(preds, golds, dim), "all-in-one exceeded a per-dimension accuracy");
    }
  }

  // pearson against the direct covariance-formula oracle
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(static_cast<double>(rng() % 10000) / 100.0);
      ys.push_back(static_cast<double>(rng() % 10000) / 100.0);
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) continue;
    const double direct = sxy / std::sqrt(sxx * syy);
    EXPECT(std::abs(pearson(xs, ys) - direct) <= 1e-9, "pearson differs from the oracle");
  }

  const std::vector<double> up = {1, 2, 3};
  const std::vector<double> down = {-1, -2, -3};
  EXPECT(pearson(up, up) == 1.0, "pearson(xs, xs) must be exactly 1.0");
  EXPECT(pearson(up, down) == -1.0, "pearson(xs, -xs) must be exactly -1.0");
}

void criterion_round_trips() {
  std::mt19937_64 rng(5150);
  for (int i = 0; i < 1000; ++i) {
    const ThreadBlock block =
        attackdet::testing::random_block(rng, "rt" + std::to_string(i), 6, 40);
    EXPECT(parse_block(serialize_block(block)) == block,
           "thread-block round-trip mismatch at " + block.block_id());
  }
  for (int i = 0; i < 1000; ++i) {
    const LabelRecord record = attackdet::testing::random_record(rng);
    EXPECT(parse_analyzer_reply(record_to_lines(record)) == record,
           "analyzer-reply round-trip mismatch at instance " + std::to_string(i));
  }
}

void criterion_partition() {
  std::mt19937_64 rng(7777);
  for (int trial = 0; trial < 30; ++trial) {
    Corpus corpus;
    corpus.provenance = "acceptance";
    const int block_count = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < block_count; ++i) {
      ThreadBlock block = attackdet::testing::random_block(rng, "p" + std::to_string(i), 5, 20);
      for (const auto& node : block.nodes()) {
        corpus.gold.emplace(GoldKey{block.block_id(), node.coord},
                            attackdet::testing::random_record(rng));
      }
      corpus.blocks.push_back(std::move(block));
    }

    std::size_t total = 0, n_explicit = 0, n_implicit = 0;
    for (const auto& [key, record] : corpus.gold) {
      ++total;
      n_explicit += record.presence == AttackPresence::Explicit;
      n_implicit += record.presence == AttackPresence::Implicit;
    }

    const ModulePartition partition = partition_for_modules(corpus, ContextPolicy::SameLevel);
    EXPECT(partition.explicit_detector_set.size() == total, "explicit-detector size");
    EXPECT(partition.explicit_analyzer_set.size() == n_explicit, "explicit-analyzer size");
    EXPECT(partition.implicit_detector_set.size() == total - n_explicit,
           "implicit-detector size");
    EXPECT(partition.implicit_analyzer_set.size() == n_implicit, "implicit-analyzer size");

    // brute-force membership recount
    for (const auto& item : partition.explicit_detector_set) {
      const auto& gold = corpus.gold.at({item.block_id, item.coord});
      EXPECT(item.positive == (gold.presence == AttackPresence::Explicit),
             "explicit-detector label mismatch");
    }
    std::set<GoldKey> implicit_detector_keys;
    for (const auto& item : partition.implicit_detector_set) {
      implicit_detector_keys.insert({item.block_id, item.coord});
      EXPECT(corpus.gold.at({item.block_id, item.coord}).presence != AttackPresence::Explicit,
             "gold-explicit comment leaked into the implicit-detector set");
    }
    for (const auto& [key, record] : corpus.gold) {
      if (record.presence != AttackPresence::Explicit) {
        EXPECT(implicit_detector_keys.contains(key),
               "non-explicit comment missing from the implicit-detector set");
      }
    }
    for (const auto& item : partition.implicit_analyzer_set) {
      EXPECT(corpus.gold.at({item.block_id, item.coord}).presence == AttackPresence::Implicit,
             "implicit-analyzer member is not gold-implicit");
    }
    for (const auto& item : partition.explicit_analyzer_set) {
      EXPECT(corpus.gold.at({item.block_id, item.coord}).presence == AttackPresence::Explicit,
             "explicit-analyzer member is not gold-explicit");
    }
  }
}

void criterion_determinism() {
  const auto dir = scratch_dir();
  const auto corpus_path = dir / "synthetic.jsonl";
  {
    Corpus corpus;
    corpus.blocks = synthetic_corpus();
    std::ofstream out(corpus_path, std::ios::binary);
    write_corpus(corpus, out);
  }
  nlohmann::json config;
  config["roles"] = nlohmann::json::object();
  for (ModelRole role : kModelRoles) {
    config["roles"][std::string(role_key(role))] = {{"kind", "lexicon"},
                                                    {"rules", synthetic_rules()}};
  }
  const auto config_path = dir / "config.json";
  {
    std::ofstream out(config_path, std::ios::binary);
    out << config.dump();
  }

  std::string reference;
  for (const int parallelism : {1, 4, 16}) {
    const RunResult result =
        run_cli("detect --backend-config " + config_path.string() + " --parallelism " +
                std::to_string(parallelism) + " " + corpus_path.string());
    EXPECT(result.exit_code == 0, "detect exited nonzero");
    if (reference.empty()) {
      reference = result.out;
    } else {
      EXPECT(result.out == reference,
             "detect output differs at parallelism " + std::to_string(parallelism));
    }
  }
  EXPECT(!reference.empty() && reference.find("\"block_id\"") != std::string::npos,
         "detect produced no outcomes");

  // split --seed 7 stable across runs
  std::mt19937_64 rng(31337);
  const auto ten_path = dir / "ten.jsonl";
  {
    Corpus corpus;
    for (int i = 0; i < 10; ++i) {
      corpus.blocks.push_back(attackdet::testing::random_block(rng, "s" + std::to_string(i), 4, 12));
    }
    std::ofstream out(ten_path, std::ios::binary);
    write_corpus(corpus, out);
  }
  const std::string prefix = (dir / "split").string();
  const std::string args =
      "split --ratios 0.8,0.1,0.1 --seed 7 --out-prefix " + prefix + " " + ten_path.string();
  const RunResult first = run_cli(args);
  EXPECT(first.exit_code == 0, "split exited nonzero");
  const std::string train_a = read_file(prefix + ".train.jsonl");
  const std::string val_a = read_file(prefix + ".val.jsonl");
  const std::string test_a = read_file(prefix + ".test.jsonl");
  const RunResult second = run_cli(args);
  EXPECT(second.out == first.out, "split summaries differ across runs");
  EXPECT(read_file(prefix + ".train.jsonl") == train_a, "train split differs across runs");
  EXPECT(read_file(prefix + ".val.jsonl") == val_a, "val split differs across runs");
  EXPECT(read_file(prefix + ".test.jsonl") == test_a, "test split differs across runs");
}

void criterion_flat_adapter() {
  const auto dir = scratch_dir();

  // fixture reproducing the published 1,430 / 19,190 / 4,163 class counts
  const auto hate_path = dir / "hate_speech.csv";
  {
    std::ofstream out(hate_path, std::ios::binary);
    out << "class,tweet\n";
    for (int i = 0; i < 1430; ++i) out << "0,hate fixture row\n";
    for (int i = 0; i < 19190; ++i) out << "1,offensive fixture row\n";
    for (int i = 0; i < 4163; ++i) out << "2,benign fixture row\n";
  }
  LabelRecord hate = null_record();
  hate.presence = AttackPresence::Explicit;
  hate.form = AttackForm::Targeted;
  hate.target = AttackTarget::Group;
  hate.type = AttackType::Discriminatory;
  hate.intent = AttackIntent::HateSpeech;
  hate.hazard = 80;
  hate.confidence = 90;
  LabelRecord offensive = hate;
  offensive.target = AttackTarget::Individuals;
  offensive.type = AttackType::Abusive;
  offensive.intent = AttackIntent::PersonalAttacks;
  offensive.hazard = 50;
  const nlohmann::json hate_mapping = {
      {"text_column", "tweet"},
      {"source", "hate-speech-en"},
      {"rules",
       {{{"name", "Hate Speech"}, {"when", {{"class", "0"}}}, {"label", record_to_json(hate)}},
        {{"name", "Offensive Language"},
         {"when", {{"class", "1"}}},
         {"label", record_to_json(offensive)}},
        {{"name", "None"}, {"when", {{"class", "2"}}}, {"label", record_to_json(null_record())}}}},
  };
  FlatReport report;
  const Corpus corpus = import_flat(hate_path, hate_mapping, &report);
  EXPECT(corpus.blocks.size() == 24783, "row count not preserved");
  EXPECT(report.rows == 24783, "report row count wrong");
  const std::vector<double> expected_shares = {5.77, 77.43, 16.80};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT(std::abs(report.categories[i].percent - expected_shares[i]) <= 0.01,
           report.categories[i].name + ": share " +
               std::to_string(report.categories[i].percent) + " not within 0.01pp of " +
               std::to_string(expected_shares[i]));
  }

  // InToxiCat-style mapping covering all four category names
  const auto intoxicat_path = dir / "intoxicat.csv";
  {
    std::ofstream out(intoxicat_path, std::ios::binary);
    out << "text,is_abusive,is_explicit,is_implicit\n";
    out << "explicit sample,1,1,0\n";
    out << "implicit sample,1,0,1\n";
    out << "abusive residual,1,0,0\n";
    out << "clean sample,0,0,0\n";
  }
  LabelRecord exp = null_record();
  exp.presence = AttackPresence::Explicit;
  LabelRecord imp = null_record();
  imp.presence = AttackPresence::Implicit;
  const nlohmann::json intoxicat_mapping = {
      {"text_column", "text"},
      {"source", "intoxicat-ca"},
      {"rules",
       {{{"name", "is_explicit"},
         {"when", {{"is_abusive", "1"}, {"is_explicit", "1"}}},
         {"label", record_to_json(exp)}},
        {{"name", "is_implicit"},
         {"when", {{"is_abusive", "1"}, {"is_implicit", "1"}}},
         {"label", record_to_json(imp)}},
        {{"name", "is_abusive"}, {"when", {{"is_abusive", "1"}}}, {"label", record_to_json(exp)}},
        {{"name", "not_abusive"},
         {"when", {{"is_abusive", "0"}}},
         {"label", record_to_json(null_record())}}}},
  };
  FlatReport intoxicat_report;
  const Corpus intoxicat = import_flat(intoxicat_path, intoxicat_mapping, &intoxicat_report);
  EXPECT(intoxicat.blocks.size() == 4, "InToxiCat fixture row count");
  const std::vector<std::string> names = {"is_explicit", "is_implicit", "is_abusive",
                                          "not_abusive"};
  EXPECT(intoxicat_report.categories.size() == 4, "mapping must cover four categories");
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT(intoxicat_report.categories[i].name == names[i], "category name mismatch");
    EXPECT(intoxicat_report.categories[i].count == 1, "category count mismatch");
  }
  EXPECT(intoxicat.gold.at({"row1", {1, 1}}).presence == AttackPresence::Explicit,
         "is_explicit mapping");
  EXPECT(intoxicat.gold.at({"row2", {1, 1}}).presence == AttackPresence::Implicit,
         "is_implicit mapping");
  EXPECT(intoxicat.gold.at({"row4", {1, 1}}).presence == AttackPresence::None,
         "not_abusive mapping");
}

}  // namespace

int main() {
  criterion(1, "context selection matches the exhaustive-scan oracle under both policies",
            criterion_context_oracle);
  criterion(2, "routing soundness on the 30-comment lexicon corpus", criterion_routing);
  criterion(3, "published label-distribution shares reproduced within 0.05pp",
            criterion_table2_statistics);
  criterion(4, "cohen kappa matches the direct formula on all small 2x2 tables",
            criterion_kappa_oracle);
  criterion(5, "all-in-one bound and pearson oracle over 10,000 random pairs",
            criterion_metric_properties);
  criterion(6, "thread-block and analyzer-reply round-trips over 1,000 instances each",
            criterion_round_trips);
  criterion(7, "module partition sizes and membership verified by recount", criterion_partition);
  criterion(8, "detect is byte-identical across parallelism 1/4/16; split is seed-stable",
            criterion_determinism);
  criterion(9, "flat-dataset adapter reproduces published shares and the four-way mapping",
            criterion_flat_adapter);

  if (failures == 0) {
    std::printf("all 9 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", failures);
  return 1;
}
