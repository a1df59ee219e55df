#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <iostream>

#include "attackdet/dataset_io.hpp"
#include "attackdet/evaluation.hpp"
#include "attackdet/pipeline.hpp"
#include "attackdet/version.hpp"

using namespace attackdet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void stamp(nlohmann::json& j) {
  j["version"] = kVersion;
  j["schema_version"] = kSchemaVersion;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonLoad {
  std::string corpus_path;
  std::string input_format = "thread-jsonl";
  std::string mapping_path;
  int max_depth = 64;
  std::size_t max_nodes = 100000;

  void attach(CLI::App* cmd) {
    cmd->add_option("corpus", corpus_path, "thread-block JSONL (or flat CSV) file")->required();
    cmd->add_option("--input-format", input_format)
        ->check(CLI::IsMember({"thread-jsonl", "flat-csv"}));
    cmd->add_option("--mapping", mapping_path, "mapping config for flat-csv input");
    cmd->add_option("--max-depth", max_depth, "reject blocks deeper than this");
    cmd->add_option("--max-nodes", max_nodes, "reject blocks larger than this");
  }

  Corpus load() const {
    Corpus corpus;
    if (input_format == "flat-csv") {
      if (mapping_path.empty()) {
        throw UsageError("--input-format flat-csv requires --mapping");
      }
      std::ifstream in(mapping_path);
      if (!in) raise(Errc::ConfigError, "cannot read " + mapping_path);
      nlohmann::json mapping;
      try {
        in >> mapping;
      } catch (const nlohmann::json::parse_error& e) {
        raise(Errc::ParseError, mapping_path + ": " + e.what());
      }
      FlatReport report;
      corpus = import_flat(corpus_path, mapping, &report);
      for (const auto& category : report.categories) {
        std::ostringstream line;
        line << "imported " << category.name << ": " << category.count << " rows ("
             << std::fixed << std::setprecision(2) << category.percent << "%)";
        std::cerr << line.str() << '\n';
      }
    } else {
      corpus = load_corpus(corpus_path, CorpusFormat::ThreadJsonl);
    }
    enforce_limits(corpus, max_depth, max_nodes);
    return corpus;
  }
};

ContextPolicy parse_policy_flag(const std::string& raw) {
  const auto policy = policy_from_string(raw);
  if (!policy) throw UsageError("--policy must be same-level or same-parent");
  return *policy;
}

std::array<double, 3> parse_ratios(const std::string& raw) {
  std::array<double, 3> ratios{};
  std::istringstream in(raw);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ',')) {
    if (i >= 3) throw UsageError("--ratios takes exactly three comma-separated numbers");
    try {
      ratios[i++] = std::stod(part);
    } catch (const std::exception&) {
      throw UsageError("--ratios: \"" + part + "\" is not a number");
    }
  }
  if (i != 3) throw UsageError("--ratios takes exactly three comma-separated numbers");
  for (double r : ratios) {
    if (!(r > 0.0)) throw UsageError("--ratios must all be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw UsageError("--ratios must sum to 1");
  }
  return ratios;
}

std::vector<std::string> read_id_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ConfigError, "cannot read " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

// One label per item: plain lines by default, a named CSV column, or a JSONL
// field.
std::vector<std::string> read_label_column(const std::string& path, const std::string& csv_column,
                                           const std::string& jsonl_field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::ConfigError, "cannot read " + path);
  std::vector<std::string> labels;
  if (!jsonl_field.empty()) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        raise(Errc::ParseError, path + " line " + std::to_string(line_no) + ": " + e.what());
      }
      if (!j.contains(jsonl_field)) {
        raise(Errc::ParseError, path + " line " + std::to_string(line_no) + ": no field \"" +
                                    jsonl_field + "\"");
      }
      labels.push_back(j[jsonl_field].is_string() ? j[jsonl_field].get<std::string>()
                                                  : j[jsonl_field].dump());
    }
    return labels;
  }
  if (!csv_column.empty()) {
    const auto rows = parse_csv(in);
    if (rows.empty()) raise(Errc::ParseError, path + ": empty CSV");
    const auto& header = rows.front();
    const auto it = std::find(header.begin(), header.end(), csv_column);
    if (it == header.end()) raise(Errc::ParseError, path + ": no column \"" + csv_column + "\"");
    const auto idx = static_cast<std::size_t>(it - header.begin());
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (idx >= rows[r].size()) {
        raise(Errc::ParseError, path + " row " + std::to_string(r + 1) + ": too few fields");
      }
      labels.push_back(rows[r][idx]);
    }
    return labels;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  return labels;
}

std::string_view dimension_display_name(Dimension dim) {
  switch (dim) {
    case Dimension::AttackOrNot: return "Attack or not";
    case Dimension::AttackForm: return "Attack form";
    case Dimension::AttackTarget: return "Attack target";
    case Dimension::AttackType: return "Attack type";
    case Dimension::AttackIntent: return "Attack intent";
  }
  return "";
}

int run_validate(const CommonLoad& common) {
  const Corpus corpus = common.load();
  std::size_t count = 0;
  for (const auto& block : corpus.blocks) {
    for (const auto& v : validate_block(block)) {
      nlohmann::json line = {{"block_id", block.block_id()},
                             {"rule", v.rule},
                             {"subject", v.subject},
                             {"detail", v.detail}};
      std::cout << line.dump() << '\n';
      ++count;
    }
  }
  for (const auto& [key, record] : corpus.gold) {
    for (const auto& v : validate_record(record)) {
      nlohmann::json line = {{"block_id", key.first},
                             {"level", key.second.level},
                             {"seq", key.second.seq},
                             {"rule", v.rule},
                             {"detail", v.detail}};
      std::cout << line.dump() << '\n';
      ++count;
    }
  }
  std::cout << count << " violations" << std::endl;
  return count == 0 ? kExitOk : kExitFailure;
}

int run_context(const CommonLoad& common, const std::string& block_id, int level, int seq,
                ContextPolicy policy) {
  const Corpus corpus = common.load();
  const ThreadBlock* block = corpus.find_block(block_id);
  if (block == nullptr) {
    raise(Errc::ValidationError, "no block with id \"" + block_id + "\"");
  }
  const ContextWindow window = select_context(*block, Coordinate{level, seq}, policy);
  std::cout << render_context(window) << std::endl;
  return kExitOk;
}

int run_detect(const CommonLoad& common, const std::string& config_path,
               const std::string& templates_dir, const std::string& policy_flag, int parallelism,
               bool strict) {
  PipelineConfig config = load_pipeline_config(config_path);
  if (!policy_flag.empty()) config.context_policy = parse_policy_flag(policy_flag);
  if (parallelism > 0) config.parallelism = parallelism;
  if (strict) config.strict = true;
  const TemplateSet templates =
      templates_dir.empty() ? TemplateSet::builtin() : TemplateSet::load_dir(templates_dir);

  const Pipeline pipeline(config, templates);
  for (const auto& warning : pipeline.warnings()) {
    std::cerr << "warning: " << warning << '\n';
  }

  const Corpus corpus = common.load();
  const CorpusResult result = pipeline.detect_corpus(corpus.blocks);
  for (const auto& outcome : result.outcomes) {
    std::cout << outcome_to_jsonl(outcome) << '\n';
  }
  std::cout.flush();

  nlohmann::json summary = {{"total", result.summary.total},
                            {"explicit", result.summary.explicit_count},
                            {"implicit", result.summary.implicit_count},
                            {"none", result.summary.none_count},
                            {"diagnostics", result.summary.diagnostics}};
  stamp(summary);
  std::cerr << summary.dump() << '\n';
  for (const auto& diagnostic : result.diagnostics) {
    std::cerr << "diagnostic: " << diagnostic << '\n';
  }
  return kExitOk;
}

int run_evaluate(const std::string& outcomes_path, const CommonLoad& gold,
                 const std::string& format, bool attack_only_pearson) {
  std::ifstream in(outcomes_path, std::ios::binary);
  if (!in) raise(Errc::ConfigError, "cannot read " + outcomes_path);
  std::vector<PipelineOutcome> outcomes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      outcomes.push_back(outcome_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      raise(Errc::ParseError,
            outcomes_path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  const Corpus corpus = gold.load();
  std::map<GoldKey, LabelRecord> gold_map(corpus.gold.begin(), corpus.gold.end());
  const EvalReport report = evaluate(outcomes, gold_map, attack_only_pearson);
  if (format == "table") {
    std::cout << report_to_table(report);
  } else {
    nlohmann::json j = report_to_json(report);
    stamp(j);
    std::cout << j.dump() << '\n';
  }
  return kExitOk;
}

int run_split(const CommonLoad& common, const std::string& ratios_flag, std::uint64_t seed,
              const std::string& designated_path, const std::string& out_prefix) {
  const auto ratios = parse_ratios(ratios_flag);
  const Corpus corpus = common.load();
  std::vector<std::string> designated;
  const SplitResult split =
      designated_path.empty()
          ? split_corpus(corpus, ratios, seed)
          : split_corpus(corpus, ratios, seed, &(designated = read_id_list(designated_path)));

  const auto write_part = [&](const Corpus& part, const char* name) {
    const std::string path = out_prefix + "." + name + ".jsonl";
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::ConfigError, "cannot write " + path);
    write_corpus(part, out);
    return part.blocks.size();
  };
  nlohmann::json summary = {{"train", write_part(split.train, "train")},
                            {"val", write_part(split.val, "val")},
                            {"test", write_part(split.test, "test")},
                            {"seed", seed}};
  stamp(summary);
  std::cout << summary.dump() << std::endl;
  return kExitOk;
}

int run_partition(const CommonLoad& common, ContextPolicy policy, const std::string& out_dir) {
  const Corpus corpus = common.load();
  const ModulePartition partition = partition_for_modules(corpus, policy);
  write_partition(partition, policy, out_dir);
  nlohmann::json summary = {{"explicit_detector", partition.explicit_detector_set.size()},
                            {"explicit_analyzer", partition.explicit_analyzer_set.size()},
                            {"implicit_detector", partition.implicit_detector_set.size()},
                            {"implicit_analyzer", partition.implicit_analyzer_set.size()},
                            {"out_dir", out_dir}};
  stamp(summary);
  std::cout << summary.dump() << std::endl;
  return kExitOk;
}

int run_kappa(const std::string& path_a, const std::string& path_b, const std::string& csv_column,
              const std::string& jsonl_field) {
  const auto a = read_label_column(path_a, csv_column, jsonl_field);
  const auto b = read_label_column(path_b, csv_column, jsonl_field);
  const KappaResult result = cohen_kappa(a, b);
  nlohmann::json j = {{"kappa", result.kappa},
                      {"consistency_rate", result.consistency_rate},
                      {"n", a.size()}};
  stamp(j);
  std::cout << j.dump() << std::endl;
  return kExitOk;
}

int run_stats(const CommonLoad& common, const std::string& format) {
  const Corpus corpus = common.load();
  std::vector<LabelRecord> records;
  records.reserve(corpus.gold.size());
  for (const auto& [key, record] : corpus.gold) records.push_back(record);
  const DistributionReport report = label_distribution(records);

  if (format == "json") {
    nlohmann::json j;
    j["total"] = report.total;
    for (const auto& [dim, rows] : report.categorical) {
      nlohmann::json dim_rows = nlohmann::json::array();
      for (const auto& row : rows) {
        dim_rows.push_back(
            {{"value", row.value}, {"count", row.count}, {"percent", row.percent}});
      }
      j[std::string(dimension_key(dim))] = std::move(dim_rows);
    }
    j["hazard_level"] = {{"mean", report.hazard.mean},
                         {"std_dev", report.hazard.std_dev},
                         {"max", report.hazard.max}};
    j["confidence_level"] = {{"mean", report.confidence.mean},
                             {"std_dev", report.confidence.std_dev},
                             {"max", report.confidence.max}};
    stamp(j);
    std::cout << j.dump() << std::endl;
    return kExitOk;
  }

  std::ostringstream os;
  os << std::left << std::setw(18) << "Label" << std::setw(20) << "Distribution"
     << std::right << std::setw(10) << "Count" << std::setw(10) << "Percent" << '\n';
  for (Dimension dim : kDimensions) {
    bool first = true;
    for (const auto& row : report.categorical.at(dim)) {
      os << std::left << std::setw(18) << (first ? dimension_display_name(dim) : "")
         << std::setw(20) << row.value << std::right << std::setw(10) << row.count;
      std::ostringstream percent;
      percent << std::fixed << std::setprecision(1) << row.percent << '%';
      os << std::setw(10) << percent.str() << '\n';
      first = false;
    }
  }
  const auto numeric = [&](const char* name, const NumericSummary& s) {
    os << std::left << std::setw(18) << name << std::setw(20) << "Average" << std::right
       << std::setw(10) << std::fixed << std::setprecision(2) << s.mean << '\n';
    os << std::left << std::setw(18) << "" << std::setw(20) << "Std. dev." << std::right
       << std::setw(10) << std::fixed << std::setprecision(2) << s.std_dev << '\n';
    os << std::left << std::setw(18) << "" << std::setw(20) << "Max" << std::right
       << std::setw(10) << std::fixed << std::setprecision(2) << s.max << '\n';
  };
  numeric("Hazard level", report.hazard);
  numeric("Confidence level", report.confidence);
  std::cout << os.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fine-grained verbal-attack detection over tree-structured comment threads"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.set_config("--config");

  CommonLoad validate_load;
  auto* validate_cmd = app.add_subcommand("validate", "check corpus invariants");
  validate_load.attach(validate_cmd);

  CommonLoad context_load;
  std::string context_block;
  int context_level = 0, context_seq = 0;
  std::string context_policy = "same-level";
  auto* context_cmd = app.add_subcommand("context", "print the rendered context window");
  context_cmd->add_option("--block", context_block)->required();
  context_cmd->add_option("--level", context_level)->required();
  context_cmd->add_option("--seq", context_seq)->required();
  context_cmd->add_option("--policy", context_policy, "same-level or same-parent");
  context_load.attach(context_cmd);

  CommonLoad detect_load;
  std::string detect_config, detect_templates, detect_policy;
  int detect_parallelism = 0;
  bool detect_strict = false;
  auto* detect_cmd = app.add_subcommand("detect", "run the detection pipeline");
  detect_cmd->add_option("--backend-config", detect_config, "pipeline config JSON")->required();
  detect_cmd->add_option("--templates", detect_templates, "prompt template directory");
  detect_cmd->add_option("--policy", detect_policy, "context policy override");
  detect_cmd->add_option("--parallelism", detect_parallelism, "concurrent comment evaluations");
  detect_cmd->add_flag("--strict", detect_strict, "strict replies and size ordering");
  detect_load.attach(detect_cmd);

  CommonLoad eval_gold;
  std::string eval_outcomes, eval_format = "json";
  bool eval_attack_only = false;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score outcomes against gold labels");
  evaluate_cmd->add_option("outcomes", eval_outcomes, "outcome JSONL file")->required();
  evaluate_cmd->add_option("--gold", eval_gold.corpus_path, "gold-bearing thread JSONL")
      ->required();
  evaluate_cmd->add_option("--format", eval_format)->check(CLI::IsMember({"json", "table"}));
  evaluate_cmd->add_flag("--attack-only-pearson", eval_attack_only,
                         "restrict correlations to gold attacks");

  CommonLoad split_load;
  std::string split_ratios = "0.8,0.1,0.1", split_designated, split_prefix;
  std::uint64_t split_seed = 0;
  auto* split_cmd = app.add_subcommand("split", "seeded train/val/test split");
  split_cmd->add_option("--ratios", split_ratios, "train,val,test");
  split_cmd->add_option("--seed", split_seed)->required();
  split_cmd->add_option("--designated-test", split_designated, "file of test block ids");
  split_cmd->add_option("--out-prefix", split_prefix)->required();
  split_load.attach(split_cmd);

  CommonLoad partition_load;
  std::string partition_policy = "same-level", partition_dir;
  auto* partition_cmd = app.add_subcommand("partition", "write the four module sub-datasets");
  partition_cmd->add_option("--policy", partition_policy);
  partition_cmd->add_option("--out-dir", partition_dir)->required();
  partition_load.attach(partition_cmd);

  std::string kappa_a, kappa_b, kappa_column, kappa_field;
  auto* kappa_cmd = app.add_subcommand("kappa", "agreement between two label columns");
  kappa_cmd->add_option("a", kappa_a)->required();
  kappa_cmd->add_option("b", kappa_b)->required();
  kappa_cmd->add_option("--column", kappa_column, "CSV column name");
  kappa_cmd->add_option("--field", kappa_field, "JSONL field name");

  CommonLoad stats_load;
  std::string stats_format = "table";
  auto* stats_cmd = app.add_subcommand("stats", "gold label distribution");
  stats_cmd->add_option("--format", stats_format)->check(CLI::IsMember({"json", "table"}));
  stats_load.attach(stats_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate_cmd) return run_validate(validate_load);
    if (*context_cmd) {
      return run_context(context_load, context_block, context_level, context_seq,
                         parse_policy_flag(context_policy));
    }
    if (*detect_cmd) {
      return run_detect(detect_load, detect_config, detect_templates, detect_policy,
                        detect_parallelism, detect_strict);
    }
    if (*evaluate_cmd) {
      return run_evaluate(eval_outcomes, eval_gold, eval_format, eval_attack_only);
    }
    if (*split_cmd) {
      return run_split(split_load, split_ratios, split_seed, split_designated, split_prefix);
    }
    if (*partition_cmd) {
      return run_partition(partition_load, parse_policy_flag(partition_policy), partition_dir);
    }
    if (*kappa_cmd) return run_kappa(kappa_a, kappa_b, kappa_column, kappa_field);
    if (*stats_cmd) return run_stats(stats_load, stats_format);
  } catch (const UsageError& e) {
    std::cerr << e.what() << '\n' << app.help() << std::endl;
    return kExitUsage;
  } catch (const Error& e) {
    nlohmann::json error = {{"error", {{"code", errc_name(e.code())}, {"message", e.what()}}}};
    std::cerr << error.dump() << std::endl;
    return kExitFailure;
  } catch (const std::exception& e) {
    nlohmann::json error = {{"error", {{"code", "Internal"}, {"message", e.what()}}}};
    std::cerr << error.dump() << std::endl;
    return kExitFailure;
  }
  return kExitUsage;
}
