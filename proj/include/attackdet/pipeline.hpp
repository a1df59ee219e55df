#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attackdet/context_selector.hpp"
#include "attackdet/model_backend.hpp"
#include "attackdet/taxonomy.hpp"
#include "attackdet/thread_model.hpp"

namespace attackdet {

struct PipelineConfig {
  std::map<ModelRole, BackendConfig> backends;  // all four roles must be bound
  ContextPolicy context_policy = ContextPolicy::SameLevel;
  int parallelism = 1;
  ReplyFormat reply_format = ReplyFormat::Lines;
  bool enforce_size_order = true;   // explicit models must not exceed implicit ones
  bool strict = false;              // size-order violations and reply slack become errors
  bool capture_text = false;        // keep full request/reply text in traces
  double null_confidence = 100.0;   // confidence of automatically nulled records
  std::optional<std::size_t> max_context_entries;
};

// Reads a backend-config JSON file ({"roles": {...}, optional policy /
// parallelism / reply_format / enforce_size_order / null_confidence}).
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});

struct StageTrace {
  ModelRole role = ModelRole::ExplicitDetector;
  std::string request_digest;  // fnv1a-64 hex of the rendered prompt
  std::string reply_digest;
  double latency_ms = 0.0;
  // Populated only when PipelineConfig::capture_text is set.
  std::optional<std::string> request_text;
  std::optional<std::string> reply_text;
};

struct PipelineOutcome {
  std::string block_id;
  Coordinate coord;
  std::optional<CheckResult> check1;  // present iff stage 1 completed
  std::optional<CheckResult> check2;  // present iff check1 was Negative and stage ran
  std::optional<LabelRecord> record;  // absent on diagnostic outcomes
  std::vector<StageTrace> trace;      // stages executed, in order
  std::optional<std::string> error;   // diagnostic outcomes only

  bool ok() const { return record.has_value(); }
};

struct CorpusSummary {
  std::size_t total = 0;
  std::size_t explicit_count = 0;
  std::size_t implicit_count = 0;
  std::size_t none_count = 0;
  std::size_t diagnostics = 0;
};

struct CorpusResult {
  std::vector<PipelineOutcome> outcomes;  // (block_id, level, seq) order
  CorpusSummary summary;
  std::vector<std::string> diagnostics;  // one line per failed comment
};

// Figure-style routing: explicit detection on the bare comment; on a negative
// verdict, implicit detection over the selected context; analyzers only for
// positive verdicts; everything else gets the null record.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, TemplateSet templates);
  // Injection point for pre-built (e.g. test) backends.
  Pipeline(PipelineConfig config, TemplateSet templates,
           std::map<ModelRole, std::shared_ptr<Backend>> backends);

  const PipelineConfig& config() const { return config_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Parse failures become diagnostic outcomes; backend failures propagate as
  // errors annotated with the failing role.
  PipelineOutcome detect_comment(const ThreadBlock& block, Coordinate coord) const;

  // One outcome per node in (level, seq) order; per-comment failures of any
  // kind are isolated into diagnostic outcomes.
  std::vector<PipelineOutcome> detect_block(const ThreadBlock& block) const;

  // Up to config.parallelism concurrent comment evaluations; output and
  // summary are deterministic in (block_id, level, seq) order.
  CorpusResult detect_corpus(std::span<const ThreadBlock> blocks) const;

 private:
  void check_size_order();
  std::string invoke_stage(ModelRole role, const PromptRequest& request,
                           std::vector<StageTrace>& trace) const;
  LabelRecord analyzed_record(ModelRole analyzer, const std::string& reply,
                              AttackPresence routed) const;

  PipelineConfig config_;
  TemplateSet templates_;
  std::map<ModelRole, std::shared_ptr<Backend>> backends_;
  std::vector<std::string> warnings_;
};

std::string digest_hex(std::string_view bytes);  // fnv1a-64

// Outcome JSONL: block_id, level, seq, check1/check2 verdicts, the full label
// record (or null plus an error string), and per-stage digests. Latency and
// captured text are runtime-only and never serialized.
nlohmann::json outcome_to_json(const PipelineOutcome& outcome);
std::string outcome_to_jsonl(const PipelineOutcome& outcome);
PipelineOutcome outcome_from_json(const nlohmann::json& j);

}  // namespace attackdet
