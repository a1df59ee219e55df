#include "attackdet/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

namespace attackdet {

namespace {

bool parse_failure(Errc code) {
  switch (code) {
    case Errc::MalformedReply:
    case Errc::MissingField:
    case Errc::UnknownLabel:
    case Errc::RangeViolation:
    case Errc::ValidationError:
      return true;
    default:
      return false;
  }
}

std::string verdict_string(Verdict v) { return v == Verdict::Positive ? "positive" : "negative"; }

Verdict verdict_from_string(const std::string& s) {
  if (s == "positive") return Verdict::Positive;
  if (s == "negative") return Verdict::Negative;
  raise(Errc::ParseError, "unknown verdict \"" + s + "\"");
}

}  // namespace

std::string digest_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir) {
  if (!j.is_object()) raise(Errc::ConfigError, "pipeline config must be a JSON object");
  PipelineConfig cfg;
  if (j.contains("policy")) {
    const auto policy = policy_from_string(j["policy"].get<std::string>());
    if (!policy) raise(Errc::ConfigError, "policy must be same-level or same-parent");
    cfg.context_policy = *policy;
  }
  cfg.parallelism = j.value("parallelism", 1);
  if (cfg.parallelism < 1) raise(Errc::ConfigError, "parallelism must be >= 1");
  if (j.contains("reply_format")) {
    const std::string fmt = j["reply_format"].get<std::string>();
    if (fmt == "lines") {
      cfg.reply_format = ReplyFormat::Lines;
    } else if (fmt == "json") {
      cfg.reply_format = ReplyFormat::Json;
    } else {
      raise(Errc::ConfigError, "reply_format must be lines or json");
    }
  }
  cfg.enforce_size_order = j.value("enforce_size_order", true);
  cfg.strict = j.value("strict", false);
  cfg.null_confidence = j.value("null_confidence", 100.0);
  if (j.contains("max_context_entries") && !j["max_context_entries"].is_null()) {
    cfg.max_context_entries = j["max_context_entries"].get<std::size_t>();
  }

  if (!j.contains("roles") || !j["roles"].is_object()) {
    raise(Errc::ConfigError, "pipeline config requires a \"roles\" object");
  }
  for (const auto& [key, value] : j["roles"].items()) {
    const auto role = role_from_key(key);
    if (!role) raise(Errc::ConfigError, "unknown role \"" + key + "\"");
    cfg.backends[*role] = backend_config_from_json(value, base_dir);
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ConfigError, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    raise(Errc::ParseError, path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j, path.parent_path());
}

Pipeline::Pipeline(PipelineConfig config, TemplateSet templates)
    : config_(std::move(config)), templates_(std::move(templates)) {
  for (ModelRole role : kModelRoles) {
    const auto it = config_.backends.find(role);
    if (it == config_.backends.end()) {
      raise(Errc::ConfigError, "no backend bound for role " + std::string(role_key(role)));
    }
    backends_[role] = make_backend(it->second);
  }
  check_size_order();
}

Pipeline::Pipeline(PipelineConfig config, TemplateSet templates,
                   std::map<ModelRole, std::shared_ptr<Backend>> backends)
    : config_(std::move(config)), templates_(std::move(templates)), backends_(std::move(backends)) {
  for (ModelRole role : kModelRoles) {
    if (!backends_.contains(role)) {
      raise(Errc::ConfigError, "no backend bound for role " + std::string(role_key(role)));
    }
  }
  check_size_order();
}

void Pipeline::check_size_order() {
  if (!config_.enforce_size_order) return;
  const auto declared = [&](ModelRole role) -> std::optional<double> {
    const auto it = backends_.find(role);
    return it == backends_.end() ? std::nullopt : it->second->config().declared_size;
  };
  const auto exd = declared(ModelRole::ExplicitDetector);
  const auto imd = declared(ModelRole::ImplicitDetector);
  const auto exa = declared(ModelRole::ExplicitAnalyzer);
  const auto ima = declared(ModelRole::ImplicitAnalyzer);
  if (!exd || !imd || !exa || !ima) return;  // sizes are metadata; never inferred

  const auto report = [&](std::string_view small, std::string_view large, double s, double l) {
    std::ostringstream os;
    os << "size order violated: " << small << " (" << s << ") exceeds " << large << " (" << l
       << ")";
    if (config_.strict) raise(Errc::ConfigError, os.str());
    warnings_.push_back(os.str());
  };
  if (*exd > *imd) report("explicit_detector", "implicit_detector", *exd, *imd);
  if (*exa > *ima) report("explicit_analyzer", "implicit_analyzer", *exa, *ima);
}

std::string Pipeline::invoke_stage(ModelRole role, const PromptRequest& request,
                                   std::vector<StageTrace>& trace) const {
  StageTrace entry;
  entry.role = role;
  entry.request_digest = digest_hex(request.rendered);
  if (config_.capture_text) entry.request_text = request.rendered;
  const auto start = std::chrono::steady_clock::now();
  std::string reply;
  try {
    reply = backends_.at(role)->invoke(request);
  } catch (const Error& e) {
    trace.push_back(std::move(entry));
    throw Error(e.code(), std::string(role_key(role)) + ": " + e.what());
  }
  entry.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  entry.reply_digest = digest_hex(reply);
  if (config_.capture_text) entry.reply_text = reply;
  trace.push_back(std::move(entry));
  return reply;
}

LabelRecord Pipeline::analyzed_record(ModelRole analyzer, const std::string& reply,
                                      AttackPresence routed) const {
  LabelRecord record = parse_analyzer_reply(reply, config_.reply_format, config_.strict);
  if (record.presence != routed) {
    if (config_.strict) {
      raise(Errc::ValidationError,
            std::string(role_key(analyzer)) + " presence \"" + std::string(to_string(record.presence)) +
                "\" disagrees with the routed class \"" + std::string(to_string(routed)) + "\"");
    }
    record.presence = routed;  // routing is authoritative
  }
  return record;
}

PipelineOutcome Pipeline::detect_comment(const ThreadBlock& block, Coordinate coord) const {
  const CommentNode& node = block.node_at(coord);
  PipelineOutcome outcome;
  outcome.block_id = block.block_id();
  outcome.coord = coord;

  const auto diagnose = [&](const Error& e) {
    outcome.record.reset();
    outcome.error = e.what();
    return outcome;
  };

  try {
    // Stage 1: explicit detection on the bare comment.
    const auto exd_request =
        build_prompt(templates_, ModelRole::ExplicitDetector, node.text, nullptr, nullptr);
    const std::string exd_reply =
        invoke_stage(ModelRole::ExplicitDetector, exd_request, outcome.trace);
    outcome.check1 = parse_detector_reply(ModelRole::ExplicitDetector, exd_reply, config_.strict);

    if (outcome.check1->verdict == Verdict::Positive) {
      const auto exa_request = build_prompt(templates_, ModelRole::ExplicitAnalyzer, node.text,
                                            nullptr, &*outcome.check1);
      const std::string exa_reply =
          invoke_stage(ModelRole::ExplicitAnalyzer, exa_request, outcome.trace);
      outcome.record =
          analyzed_record(ModelRole::ExplicitAnalyzer, exa_reply, AttackPresence::Explicit);
      return outcome;
    }

    // Stage 2: implicit detection over the selected context.
    const ContextWindow window =
        select_context(block, coord, config_.context_policy, config_.max_context_entries);
    const auto imd_request = build_prompt(templates_, ModelRole::ImplicitDetector, node.text,
                                          &window, &*outcome.check1);
    const std::string imd_reply =
        invoke_stage(ModelRole::ImplicitDetector, imd_request, outcome.trace);
    outcome.check2 = parse_detector_reply(ModelRole::ImplicitDetector, imd_reply, config_.strict);

    if (outcome.check2->verdict == Verdict::Positive) {
      const auto ima_request = build_prompt(templates_, ModelRole::ImplicitAnalyzer, node.text,
                                            &window, &*outcome.check2);
      const std::string ima_reply =
          invoke_stage(ModelRole::ImplicitAnalyzer, ima_request, outcome.trace);
      outcome.record =
          analyzed_record(ModelRole::ImplicitAnalyzer, ima_reply, AttackPresence::Implicit);
      return outcome;
    }

    outcome.record = null_record(config_.null_confidence);
    return outcome;
  } catch (const Error& e) {
    if (parse_failure(e.code())) return diagnose(e);
    throw;  // backend errors propagate, already annotated with the role
  }
}

std::vector<PipelineOutcome> Pipeline::detect_block(const ThreadBlock& block) const {
  std::vector<PipelineOutcome> outcomes;
  outcomes.reserve(block.nodes().size());
  for (const auto& node : block.nodes()) {
    try {
      outcomes.push_back(detect_comment(block, node.coord));
    } catch (const Error& e) {
      PipelineOutcome failed;
      failed.block_id = block.block_id();
      failed.coord = node.coord;
      failed.error = e.what();
      outcomes.push_back(std::move(failed));
    }
  }
  return outcomes;
}

CorpusResult Pipeline::detect_corpus(std::span<const ThreadBlock> blocks) const {
  struct Task {
    const ThreadBlock* block;
    Coordinate coord;
  };
  std::vector<Task> tasks;
  for (const auto& block : blocks) {
    for (const auto& node : block.nodes()) {
      tasks.push_back({&block, node.coord});
    }
  }

  std::vector<PipelineOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        outcomes[i] = detect_comment(*tasks[i].block, tasks[i].coord);
      } catch (const Error& e) {
        PipelineOutcome failed;
        failed.block_id = tasks[i].block->block_id();
        failed.coord = tasks[i].coord;
        failed.error = e.what();
        outcomes[i] = std::move(failed);
      }
    }
  };

  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(config_.parallelism, 1)),
                            std::max<std::size_t>(tasks.size(), 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const PipelineOutcome& a, const PipelineOutcome& b) {
                     return std::tie(a.block_id, a.coord) < std::tie(b.block_id, b.coord);
                   });

  CorpusResult result;
  result.summary.total = outcomes.size();
  for (const auto& o : outcomes) {
    if (!o.ok()) {
      result.summary.diagnostics++;
      result.diagnostics.push_back("block " + o.block_id + " " + to_string(o.coord) + ": " +
                                   o.error.value_or("unknown failure"));
      continue;
    }
    switch (o.record->presence) {
      case AttackPresence::Explicit: result.summary.explicit_count++; break;
      case AttackPresence::Implicit: result.summary.implicit_count++; break;
      case AttackPresence::None: result.summary.none_count++; break;
    }
  }
  result.outcomes = std::move(outcomes);
  return result;
}

nlohmann::json outcome_to_json(const PipelineOutcome& outcome) {
  nlohmann::json j;
  j["block_id"] = outcome.block_id;
  j["level"] = outcome.coord.level;
  j["seq"] = outcome.coord.seq;
  j["check1"] =
      outcome.check1 ? nlohmann::json(verdict_string(outcome.check1->verdict)) : nlohmann::json(nullptr);
  j["check2"] =
      outcome.check2 ? nlohmann::json(verdict_string(outcome.check2->verdict)) : nlohmann::json(nullptr);
  j["record"] = outcome.record ? record_to_json(*outcome.record) : nlohmann::json(nullptr);
  j["error"] = outcome.error ? nlohmann::json(*outcome.error) : nlohmann::json(nullptr);
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& stage : outcome.trace) {
    trace.push_back({{"role", std::string(role_key(stage.role))},
                     {"request", stage.request_digest},
                     {"reply", stage.reply_digest}});
  }
  j["trace"] = std::move(trace);
  return j;
}

std::string outcome_to_jsonl(const PipelineOutcome& outcome) {
  return outcome_to_json(outcome).dump();
}

PipelineOutcome outcome_from_json(const nlohmann::json& j) {
  if (!j.is_object()) raise(Errc::ParseError, "outcome record must be a JSON object");
  PipelineOutcome outcome;
  try {
    outcome.block_id = j.at("block_id").get<std::string>();
    outcome.coord = {j.at("level").get<int>(), j.at("seq").get<int>()};
    if (j.contains("check1") && !j["check1"].is_null()) {
      outcome.check1 = CheckResult{ModelRole::ExplicitDetector,
                                   verdict_from_string(j["check1"].get<std::string>()), ""};
    }
    if (j.contains("check2") && !j["check2"].is_null()) {
      outcome.check2 = CheckResult{ModelRole::ImplicitDetector,
                                   verdict_from_string(j["check2"].get<std::string>()), ""};
    }
    if (j.contains("record") && !j["record"].is_null()) {
      outcome.record = record_from_json(j["record"]);
    }
    if (j.contains("error") && !j["error"].is_null()) {
      outcome.error = j["error"].get<std::string>();
    }
    if (j.contains("trace")) {
      for (const auto& stage : j["trace"]) {
        StageTrace entry;
        if (const auto role = role_from_key(stage.value("role", ""))) entry.role = *role;
        entry.request_digest = stage.value("request", "");
        entry.reply_digest = stage.value("reply", "");
        outcome.trace.push_back(std::move(entry));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::ParseError, std::string("malformed outcome record: ") + e.what());
  }
  return outcome;
}

}  // namespace attackdet
