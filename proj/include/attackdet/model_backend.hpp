#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "attackdet/context_selector.hpp"
#include "attackdet/errors.hpp"
#include "attackdet/taxonomy.hpp"

namespace attackdet {

// The four model roles of the divide-and-conquer cascade.
enum class ModelRole { ExplicitDetector, ExplicitAnalyzer, ImplicitDetector, ImplicitAnalyzer };

inline constexpr std::array<ModelRole, 4> kModelRoles = {
    ModelRole::ExplicitDetector, ModelRole::ExplicitAnalyzer, ModelRole::ImplicitDetector,
    ModelRole::ImplicitAnalyzer};

std::string_view role_key(ModelRole role);  // "explicit_detector", ...
std::optional<ModelRole> role_from_key(std::string_view key);
bool is_detector(ModelRole role);

enum class Verdict { Positive, Negative };

// Detector verdict plus the raw reply it was parsed from.
struct CheckResult {
  ModelRole role = ModelRole::ExplicitDetector;  // detector roles only
  Verdict verdict = Verdict::Negative;
  std::string raw;

  bool operator==(const CheckResult&) const = default;
};

// One-line textual form of a check, embedded into downstream prompts.
std::string summarize_check(const CheckResult& check);

// Markers wrapping the context transcript inside rendered prompts; explicit
// role prompts never contain them.
inline constexpr std::string_view kContextBegin = "<context>";
inline constexpr std::string_view kContextEnd = "</context>";

struct PromptRequest {
  ModelRole role = ModelRole::ExplicitDetector;
  std::string comment_text;
  std::optional<std::string> context_transcript;  // implicit roles only (may be empty)
  std::optional<std::string> prior_check;         // absent for the explicit detector
  std::string template_id;
  std::string rendered;  // final prompt text sent to the backend

  bool operator==(const PromptRequest&) const = default;
};

// Prompt templates with {comment}, {context} and {prior_check} placeholders.
// Defaults are compiled in; a templates directory overrides them per role
// (file name "<role_key>.txt").
class TemplateSet {
 public:
  static TemplateSet builtin();
  static TemplateSet load_dir(const std::filesystem::path& dir);

  const std::string& text(ModelRole role) const;
  const std::string& id(ModelRole role) const;

 private:
  struct Entry {
    std::string id;
    std::string text;
  };
  std::map<ModelRole, Entry> entries_;
};

// Deterministic request construction. Explicit roles embed only the comment
// (plus the prior check for the analyzer); implicit roles embed the rendered
// context, the comment and the prior check. Throws Errc::RoleInputMismatch
// when the supplied inputs do not fit the role.
PromptRequest build_prompt(const TemplateSet& templates, ModelRole role, std::string_view comment,
                           const ContextWindow* window = nullptr,
                           const CheckResult* prior_check = nullptr);

enum class BackendKind { RemoteLLM, Lexicon };

struct BackendConfig {
  BackendKind kind = BackendKind::Lexicon;
  std::string endpoint;    // RemoteLLM: base URL, e.g. "https://api.example.com"
  std::string model_name;  // RemoteLLM: chat-completions model id
  std::string auth_env;    // environment variable holding the bearer token
  std::chrono::milliseconds timeout{30000};
  int retries = 2;         // transient-failure retries after the first attempt
  int max_in_flight = 8;   // RemoteLLM: concurrent request bound
  std::optional<double> declared_size;  // parameter count, metadata only
  nlohmann::json lexicon_rules;         // inline rules, or
  std::string rules_file;               // path to a JSON rules file
};

// Parses one role's backend object from a backend-config file. Relative
// rules_file paths are resolved against base_dir.
BackendConfig backend_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir = {});

class Backend {
 public:
  virtual ~Backend() = default;

  // One model invocation; returns the raw reply text. Throws
  // Errc::{BackendUnavailable, Timeout, AuthMissing, MalformedReply}.
  virtual std::string invoke(const PromptRequest& request) = 0;

  const BackendConfig& config() const { return config_; }

 protected:
  explicit Backend(BackendConfig config) : config_(std::move(config)) {}
  BackendConfig config_;
};

// Deterministic rule-based stand-in for the four models: substring rules for
// the detectors, fixed per-verdict records for the analyzers.
struct LexiconRules {
  std::vector<std::string> explicit_tokens;          // comment must contain one
  std::vector<std::string> implicit_trigger_tokens;  // context must contain one
  std::vector<std::string> implicit_marker_tokens;   // comment must contain one
  LabelRecord explicit_defaults;  // emitted by the explicit analyzer
  LabelRecord implicit_defaults;  // emitted by the implicit analyzer
};

LexiconRules lexicon_rules_from_json(const nlohmann::json& j);  // Errc::InvalidRuleSet
std::unique_ptr<Backend> lexicon_backend(const LexiconRules& rules, BackendConfig config = {});

// Instantiates the backend described by `config` (loads lexicon rules from
// file when needed).
std::unique_ptr<Backend> make_backend(const BackendConfig& config);

// Strictness for reply parsing; the tolerant mode is the default.
enum class ReplyFormat { Lines, Json };

// Tolerant: the first line containing a registered verdict phrase decides;
// Positive for the role's attack class, Negative otherwise. Strict: the whole
// reply must be exactly one phrase. Throws Errc::MalformedReply.
CheckResult parse_detector_reply(ModelRole role, std::string_view reply, bool strict = false);

// Parses the line-oriented `field: value` grammar (or a JSON object under
// ReplyFormat::Json) into a record guaranteed to pass validate_record.
// Throws Errc::{MissingField, UnknownLabel, RangeViolation, MalformedReply}.
LabelRecord parse_analyzer_reply(std::string_view reply, ReplyFormat format = ReplyFormat::Lines,
                                 bool strict = false);

// Canonical seven-line `field: value` form; parse_analyzer_reply inverts it.
std::string record_to_lines(const LabelRecord& record);

}  // namespace attackdet
