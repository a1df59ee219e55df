#include "attackdet/model_backend.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "remote_backend.hpp"

namespace attackdet {

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool contains_token(std::string_view text, std::string_view token) {
  if (token.empty()) return false;
  return ascii_lower(text).find(ascii_lower(token)) != std::string::npos;
}

bool contains_any(std::string_view text, const std::vector<std::string>& tokens) {
  return std::any_of(tokens.begin(), tokens.end(),
                     [&](const std::string& t) { return contains_token(text, t); });
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

void replace_all(std::string& text, std::string_view placeholder, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
}

std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

// Verdict phrases recognized in detector replies, mapped to their class.
struct VerdictPhrase {
  std::string_view phrase;
  AttackPresence cls;
};
constexpr std::array<VerdictPhrase, 3> kVerdictPhrases = {{
    {"explicit attack", AttackPresence::Explicit},
    {"implicit attack", AttackPresence::Implicit},
    {"no attack", AttackPresence::None},
}};

AttackPresence role_class(ModelRole role) {
  return (role == ModelRole::ExplicitDetector || role == ModelRole::ExplicitAnalyzer)
             ? AttackPresence::Explicit
             : AttackPresence::Implicit;
}

constexpr std::string_view kExplicitDetectorTemplate =
    "You screen social-media comments for explicit verbal attacks: offensive content that is\n"
    "recognizable from the comment text alone. Judge only the comment below.\n"
    "Answer with exactly one of: \"explicit attack\" or \"no attack\".\n"
    "\n"
    "Comment: {comment}\n"
    "\n"
    "Answer:\n";

constexpr std::string_view kAnalyzerFieldGuide =
    "Reply with exactly seven lines, one `field: value` pair per line:\n"
    "attack_or_not: Explicit attack | Implicit attack | No attack\n"
    "attack_form: Targeted | Non-targeted | No attack\n"
    "attack_target: Individuals | Group | No attack\n"
    "attack_type: Discriminatory | Satirical | Abusive | Threat | Demeaning | Others | No "
    "attack\n"
    "attack_intent: Racism | Gender dichotomy | Hate speech | Personal attacks | Verbal mockery "
    "| Personal insults | Stereotypes | Security threat | Others | No attack\n"
    "hazard_level: a number from 0 to 100\n"
    "confidence_level: a number from 0 to 100\n";

const std::string kExplicitAnalyzerTemplate =
    "You analyze comments that a screening stage flagged as explicit verbal attacks.\n"
    "Prior check: {prior_check}\n"
    "\n" +
    std::string(kAnalyzerFieldGuide) +
    "\n"
    "Comment: {comment}\n"
    "\n"
    "Analysis:\n";

constexpr std::string_view kImplicitDetectorTemplate =
    "You screen social-media comments for implicit verbal attacks, whose intent is concealed\n"
    "beneath the literal meaning. Use the conversation context below: the target comment's\n"
    "parent chain and the earlier comments preceding it.\n"
    "Prior check: {prior_check}\n"
    "\n"
    "<context>\n"
    "{context}\n"
    "</context>\n"
    "\n"
    "Comment: {comment}\n"
    "\n"
    "Answer with exactly one of: \"implicit attack\" or \"no attack\".\n"
    "\n"
    "Answer:\n";

const std::string kImplicitAnalyzerTemplate =
    "You analyze comments that a screening stage flagged as implicit verbal attacks. Use the\n"
    "conversation context below when judging target, type and intent.\n"
    "Prior check: {prior_check}\n"
    "\n"
    "<context>\n"
    "{context}\n"
    "</context>\n"
    "\n" +
    std::string(kAnalyzerFieldGuide) +
    "\n"
    "Comment: {comment}\n"
    "\n"
    "Analysis:\n";

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::ConfigError, "cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

std::string_view role_key(ModelRole role) {
  switch (role) {
    case ModelRole::ExplicitDetector: return "explicit_detector";
    case ModelRole::ExplicitAnalyzer: return "explicit_analyzer";
    case ModelRole::ImplicitDetector: return "implicit_detector";
    case ModelRole::ImplicitAnalyzer: return "implicit_analyzer";
  }
  return "";
}

std::optional<ModelRole> role_from_key(std::string_view key) {
  for (ModelRole role : kModelRoles) {
    if (role_key(role) == key) return role;
  }
  return std::nullopt;
}

bool is_detector(ModelRole role) {
  return role == ModelRole::ExplicitDetector || role == ModelRole::ImplicitDetector;
}

std::string summarize_check(const CheckResult& check) {
  const bool explicit_role = check.role == ModelRole::ExplicitDetector;
  const std::string_view what = explicit_role ? "explicit" : "implicit";
  std::string out = std::string(what) + " attack detector verdict: ";
  if (check.verdict == Verdict::Positive) {
    out += std::string(what) + " attack";
  } else {
    out += "no " + std::string(what) + " attack";
  }
  return out;
}

TemplateSet TemplateSet::builtin() {
  TemplateSet set;
  set.entries_[ModelRole::ExplicitDetector] = {"builtin:explicit_detector",
                                               std::string(kExplicitDetectorTemplate)};
  set.entries_[ModelRole::ExplicitAnalyzer] = {"builtin:explicit_analyzer",
                                               kExplicitAnalyzerTemplate};
  set.entries_[ModelRole::ImplicitDetector] = {"builtin:implicit_detector",
                                               std::string(kImplicitDetectorTemplate)};
  set.entries_[ModelRole::ImplicitAnalyzer] = {"builtin:implicit_analyzer",
                                               kImplicitAnalyzerTemplate};
  return set;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    raise(Errc::ConfigError, "template directory " + dir.string() + " does not exist");
  }
  TemplateSet set = builtin();
  for (ModelRole role : kModelRoles) {
    const auto path = dir / (std::string(role_key(role)) + ".txt");
    if (std::filesystem::exists(path)) {
      set.entries_[role] = {path.string(), read_text_file(path)};
    }
  }
  return set;
}

const std::string& TemplateSet::text(ModelRole role) const { return entries_.at(role).text; }
const std::string& TemplateSet::id(ModelRole role) const { return entries_.at(role).id; }

PromptRequest build_prompt(const TemplateSet& templates, ModelRole role, std::string_view comment,
                           const ContextWindow* window, const CheckResult* prior_check) {
  const bool implicit_role =
      role == ModelRole::ImplicitDetector || role == ModelRole::ImplicitAnalyzer;
  if (implicit_role && window == nullptr) {
    raise(Errc::RoleInputMismatch, std::string(role_key(role)) + " requires a context window");
  }
  if (!implicit_role && window != nullptr) {
    raise(Errc::RoleInputMismatch, std::string(role_key(role)) + " must not receive context");
  }
  if (role == ModelRole::ExplicitDetector && prior_check != nullptr) {
    raise(Errc::RoleInputMismatch, "explicit_detector takes no prior check");
  }
  if (role != ModelRole::ExplicitDetector && prior_check == nullptr) {
    raise(Errc::RoleInputMismatch, std::string(role_key(role)) + " requires the prior check");
  }

  PromptRequest request;
  request.role = role;
  request.comment_text = std::string(comment);
  request.template_id = templates.id(role);
  if (implicit_role) request.context_transcript = render_context(*window);
  if (prior_check) request.prior_check = summarize_check(*prior_check);

  std::string rendered = templates.text(role);
  replace_all(rendered, "{comment}", comment);
  if (request.context_transcript) replace_all(rendered, "{context}", *request.context_transcript);
  if (request.prior_check) replace_all(rendered, "{prior_check}", *request.prior_check);
  request.rendered = std::move(rendered);
  return request;
}

BackendConfig backend_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir) {
  if (!j.is_object()) raise(Errc::ConfigError, "backend config must be a JSON object");
  BackendConfig cfg;
  const std::string kind = j.value("kind", "lexicon");
  if (kind == "lexicon") {
    cfg.kind = BackendKind::Lexicon;
  } else if (kind == "remote_llm" || kind == "remote") {
    cfg.kind = BackendKind::RemoteLLM;
  } else {
    raise(Errc::ConfigError, "unknown backend kind \"" + kind + "\"");
  }
  cfg.endpoint = j.value("endpoint", "");
  cfg.model_name = j.value("model_name", "");
  cfg.auth_env = j.value("auth_env", "");
  cfg.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
  cfg.retries = j.value("retries", 2);
  cfg.max_in_flight = j.value("max_in_flight", 8);
  if (j.contains("declared_size") && !j["declared_size"].is_null()) {
    cfg.declared_size = j["declared_size"].get<double>();
  }
  if (j.contains("rules")) cfg.lexicon_rules = j["rules"];
  if (j.contains("rules_file")) {
    std::filesystem::path p = j["rules_file"].get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    cfg.rules_file = p.string();
  }
  if (cfg.retries < 0) raise(Errc::ConfigError, "retries must be >= 0");
  if (cfg.kind == BackendKind::RemoteLLM && (cfg.endpoint.empty() || cfg.model_name.empty())) {
    raise(Errc::ConfigError, "remote_llm backend requires endpoint and model_name");
  }
  return cfg;
}

namespace {

LabelRecord default_record_from_json(const nlohmann::json& j, const LabelRecord& fallback) {
  if (j.is_null()) return fallback;
  LabelRecord record = record_from_json(j);
  return record;
}

class LexiconBackend final : public Backend {
 public:
  LexiconBackend(LexiconRules rules, BackendConfig config)
      : Backend(std::move(config)), rules_(std::move(rules)) {}

  std::string invoke(const PromptRequest& request) override {
    switch (request.role) {
      case ModelRole::ExplicitDetector:
        return contains_any(request.comment_text, rules_.explicit_tokens) ? "explicit attack"
                                                                          : "no attack";
      case ModelRole::ImplicitDetector: {
        const std::string& context = request.context_transcript.value_or("");
        const bool hit = contains_any(context, rules_.implicit_trigger_tokens) &&
                         contains_any(request.comment_text, rules_.implicit_marker_tokens);
        return hit ? "implicit attack" : "no attack";
      }
      case ModelRole::ExplicitAnalyzer: {
        LabelRecord record = rules_.explicit_defaults;
        record.presence = AttackPresence::Explicit;
        return record_to_lines(record);
      }
      case ModelRole::ImplicitAnalyzer: {
        LabelRecord record = rules_.implicit_defaults;
        record.presence = AttackPresence::Implicit;
        return record_to_lines(record);
      }
    }
    raise(Errc::ConfigError, "unknown role");
  }

 private:
  LexiconRules rules_;
};

}  // namespace

LexiconRules lexicon_rules_from_json(const nlohmann::json& j) {
  if (!j.is_object()) raise(Errc::InvalidRuleSet, "lexicon rules must be a JSON object");
  LexiconRules rules;
  const auto read_tokens = [&](const char* field) {
    std::vector<std::string> tokens;
    if (j.contains(field)) {
      for (const auto& t : j[field]) tokens.push_back(t.get<std::string>());
    }
    return tokens;
  };
  rules.explicit_tokens = read_tokens("explicit_tokens");
  rules.implicit_trigger_tokens = read_tokens("implicit_trigger_tokens");
  rules.implicit_marker_tokens = read_tokens("implicit_marker_tokens");
  if (rules.explicit_tokens.empty()) {
    raise(Errc::InvalidRuleSet, "explicit_tokens must be non-empty");
  }
  if (rules.implicit_trigger_tokens.empty() || rules.implicit_marker_tokens.empty()) {
    raise(Errc::InvalidRuleSet, "implicit trigger and marker token sets must be non-empty");
  }

  LabelRecord explicit_fallback;
  explicit_fallback.presence = AttackPresence::Explicit;
  explicit_fallback.form = AttackForm::Targeted;
  explicit_fallback.target = AttackTarget::Individuals;
  explicit_fallback.type = AttackType::Abusive;
  explicit_fallback.intent = AttackIntent::PersonalAttacks;
  explicit_fallback.hazard = 60.0;
  explicit_fallback.confidence = 90.0;

  LabelRecord implicit_fallback;
  implicit_fallback.presence = AttackPresence::Implicit;
  implicit_fallback.form = AttackForm::Targeted;
  implicit_fallback.target = AttackTarget::Individuals;
  implicit_fallback.type = AttackType::Satirical;
  implicit_fallback.intent = AttackIntent::VerbalMockery;
  implicit_fallback.hazard = 40.0;
  implicit_fallback.confidence = 80.0;

  rules.explicit_defaults = default_record_from_json(
      j.contains("explicit_analyzer_defaults") ? j["explicit_analyzer_defaults"]
                                               : nlohmann::json(nullptr),
      explicit_fallback);
  rules.implicit_defaults = default_record_from_json(
      j.contains("implicit_analyzer_defaults") ? j["implicit_analyzer_defaults"]
                                               : nlohmann::json(nullptr),
      implicit_fallback);
  return rules;
}

std::unique_ptr<Backend> lexicon_backend(const LexiconRules& rules, BackendConfig config) {
  config.kind = BackendKind::Lexicon;
  return std::make_unique<LexiconBackend>(rules, std::move(config));
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  if (config.kind == BackendKind::RemoteLLM) return make_remote_backend(config);
  nlohmann::json rules_json = config.lexicon_rules;
  if (rules_json.is_null() && !config.rules_file.empty()) {
    try {
      rules_json = nlohmann::json::parse(read_text_file(config.rules_file));
    } catch (const nlohmann::json::parse_error& e) {
      raise(Errc::ParseError, config.rules_file + ": " + e.what());
    }
  }
  if (rules_json.is_null()) {
    raise(Errc::InvalidRuleSet, "lexicon backend needs inline rules or a rules_file");
  }
  return lexicon_backend(lexicon_rules_from_json(rules_json), config);
}

CheckResult parse_detector_reply(ModelRole role, std::string_view reply, bool strict) {
  if (!is_detector(role)) {
    raise(Errc::RoleInputMismatch, std::string(role_key(role)) + " is not a detector role");
  }
  const AttackPresence positive_class = role_class(role);

  if (strict) {
    const std::string folded = ascii_lower(trim(reply));
    for (const auto& [phrase, cls] : kVerdictPhrases) {
      if (folded == phrase) {
        return {role, cls == positive_class ? Verdict::Positive : Verdict::Negative,
                std::string(reply)};
      }
    }
    raise(Errc::MalformedReply, "reply is not exactly a verdict phrase: \"" +
                                    std::string(trim(reply)) + "\"");
  }

  for (std::string_view line : split_lines(reply)) {
    const std::string folded = ascii_lower(line);
    std::size_t best_pos = std::string::npos;
    std::size_t best_len = 0;
    AttackPresence best_class = AttackPresence::None;
    for (const auto& [phrase, cls] : kVerdictPhrases) {
      const std::size_t pos = folded.find(phrase);
      if (pos == std::string::npos) continue;
      if (pos < best_pos || (pos == best_pos && phrase.size() > best_len)) {
        best_pos = pos;
        best_len = phrase.size();
        best_class = cls;
      }
    }
    if (best_pos != std::string::npos) {
      return {role, best_class == positive_class ? Verdict::Positive : Verdict::Negative,
              std::string(reply)};
    }
  }
  raise(Errc::MalformedReply, "no verdict phrase found in detector reply");
}

namespace {

std::string normalize_key(std::string_view raw) {
  std::string key;
  for (char c : trim(raw)) {
    if (c == '-' || c == ' ') {
      key.push_back('_');
    } else {
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return key;
}

double parse_bounded_number(const std::string& field, std::string_view raw) {
  const std::string_view s = trim(raw);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    raise(Errc::MalformedReply, field + " is not a number: \"" + std::string(s) + "\"");
  }
  if (!std::isfinite(value) || value < 0.0 || value > 100.0) {
    raise(Errc::RangeViolation, field + " = " + std::string(s) + " outside [0,100]");
  }
  return value;
}

LabelRecord record_from_fields(const std::map<std::string, std::string>& fields) {
  LabelRecord record;
  for (Dimension dim : kDimensions) {
    const std::string key(dimension_key(dim));
    const auto it = fields.find(key);
    if (it == fields.end()) raise(Errc::MissingField, key);
    set_label(record, dim, it->second);
  }
  for (const char* key : {"hazard_level", "confidence_level"}) {
    if (!fields.contains(key)) raise(Errc::MissingField, key);
  }
  record.hazard = parse_bounded_number("hazard_level", fields.at("hazard_level"));
  record.confidence = parse_bounded_number("confidence_level", fields.at("confidence_level"));
  if (const auto violations = validate_record(record); !violations.empty()) {
    raise(Errc::MalformedReply, "inconsistent record: " + violations.front().detail);
  }
  return record;
}

}  // namespace

LabelRecord parse_analyzer_reply(std::string_view reply, ReplyFormat format, bool strict) {
  if (format == ReplyFormat::Json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::parse_error& e) {
      raise(Errc::MalformedReply, std::string("analyzer reply is not JSON: ") + e.what());
    }
    try {
      return record_from_json(j);
    } catch (const Error& e) {
      if (e.code() == Errc::ParseError || e.code() == Errc::ValidationError) {
        raise(Errc::MalformedReply, e.what());
      }
      throw;
    }
  }

  std::map<std::string, std::string> fields;
  for (std::string_view line : split_lines(reply)) {
    if (trim(line).empty()) continue;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) {
      if (strict) raise(Errc::MalformedReply, "line without `field: value`: \"" +
                                                  std::string(line) + "\"");
      continue;
    }
    const std::string key = normalize_key(line.substr(0, colon));
    const bool known = key == "hazard_level" || key == "confidence_level" ||
                       dimension_from_key(key).has_value();
    if (!known) {
      if (strict) raise(Errc::MalformedReply, "unknown field \"" + key + "\"");
      continue;
    }
    if (strict && fields.contains(key)) {
      raise(Errc::MalformedReply, "duplicate field \"" + key + "\"");
    }
    fields[key] = std::string(trim(line.substr(colon + 1)));
  }
  return record_from_fields(fields);
}

std::string record_to_lines(const LabelRecord& record) {
  std::ostringstream os;
  for (Dimension dim : kDimensions) {
    os << dimension_key(dim) << ": " << record.value_of(dim) << '\n';
  }
  os << "hazard_level: " << format_double(record.hazard) << '\n';
  os << "confidence_level: " << format_double(record.confidence) << '\n';
  return os.str();
}

}  // namespace attackdet
