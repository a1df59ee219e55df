#include "attackdet/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace attackdet {

namespace {

constexpr std::array<std::string_view, 3> kPresenceNames = {"Explicit attack", "Implicit attack",
                                                            "No attack"};
constexpr std::array<std::string_view, 3> kFormNames = {"Targeted", "Non-targeted", "No attack"};
constexpr std::array<std::string_view, 3> kTargetNames = {"Individuals", "Group", "No attack"};
constexpr std::array<std::string_view, 7> kTypeNames = {
    "Discriminatory", "Satirical", "Abusive", "Threat", "Demeaning", "Others", "No attack"};
constexpr std::array<std::string_view, 10> kIntentNames = {
    "Racism",          "Gender dichotomy", "Hate speech", "Personal attacks",
    "Verbal mockery",  "Personal insults", "Stereotypes", "Security threat",
    "Others",          "No attack"};

// Lowercase, trim, fold '-'/'_' to spaces and collapse runs of spaces, so
// "Non-targeted", "non_targeted" and " NON  TARGETED " all match.
std::string normalize(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isspace(u) || c == '-' || c == '_') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

struct Vocabulary {
  std::span<const std::string_view> canonical;
  // alias (normalized) -> index into canonical
  std::vector<std::pair<std::string, std::size_t>> aliases;

  Vocabulary(std::span<const std::string_view> names,
             std::initializer_list<std::pair<const char*, std::size_t>> extra)
      : canonical(names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      aliases.emplace_back(normalize(names[i]), i);
    }
    for (const auto& [alias, idx] : extra) {
      aliases.emplace_back(normalize(alias), idx);
    }
  }

  std::optional<std::size_t> find(std::string_view raw) const {
    const std::string key = normalize(raw);
    for (const auto& [alias, idx] : aliases) {
      if (alias == key) return idx;
    }
    return std::nullopt;
  }
};

const Vocabulary& vocabulary(Dimension dim) {
  static const Vocabulary presence(kPresenceNames,
                                   {{"explicit", 0}, {"implicit", 1}, {"none", 2}, {"no", 2}});
  static const Vocabulary form(kFormNames, {{"nontargeted", 1}, {"none", 2}});
  static const Vocabulary target(kTargetNames,
                                 {{"individual", 0}, {"groups", 1}, {"none", 2}});
  static const Vocabulary type(kTypeNames, {{"other", 5}, {"none", 6}});
  static const Vocabulary intent(kIntentNames, {{"sexism", 1},
                                                {"personal attack", 3},
                                                {"personal insult", 5},
                                                {"stereotype", 6},
                                                {"safety threats", 7},
                                                {"safety threat", 7},
                                                {"other", 8},
                                                {"none", 9}});
  switch (dim) {
    case Dimension::AttackOrNot: return presence;
    case Dimension::AttackForm: return form;
    case Dimension::AttackTarget: return target;
    case Dimension::AttackType: return type;
    case Dimension::AttackIntent: return intent;
  }
  raise(Errc::ConfigError, "unknown dimension");
}

std::size_t parse_index(Dimension dim, std::string_view raw) {
  if (auto idx = vocabulary(dim).find(raw)) return *idx;
  raise(Errc::UnknownLabel,
        std::string(dimension_key(dim)) + ": \"" + std::string(raw) + "\"");
}

double round1(double percent) { return std::round(percent * 10.0) / 10.0; }

NumericSummary summarize(std::span<const LabelRecord> records, double LabelRecord::*field) {
  NumericSummary s;
  double sum = 0.0;
  s.max = records.front().*field;
  for (const auto& r : records) {
    sum += r.*field;
    s.max = std::max(s.max, r.*field);
  }
  s.mean = sum / static_cast<double>(records.size());
  double sq = 0.0;
  for (const auto& r : records) {
    const double d = r.*field - s.mean;
    sq += d * d;
  }
  s.std_dev = std::sqrt(sq / static_cast<double>(records.size()));
  return s;
}

void check_numeric_field(const char* rule, const char* name, double value,
                         std::vector<Violation>& out) {
  if (!std::isfinite(value) || value < 0.0 || value > 100.0) {
    std::ostringstream detail;
    detail << name << " = " << value << " outside [0,100]";
    out.push_back({rule, name, detail.str()});
  }
}

}  // namespace

std::string_view dimension_key(Dimension dim) {
  switch (dim) {
    case Dimension::AttackOrNot: return "attack_or_not";
    case Dimension::AttackForm: return "attack_form";
    case Dimension::AttackTarget: return "attack_target";
    case Dimension::AttackType: return "attack_type";
    case Dimension::AttackIntent: return "attack_intent";
  }
  return "";
}

std::optional<Dimension> dimension_from_key(std::string_view key) {
  for (Dimension dim : kDimensions) {
    if (dimension_key(dim) == key) return dim;
  }
  return std::nullopt;
}

std::string_view to_string(AttackPresence v) { return kPresenceNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(AttackForm v) { return kFormNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(AttackTarget v) { return kTargetNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(AttackType v) { return kTypeNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(AttackIntent v) { return kIntentNames[static_cast<std::size_t>(v)]; }

std::span<const std::string_view> dimension_values(Dimension dim) {
  return vocabulary(dim).canonical;
}

std::string_view LabelRecord::value_of(Dimension dim) const {
  switch (dim) {
    case Dimension::AttackOrNot: return to_string(presence);
    case Dimension::AttackForm: return to_string(form);
    case Dimension::AttackTarget: return to_string(target);
    case Dimension::AttackType: return to_string(type);
    case Dimension::AttackIntent: return to_string(intent);
  }
  return "";
}

LabelRecord null_record(double confidence) {
  LabelRecord r;
  r.confidence = confidence;
  return r;
}

std::vector<Violation> validate_record(const LabelRecord& record) {
  std::vector<Violation> out;
  check_numeric_field("HazardRange", "hazard_level", record.hazard, out);
  check_numeric_field("ConfidenceRange", "confidence_level", record.confidence, out);
  if (record.presence == AttackPresence::None) {
    const bool nulled = record.form == AttackForm::None && record.target == AttackTarget::None &&
                        record.type == AttackType::None && record.intent == AttackIntent::None &&
                        record.hazard == 0.0;
    if (!nulled) {
      out.push_back({"NullConsistency", "attack_or_not",
                     "presence \"No attack\" requires null values in every other dimension"});
    }
  }
  return out;
}

AttackPresence parse_presence(std::string_view raw) {
  return static_cast<AttackPresence>(parse_index(Dimension::AttackOrNot, raw));
}
AttackForm parse_form(std::string_view raw) {
  return static_cast<AttackForm>(parse_index(Dimension::AttackForm, raw));
}
AttackTarget parse_target(std::string_view raw) {
  return static_cast<AttackTarget>(parse_index(Dimension::AttackTarget, raw));
}
AttackType parse_type(std::string_view raw) {
  return static_cast<AttackType>(parse_index(Dimension::AttackType, raw));
}
AttackIntent parse_intent(std::string_view raw) {
  return static_cast<AttackIntent>(parse_index(Dimension::AttackIntent, raw));
}

std::string_view parse_label(Dimension dim, std::string_view raw) {
  return vocabulary(dim).canonical[parse_index(dim, raw)];
}

void set_label(LabelRecord& record, Dimension dim, std::string_view raw) {
  switch (dim) {
    case Dimension::AttackOrNot: record.presence = parse_presence(raw); return;
    case Dimension::AttackForm: record.form = parse_form(raw); return;
    case Dimension::AttackTarget: record.target = parse_target(raw); return;
    case Dimension::AttackType: record.type = parse_type(raw); return;
    case Dimension::AttackIntent: record.intent = parse_intent(raw); return;
  }
}

DistributionReport label_distribution(std::span<const LabelRecord> records) {
  if (records.empty()) raise(Errc::EmptyInput, "label_distribution over zero records");
  DistributionReport report;
  report.total = records.size();
  for (Dimension dim : kDimensions) {
    const auto values = dimension_values(dim);
    std::vector<std::size_t> counts(values.size(), 0);
    for (const auto& r : records) {
      const auto value = r.value_of(dim);
      const auto it = std::find(values.begin(), values.end(), value);
      counts[static_cast<std::size_t>(it - values.begin())]++;
    }
    std::vector<CategoryCount> rows;
    rows.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      rows.push_back({std::string(values[i]), counts[i],
                      round1(100.0 * static_cast<double>(counts[i]) /
                             static_cast<double>(records.size()))});
    }
    report.categorical.emplace(dim, std::move(rows));
  }
  report.hazard = summarize(records, &LabelRecord::hazard);
  report.confidence = summarize(records, &LabelRecord::confidence);
  return report;
}

nlohmann::json record_to_json(const LabelRecord& record) {
  nlohmann::json j;
  for (Dimension dim : kDimensions) {
    j[std::string(dimension_key(dim))] = std::string(record.value_of(dim));
  }
  j["hazard_level"] = record.hazard;
  j["confidence_level"] = record.confidence;
  return j;
}

LabelRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) raise(Errc::ParseError, "label record must be a JSON object");
  LabelRecord record;
  for (Dimension dim : kDimensions) {
    const std::string key(dimension_key(dim));
    if (!j.contains(key)) raise(Errc::MissingField, key);
    if (!j[key].is_string()) raise(Errc::ParseError, key + " must be a string");
    set_label(record, dim, j[key].get<std::string>());
  }
  for (const char* key : {"hazard_level", "confidence_level"}) {
    if (!j.contains(key)) raise(Errc::MissingField, key);
    if (!j[key].is_number()) raise(Errc::ParseError, std::string(key) + " must be a number");
  }
  record.hazard = j["hazard_level"].get<double>();
  record.confidence = j["confidence_level"].get<double>();
  if (const auto violations = validate_record(record); !violations.empty()) {
    const auto& v = violations.front();
    raise(v.rule == "NullConsistency" ? Errc::ValidationError : Errc::RangeViolation,
          v.rule + ": " + v.detail);
  }
  return record;
}

}  // namespace attackdet
