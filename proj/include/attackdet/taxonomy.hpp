#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "attackdet/errors.hpp"

namespace attackdet {

// Seven-dimension annotation schema: five categorical dimensions plus two
// numeric indicators (hazard and confidence, both on a 0..100 scale).

enum class AttackPresence { Explicit, Implicit, None };
enum class AttackForm { Targeted, NonTargeted, None };
enum class AttackTarget { Individuals, Group, None };
enum class AttackType { Discriminatory, Satirical, Abusive, Threat, Demeaning, Others, None };
enum class AttackIntent {
  Racism,
  GenderDichotomy,
  HateSpeech,
  PersonalAttacks,
  VerbalMockery,
  PersonalInsults,
  Stereotypes,
  SecurityThreat,
  Others,
  None,
};

enum class Dimension { AttackOrNot, AttackForm, AttackTarget, AttackType, AttackIntent };

inline constexpr std::array<Dimension, 5> kDimensions = {
    Dimension::AttackOrNot, Dimension::AttackForm, Dimension::AttackTarget,
    Dimension::AttackType, Dimension::AttackIntent};

// Wire keys: "attack_or_not", "attack_form", "attack_target", "attack_type",
// "attack_intent".
std::string_view dimension_key(Dimension dim);
std::optional<Dimension> dimension_from_key(std::string_view key);

// Canonical value strings, e.g. "Explicit attack", "Gender dichotomy".
std::string_view to_string(AttackPresence v);
std::string_view to_string(AttackForm v);
std::string_view to_string(AttackTarget v);
std::string_view to_string(AttackIntent v);
std::string_view to_string(AttackType v);

// All canonical values of a dimension, in declaration order.
std::span<const std::string_view> dimension_values(Dimension dim);

struct LabelRecord {
  AttackPresence presence = AttackPresence::None;
  AttackForm form = AttackForm::None;
  AttackTarget target = AttackTarget::None;
  AttackType type = AttackType::None;
  AttackIntent intent = AttackIntent::None;
  double hazard = 0.0;
  double confidence = 100.0;

  bool operator==(const LabelRecord&) const = default;

  // Canonical string of the given categorical dimension's value.
  std::string_view value_of(Dimension dim) const;
};

// The all-no-attack record assigned automatically to non-attacks.
LabelRecord null_record(double confidence = 100.0);

// Empty iff all LabelRecord invariants hold. Rules: "HazardRange",
// "ConfidenceRange", "NullConsistency" (presence None forces every
// categorical dimension to None and hazard to 0).
std::vector<Violation> validate_record(const LabelRecord& record);

// Case-insensitive, whitespace/hyphen/underscore tolerant match against
// canonical names and registered aliases ("sexism" -> Gender dichotomy,
// "safety threats" -> Security threat, ...). Throws Errc::UnknownLabel.
AttackPresence parse_presence(std::string_view raw);
AttackForm parse_form(std::string_view raw);
AttackTarget parse_target(std::string_view raw);
AttackType parse_type(std::string_view raw);
AttackIntent parse_intent(std::string_view raw);

// Generic form of the parsers above: resolves `raw` in `dim`'s vocabulary and
// returns the canonical value string.
std::string_view parse_label(Dimension dim, std::string_view raw);

// Assigns the parsed value of `dim` into `record`.
void set_label(LabelRecord& record, Dimension dim, std::string_view raw);

struct CategoryCount {
  std::string value;
  std::size_t count = 0;
  double percent = 0.0;  // count / total of that dimension, rounded to 0.1%

  bool operator==(const CategoryCount&) const = default;
};

struct NumericSummary {
  double mean = 0.0;
  double std_dev = 0.0;  // population standard deviation
  double max = 0.0;
};

struct DistributionReport {
  std::size_t total = 0;
  std::map<Dimension, std::vector<CategoryCount>> categorical;
  NumericSummary hazard;
  NumericSummary confidence;
};

// Per-dimension counts/percentages plus hazard/confidence mean, population
// std and max. Throws Errc::EmptyInput on an empty span.
DistributionReport label_distribution(std::span<const LabelRecord> records);

// JSON wire format: attack_or_not, attack_form, attack_target, attack_type,
// attack_intent (canonical strings), hazard_level, confidence_level (numbers).
nlohmann::json record_to_json(const LabelRecord& record);
LabelRecord record_from_json(const nlohmann::json& j);

}  // namespace attackdet
