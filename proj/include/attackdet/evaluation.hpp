#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attackdet/pipeline.hpp"
#include "attackdet/taxonomy.hpp"

namespace attackdet {

// Fraction of exact matches on one categorical dimension.
double accuracy(std::span<const LabelRecord> preds, std::span<const LabelRecord> golds,
                Dimension dim);

// Unweighted mean of per-class F1 over the classes present in the golds;
// a per-class F1 with zero denominator counts as 0.
double macro_f1(std::span<const LabelRecord> preds, std::span<const LabelRecord> golds,
                Dimension dim);

// Sample Pearson correlation. Throws Errc::DegenerateInput when either series
// is constant (or shorter than two points) instead of fabricating 0.
double pearson(std::span<const double> xs, std::span<const double> ys);

// Fraction of records whose five categorical dimensions all match at once.
double all_in_one_accuracy(std::span<const LabelRecord> preds,
                           std::span<const LabelRecord> golds);

// Square contingency matrix of two annotation sources over their shared
// vocabulary.
struct AgreementTable {
  std::vector<std::string> labels;            // sorted vocabulary
  std::vector<std::vector<std::size_t>> counts;  // counts[a_index][b_index]
  std::size_t total = 0;
};

AgreementTable agreement_table(std::span<const std::string> a, std::span<const std::string> b);

struct KappaResult {
  double kappa = 0.0;
  double consistency_rate = 0.0;  // observed agreement p_o
};

// kappa = (p_o - p_e) / (1 - p_e) with p_e the chance agreement from the
// marginals; p_e = 1 (full marginal concentration, which forces p_o = 1)
// returns kappa = 1 by convention.
KappaResult kappa_from_table(const AgreementTable& table);
KappaResult cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);

struct EvalReport {
  std::map<Dimension, double> acc;
  std::map<Dimension, double> f1;
  std::optional<double> harm_pearson;  // empty when the series are degenerate
  std::optional<double> conf_pearson;
  double all_in_one_acc = 0.0;
  std::size_t evaluated = 0;    // matched, non-diagnostic outcomes
  std::size_t diagnostics = 0;  // excluded from every metric, reported here
};

// Joins outcomes to gold records by (block_id, coord) and computes every
// metric above. Diagnostic outcomes are excluded and counted; an outcome
// without a gold record is Errc::MissingGold. attack_only_pearson restricts
// the hazard/confidence series to pairs whose gold presence is an attack.
EvalReport evaluate(std::span<const PipelineOutcome> outcomes,
                    const std::map<GoldKey, LabelRecord>& golds,
                    bool attack_only_pearson = false);

nlohmann::json report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);  // aligned plain text

}  // namespace attackdet
