#include "attackdet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace attackdet {

namespace {

void check_lengths(std::size_t preds, std::size_t golds) {
  if (preds != golds) {
    raise(Errc::LengthMismatch,
          std::to_string(preds) + " predictions vs " + std::to_string(golds) + " golds");
  }
  if (preds == 0) raise(Errc::EmptyInput, "no records to score");
}

std::string dimension_row_name(Dimension dim) {
  switch (dim) {
    case Dimension::AttackOrNot: return "Attack_or_not";
    case Dimension::AttackForm: return "Attack_form";
    case Dimension::AttackTarget: return "Attack_target";
    case Dimension::AttackType: return "Attack_type";
    case Dimension::AttackIntent: return "Attack_intent";
  }
  return "";
}

}  // namespace

double accuracy(std::span<const LabelRecord> preds, std::span<const LabelRecord> golds,
                Dimension dim) {
  check_lengths(preds.size(), golds.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].value_of(dim) == golds[i].value_of(dim)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double macro_f1(std::span<const LabelRecord> preds, std::span<const LabelRecord> golds,
                Dimension dim) {
  check_lengths(preds.size(), golds.size());
  std::vector<std::string_view> classes;
  for (const auto& g : golds) {
    const auto v = g.value_of(dim);
    if (std::find(classes.begin(), classes.end(), v) == classes.end()) classes.push_back(v);
  }
  double sum = 0.0;
  for (const auto cls : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i].value_of(dim) == cls;
      const bool g = golds[i].value_of(dim) == cls;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    sum += denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
  }
  return sum / static_cast<double>(classes.size());
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    raise(Errc::LengthMismatch,
          std::to_string(xs.size()) + " xs vs " + std::to_string(ys.size()) + " ys");
  }
  const std::size_t n = xs.size();
  if (n < 2) raise(Errc::DegenerateInput, "correlation needs at least two points");
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += xs[i];
    mean_y += ys[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mean_x;
    const double dy = ys[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    raise(Errc::DegenerateInput, "correlation undefined for a constant series");
  }
  return sxy / std::sqrt(sxx * syy);
}

double all_in_one_accuracy(std::span<const LabelRecord> preds,
                           std::span<const LabelRecord> golds) {
  check_lengths(preds.size(), golds.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    bool all = true;
    for (Dimension dim : kDimensions) {
      if (preds[i].value_of(dim) != golds[i].value_of(dim)) {
        all = false;
        break;
      }
    }
    if (all) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

AgreementTable agreement_table(std::span<const std::string> a, std::span<const std::string> b) {
  check_lengths(a.size(), b.size());
  AgreementTable table;
  for (const auto& label : a) table.labels.push_back(label);
  for (const auto& label : b) table.labels.push_back(label);
  std::sort(table.labels.begin(), table.labels.end());
  table.labels.erase(std::unique(table.labels.begin(), table.labels.end()), table.labels.end());

  const auto index = [&](const std::string& label) {
    return static_cast<std::size_t>(
        std::lower_bound(table.labels.begin(), table.labels.end(), label) - table.labels.begin());
  };
  table.counts.assign(table.labels.size(), std::vector<std::size_t>(table.labels.size(), 0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    table.counts[index(a[i])][index(b[i])]++;
  }
  table.total = a.size();
  return table;
}

KappaResult kappa_from_table(const AgreementTable& table) {
  if (table.total == 0) raise(Errc::EmptyInput, "empty agreement table");
  const double n = static_cast<double>(table.total);
  const std::size_t k = table.labels.size();
  double agree = 0.0;
  std::vector<double> row(k, 0.0), col(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double c = static_cast<double>(table.counts[i][j]);
      if (i == j) agree += c;
      row[i] += c;
      col[j] += c;
    }
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p_e += (row[i] / n) * (col[i] / n);
  }
  if (p_e >= 1.0) return {1.0, p_o};  // total marginal concentration forces p_o = 1
  return {(p_o - p_e) / (1.0 - p_e), p_o};
}

KappaResult cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  return kappa_from_table(agreement_table(a, b));
}

EvalReport evaluate(std::span<const PipelineOutcome> outcomes,
                    const std::map<GoldKey, LabelRecord>& golds, bool attack_only_pearson) {
  EvalReport report;
  std::vector<LabelRecord> preds, gold_matched;
  std::vector<std::string> missing;
  for (const auto& outcome : outcomes) {
    if (!outcome.ok()) {
      report.diagnostics++;
      continue;
    }
    const auto it = golds.find({outcome.block_id, outcome.coord});
    if (it == golds.end()) {
      missing.push_back(outcome.block_id + " " + to_string(outcome.coord));
      continue;
    }
    preds.push_back(*outcome.record);
    gold_matched.push_back(it->second);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& key : missing) {
      if (!list.empty()) list += ", ";
      list += key;
    }
    raise(Errc::MissingGold, "no gold record for: " + list);
  }
  if (preds.empty()) raise(Errc::EmptyInput, "no scorable outcomes");

  report.evaluated = preds.size();
  for (Dimension dim : kDimensions) {
    report.acc[dim] = accuracy(preds, gold_matched, dim);
    report.f1[dim] = macro_f1(preds, gold_matched, dim);
  }
  report.all_in_one_acc = all_in_one_accuracy(preds, gold_matched);

  std::vector<double> hazard_pred, hazard_gold, conf_pred, conf_gold;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (attack_only_pearson && gold_matched[i].presence == AttackPresence::None) continue;
    hazard_pred.push_back(preds[i].hazard);
    hazard_gold.push_back(gold_matched[i].hazard);
    conf_pred.push_back(preds[i].confidence);
    conf_gold.push_back(gold_matched[i].confidence);
  }
  try {
    report.harm_pearson = pearson(hazard_pred, hazard_gold);
  } catch (const Error&) {
    report.harm_pearson.reset();
  }
  try {
    report.conf_pearson = pearson(conf_pred, conf_gold);
  } catch (const Error&) {
    report.conf_pearson.reset();
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  for (Dimension dim : kDimensions) {
    j[std::string(dimension_key(dim)) + "_acc"] = report.acc.at(dim);
    j[std::string(dimension_key(dim)) + "_f1"] = report.f1.at(dim);
  }
  j["harm_pearson"] = report.harm_pearson ? nlohmann::json(*report.harm_pearson) : nlohmann::json(nullptr);
  j["conf_pearson"] = report.conf_pearson ? nlohmann::json(*report.conf_pearson) : nlohmann::json(nullptr);
  j["all_in_one_acc"] = report.all_in_one_acc;
  j["evaluated"] = report.evaluated;
  j["diagnostics"] = report.diagnostics;
  return j;
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream os;
  const auto row = [&](const std::string& name, std::optional<double> value) {
    os << std::left << std::setw(22) << name;
    if (value) {
      os << std::right << std::fixed << std::setprecision(4) << *value;
    } else {
      os << std::right << std::setw(6) << "n/a";
    }
    os << '\n';
  };
  for (Dimension dim : kDimensions) {
    row(dimension_row_name(dim) + "_Acc", report.acc.at(dim));
    row(dimension_row_name(dim) + "_F1", report.f1.at(dim));
  }
  row("Harm_Pearson", report.harm_pearson);
  row("Conf_Pearson", report.conf_pearson);
  row("All_in_One_Acc", report.all_in_one_acc);
  os << std::left << std::setw(22) << "Evaluated" << report.evaluated << '\n';
  os << std::left << std::setw(22) << "Diagnostics" << report.diagnostics << '\n';
  return os.str();
}

}  // namespace attackdet
