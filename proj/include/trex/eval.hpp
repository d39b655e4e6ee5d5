#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace trex {

struct SweepResult {
  std::vector<double> thresholds;  ///< uniform on [0, 1]
  std::vector<double> precision;   ///< 1 where nothing is predicted positive
  std::vector<double> recall;
  std::vector<double> f1;
  /// Best F1 over every distinct score cut point: the supremum of the F1
  /// curve over all normalized thresholds.
  double max_f1 = 0.0;
  /// Area under the exact score-sorted precision-recall curve.
  double pr_auc = 0.0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
};

/// Min-max normalizes the scores (all-equal scores map to 0), predicts
/// positive iff normalized score > theta for each of `n_thresholds` uniform
/// thresholds, and computes the exact max F1 and PR AUC. Throws NoPositives
/// / NoNegatives / ShapeMismatch.
SweepResult sweep(const std::vector<double>& scores, const std::vector<bool>& labels, std::size_t n_thresholds = 512);

/// F1 from counts; 0 when precision + recall is 0.
double f1_score(std::size_t tp, std::size_t fp, std::size_t fn);

/// Percent change of `value` over `baseline`, both first rounded to two
/// decimals, rounded half away from zero: (0.80, 0.90) -> "+13%".
std::string format_delta(double baseline, double value);

/// Two-decimal rendering used in the report ("0.80").
std::string format_metric(double v);

struct MethodResult {
  std::string method;  ///< binseg, tire or trexdino
  SweepResult sweep;
};

/// Display name of a method ("TREX-DINO" for trexdino).
std::string display_name(const std::string& method);

/// Plain-text table: one column per method (baseline first), rows "F1
/// score", "PR AUC" and "Rank". Deltas are shown against `baseline` when it
/// is present and more than one method is reported.
std::string render_report(const std::vector<MethodResult>& results, const std::string& baseline = "binseg");

nlohmann::json summary_json(const std::vector<MethodResult>& results, const std::string& baseline = "binseg");

/// `threshold,precision,recall,f1` rows.
void write_curve_csv(const SweepResult& result, const std::filesystem::path& path);

}  // namespace trex
