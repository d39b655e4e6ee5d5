#include "trex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "trex/error.hpp"

namespace trex {

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double p = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  return p + r == 0.0 || tp == 0 ? 0.0 : 2.0 * p * r / (p + r);
}

SweepResult sweep(const std::vector<double>& scores, const std::vector<bool>& labels, std::size_t n_thresholds) {
  if (scores.size() != labels.size()) throw Error(Errc::ShapeMismatch, "scores and labels differ in length");
  if (n_thresholds < 2) throw Error(Errc::OutOfRange, "sweep needs at least two thresholds");
  for (const double s : scores)
    if (!std::isfinite(s)) throw Error(Errc::NonFiniteValue, "non-finite score");
  SweepResult out;
  out.n_positive = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  out.n_negative = labels.size() - out.n_positive;
  if (out.n_positive == 0) throw Error(Errc::NoPositives, "sweep needs at least one positive label");
  if (out.n_negative == 0) throw Error(Errc::NoNegatives, "sweep needs at least one negative label");
  const std::size_t n = scores.size();
  const std::size_t pos = out.n_positive;

  // Samples by descending score; runs of equal scores form one cut.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Exact curve over distinct cut points.
  std::size_t tp = 0, fp = 0;
  double prev_recall = 0.0, prev_precision = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      labels[order[j]] ? ++tp : ++fp;
      ++j;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    if (first) {
      prev_precision = precision;  // anchor (0, precision of the strictest cut)
      first = false;
    }
    out.pr_auc += (recall - prev_recall) * 0.5 * (precision + prev_precision);
    prev_recall = recall;
    prev_precision = precision;
    out.max_f1 = std::max(out.max_f1, f1_score(tp, fp, pos - tp));
    i = j;
  }

  // Normalized threshold grid.
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  std::vector<std::pair<double, bool>> norm(n);
  for (std::size_t i = 0; i < n; ++i) norm[i] = {range > 0.0 ? (scores[i] - lo) / range : 0.0, labels[i]};
  std::sort(norm.begin(), norm.end());
  // suffix_pos[i] = positives among norm[i..n).
  std::vector<std::size_t> suffix_pos(n + 1, 0);
  for (std::size_t i = n; i-- > 0;) suffix_pos[i] = suffix_pos[i + 1] + (norm[i].second ? 1 : 0);

  out.thresholds.resize(n_thresholds);
  out.precision.resize(n_thresholds);
  out.recall.resize(n_thresholds);
  out.f1.resize(n_thresholds);
  for (std::size_t k = 0; k < n_thresholds; ++k) {
    const double theta = static_cast<double>(k) / static_cast<double>(n_thresholds - 1);
    const auto first_above = static_cast<std::size_t>(
        std::upper_bound(norm.begin(), norm.end(), theta, [](double t, const auto& e) { return t < e.first; }) -
        norm.begin());
    const std::size_t predicted = n - first_above;
    const std::size_t ktp = suffix_pos[first_above];
    const std::size_t kfp = predicted - ktp;
    out.thresholds[k] = theta;
    out.precision[k] = predicted == 0 ? 1.0 : static_cast<double>(ktp) / static_cast<double>(predicted);
    out.recall[k] = static_cast<double>(ktp) / static_cast<double>(pos);
    out.f1[k] = f1_score(ktp, kfp, pos - ktp);
  }
  return out;
}

namespace {

long long hundredths(double v) { return std::llround(v * 100.0); }

// Integer division rounding half away from zero.
long long div_round(long long num, long long den) {
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const long long q = (2 * std::llabs(num) + den) / (2 * den);
  return num < 0 ? -q : q;
}

}  // namespace

std::string format_delta(double baseline, double value) {
  const long long b = hundredths(baseline);
  const long long v = hundredths(value);
  if (b == 0) return "n/a";
  const long long pct = div_round((v - b) * 100, b);
  return (pct >= 0 ? "+" : "") + std::to_string(pct) + "%";
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(hundredths(v)) / 100.0);
  return buf;
}

std::string display_name(const std::string& method) {
  if (method == "binseg") return "Binseg";
  if (method == "tire") return "TIRE";
  if (method == "trexdino") return "TREX-DINO";
  return method;
}

namespace {

std::vector<const MethodResult*> ordered(const std::vector<MethodResult>& results, const std::string& baseline) {
  std::vector<const MethodResult*> out;
  for (const auto& r : results)
    if (r.method == baseline) out.push_back(&r);
  for (const auto& r : results)
    if (r.method != baseline) out.push_back(&r);
  return out;
}

const MethodResult* find_baseline(const std::vector<MethodResult>& results, const std::string& baseline) {
  if (results.size() < 2) return nullptr;
  for (const auto& r : results)
    if (r.method == baseline) return &r;
  return nullptr;
}

// Baseline / Best / Better / Worse, ranking non-baseline methods by
// (rounded max F1, rounded PR AUC).
std::vector<std::string> ranks(const std::vector<const MethodResult*>& rows, const MethodResult* base) {
  std::vector<std::string> out(rows.size());
  const auto key = [](const MethodResult* r) {
    return std::pair{hundredths(r->sweep.max_f1), hundredths(r->sweep.pr_auc)};
  };
  const MethodResult* best = nullptr;
  for (const auto* r : rows)
    if (r != base && (!best || key(r) > key(best))) best = r;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto* r = rows[i];
    if (r == base) {
      out[i] = "Baseline";
    } else if (base && key(r) <= key(base)) {
      out[i] = "Worse";
    } else if (best && key(r) == key(best)) {
      out[i] = "Best";
    } else {
      out[i] = "Better";
    }
  }
  return out;
}

}  // namespace

std::string render_report(const std::vector<MethodResult>& results, const std::string& baseline) {
  const auto rows = ordered(results, baseline);
  const MethodResult* base = find_baseline(results, baseline);
  const auto rank = ranks(rows, base);

  std::vector<std::vector<std::string>> table;
  table.push_back({"Metric"});
  table.push_back({"F1 score"});
  table.push_back({"PR AUC"});
  table.push_back({"Rank"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto* r = rows[i];
    std::string f1 = format_metric(r->sweep.max_f1);
    std::string auc = format_metric(r->sweep.pr_auc);
    if (base && r != base) {
      f1 += " (" + format_delta(base->sweep.max_f1, r->sweep.max_f1) + ")";
      auc += " (" + format_delta(base->sweep.pr_auc, r->sweep.pr_auc) + ")";
    }
    table[0].push_back(display_name(r->method));
    table[1].push_back(f1);
    table[2].push_back(auc);
    table[3].push_back(rank[i]);
  }

  std::vector<std::size_t> width(table[0].size(), 0);
  for (const auto& row : table)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  const auto rule = [&] {
    os << '+';
    for (const std::size_t w : width) os << std::string(w + 2, '-') << '+';
    os << '\n';
  };
  rule();
  for (const auto& row : table) {
    os << '|';
    for (std::size_t c = 0; c < row.size(); ++c) os << ' ' << row[c] << std::string(width[c] - row[c].size(), ' ') << " |";
    os << '\n';
    rule();
  }
  return os.str();
}

nlohmann::json summary_json(const std::vector<MethodResult>& results, const std::string& baseline) {
  const auto rows = ordered(results, baseline);
  const MethodResult* base = find_baseline(results, baseline);
  const auto rank = ranks(rows, base);
  nlohmann::json methods = nlohmann::json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto* r = rows[i];
    nlohmann::json m = {{"method", r->method},
                        {"max_f1", r->sweep.max_f1},
                        {"pr_auc", r->sweep.pr_auc},
                        {"n_positive", r->sweep.n_positive},
                        {"n_negative", r->sweep.n_negative},
                        {"rank", rank[i]}};
    if (base && r != base) {
      m["max_f1_delta"] = format_delta(base->sweep.max_f1, r->sweep.max_f1);
      m["pr_auc_delta"] = format_delta(base->sweep.pr_auc, r->sweep.pr_auc);
    }
    methods.push_back(m);
  }
  return {{"baseline", base ? nlohmann::json(baseline) : nlohmann::json(nullptr)}, {"methods", methods}};
}

void write_curve_csv(const SweepResult& result, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "threshold,precision,recall,f1\n";
  char buf[128];
  for (std::size_t i = 0; i < result.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", result.thresholds[i], result.precision[i],
                  result.recall[i], result.f1[i]);
    out << buf;
  }
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

}  // namespace trex
