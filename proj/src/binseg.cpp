#include "trex/binseg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trex/error.hpp"
#include "trex/kernels/kernels.hpp"

namespace trex {

RbfCost::RbfCost(std::span<const double> series, double gamma) : gamma_(gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(Errc::OutOfRange, "rbf bandwidth must be positive and finite");
  const std::size_t n = series.size();
  std::vector<double> before(n), after(n);
  kernels::parallel::rbf_partial_sums(series, gamma, before, after);
  prefix_.assign(n + 1, 0.0);
  suffix_.assign(n + 1, 0.0);
  for (std::size_t t = 1; t <= n; ++t) prefix_[t] = prefix_[t - 1] + 1.0 + 2.0 * before[t - 1];
  for (std::size_t t = n; t-- > 0;) suffix_[t] = suffix_[t + 1] + 1.0 + 2.0 * after[t];
}

double RbfCost::prefix_cost(std::size_t t) const {
  if (t == 0) return 0.0;
  const double len = static_cast<double>(t);
  return len - prefix_[t] / len;
}

double RbfCost::suffix_cost(std::size_t t) const {
  const std::size_t n = size();
  if (t >= n) return 0.0;
  const double len = static_cast<double>(n - t);
  return len - suffix_[t] / len;
}

double RbfCost::gain(std::size_t t) const { return prefix_cost(size()) - prefix_cost(t) - suffix_cost(t); }

double rbf_cost(std::span<const double> series, std::size_t a, std::size_t b, double gamma) {
  if (a >= b || b > series.size()) {
    throw Error(Errc::OutOfRange, "segment [" + std::to_string(a) + ", " + std::to_string(b) + ") is outside a series of length " +
                                      std::to_string(series.size()));
  }
  if (b - a < 2) throw Error(Errc::SegmentTooShort, "rbf cost needs a segment of at least 2 points");
  double s = 0.0;
  for (std::size_t i = a; i < b; ++i)
    for (std::size_t j = a; j < b; ++j) s += std::exp(-gamma * (series[i] - series[j]) * (series[i] - series[j]));
  const double len = static_cast<double>(b - a);
  return len - s / len;
}

double median_bandwidth(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) throw Error(Errc::DegenerateSeries, "median bandwidth needs at least two values");
  const std::size_t total = n * (n - 1) / 2;
  constexpr std::size_t kMaxPairs = 10000;
  const std::size_t take = std::min(total, kMaxPairs);

  // Pair number p (row-major over i<j) is kept when it is the next of the
  // evenly spaced targets floor(k * total / take).
  std::vector<double> sq;
  sq.reserve(take);
  std::size_t p = 0, k = 0, target = 0;
  for (std::size_t i = 0; i < n && k < take; ++i) {
    for (std::size_t j = i + 1; j < n && k < take; ++j, ++p) {
      if (p == target) {
        const double d = series[i] - series[j];
        sq.push_back(d * d);
        ++k;
        target = k * total / take;
      }
    }
  }

  const auto median_of = [](std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
  };

  double med = median_of(sq);
  if (med <= 0.0) {
    std::vector<double> nonzero;
    for (const double v : sq)
      if (v > 0.0) nonzero.push_back(v);
    if (nonzero.empty()) {
      // The sampled pairs can all tie on a long series with few distinct values.
      const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
      if (*lo == *hi) throw Error(Errc::DegenerateSeries, "median bandwidth of a constant series is undefined");
      for (std::size_t i = 1; i < n; ++i) {
        const double d = series[i] - series[0];
        if (d != 0.0) nonzero.push_back(d * d);
      }
    }
    med = median_of(std::move(nonzero));
  }
  return 1.0 / med;
}

std::vector<double> split_gains(std::span<const double> series, double gamma, std::size_t min_segment) {
  const std::size_t n = series.size();
  if (min_segment == 0) throw Error(Errc::OutOfRange, "min_segment must be positive");
  if (n < 2 * min_segment) {
    throw Error(Errc::SeriesTooShort, "series of length " + std::to_string(n) + " is shorter than 2 * min_segment = " +
                                          std::to_string(2 * min_segment));
  }
  const RbfCost cost(series, gamma);
  std::vector<double> gains;
  gains.reserve(n - 2 * min_segment + 1);
  for (std::size_t t = min_segment; t <= n - min_segment; ++t) gains.push_back(cost.gain(t));
  return gains;
}

SplitResult best_split_gain(std::span<const double> series, double gamma, std::size_t min_segment) {
  const auto gains = split_gains(series, gamma, min_segment);
  SplitResult best{min_segment, gains.front()};
  for (std::size_t i = 1; i < gains.size(); ++i) {
    if (gains[i] > best.gain) best = {min_segment + i, gains[i]};
  }
  return best;
}

SplitResult best_split_gain(std::span<const double> series, std::size_t min_segment) {
  if (series.size() < 2 * min_segment) {
    throw Error(Errc::SeriesTooShort, "series of length " + std::to_string(series.size()) +
                                          " is shorter than 2 * min_segment = " + std::to_string(2 * min_segment));
  }
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi) return {min_segment, 0.0};
  return best_split_gain(series, median_bandwidth(series), min_segment);
}

}  // namespace trex
