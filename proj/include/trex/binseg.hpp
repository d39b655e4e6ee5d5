#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace trex {

/// Kernel sums of a series under k(u,v) = exp(-gamma (u-v)^2), cached so the
/// cost of every prefix [0,t) and suffix [t,n) is O(1) after O(n^2) setup.
class RbfCost {
 public:
  RbfCost(std::span<const double> series, double gamma);

  double gamma() const noexcept { return gamma_; }
  std::size_t size() const noexcept { return prefix_.size() - 1; }
  /// c(0, t).
  double prefix_cost(std::size_t t) const;
  /// c(t, n).
  double suffix_cost(std::size_t t) const;
  /// c(0,n) - c(0,t) - c(t,n).
  double gain(std::size_t t) const;

 private:
  double gamma_;
  std::vector<double> prefix_;  ///< prefix_[t] = sum_{i,j<t} k(x_i, x_j)
  std::vector<double> suffix_;  ///< suffix_[t] = sum_{i,j>=t} k(x_i, x_j)
};

/// c(a,b) = (b-a) - (1/(b-a)) sum_{a<=i,j<b} k(x_i, x_j). Direct O((b-a)^2)
/// evaluation. Throws SegmentTooShort when b - a < 2, OutOfRange on bad bounds.
double rbf_cost(std::span<const double> series, std::size_t a, std::size_t b, double gamma);

/// gamma = 1 / median of pairwise squared differences, over at most 10^4
/// evenly spaced pairs. Throws DegenerateSeries for constant input.
double median_bandwidth(std::span<const double> series);

struct SplitResult {
  std::size_t t = 0;
  double gain = 0.0;
};

/// gain(t) = c(0,n) - c(0,t) - c(t,n) for t = min_segment .. n - min_segment.
std::vector<double> split_gains(std::span<const double> series, double gamma, std::size_t min_segment);

/// Best single split with an explicit bandwidth; ties go to the smallest t.
/// Throws SeriesTooShort when n < 2 * min_segment.
SplitResult best_split_gain(std::span<const double> series, double gamma, std::size_t min_segment = 24);

/// Same with the median-heuristic bandwidth. A constant series scores 0 at
/// t = min_segment.
SplitResult best_split_gain(std::span<const double> series, std::size_t min_segment = 24);

}  // namespace trex
