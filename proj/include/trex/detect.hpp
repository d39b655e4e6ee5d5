#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace trex {

/// 1 - (u.v)/(|u||v|), in [0, 2]. Throws ZeroVector / ShapeMismatch.
double cosine_distance(std::span<const double> u, std::span<const double> v);

using Embedder = std::function<std::vector<double>(std::span<const double>)>;

struct DissimilarityProfile {
  std::vector<double> d;
  std::vector<std::size_t> positions;  ///< t for each entry of d
  std::size_t half_window = 0;
  std::size_t stride = 1;
};

/// d_t = cosine_distance(g(x[t-W, t)), g(x[t, t+W))) for t = W, W+stride,
/// ..., len-W. Embeddings are computed once per window start.
DissimilarityProfile profile(std::span<const double> sample, const Embedder& embed, std::size_t half_window = 168,
                             std::size_t stride = 1);

/// Centered moving average with reflect padding (d c b a | a b c d). An even
/// width is widened by one. Throws WidthTooLarge when width > d.size().
std::vector<double> smooth(std::span<const double> d, std::size_t width = 24);

/// Filter width in profile samples for a width given in time steps.
std::size_t smoothing_width(std::size_t width_steps, std::size_t stride);

/// Max of a (smoothed) profile; 0 for an empty one.
double sample_score(std::span<const double> d);

/// Local maxima strictly above `threshold` (plateaus count once, at their
/// middle; endpoints are not peaks), chosen greedily by height so that any
/// two kept indices are at least `min_distance` apart. Ascending indices.
std::vector<std::size_t> detect_peaks(std::span<const double> d, double threshold, std::size_t min_distance = 168);

struct DetectorConfig {
  std::size_t half_window = 168;  ///< W
  std::size_t stride = 1;
  std::size_t smooth_width = 24;  ///< time steps
  std::size_t min_segment = 24;   ///< Binseg margin
};

/// Profile, smoothing and max: the score of one sample under an embedder.
double embedding_score(std::span<const double> sample, const Embedder& embed, const DetectorConfig& config);

}  // namespace trex
