#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "trex/rng.hpp"

namespace trex {

struct ScaleRange {
  double lo = 1.0;
  double hi = 1.0;
};

struct AugmentConfig {
  ScaleRange global_scale{0.4, 1.0};
  ScaleRange local_scale{0.05, 0.4};
  std::size_t n_local = 6;
  double blur_probability = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  double noise_std = 0.3;
  /// Shortest crop the consuming model accepts (two patches).
  std::size_t min_crop_length = 16;
};

/// Augmented crops of one sample: two global views, then the local views.
struct ViewSet {
  std::vector<std::vector<double>> global_views;
  std::vector<std::vector<double>> local_views;
  std::size_t source_length = 0;

  std::size_t size() const noexcept { return global_views.size() + local_views.size(); }
  /// Globals first, then locals.
  const std::vector<double>& view(std::size_t i) const {
    return i < global_views.size() ? global_views[i] : local_views[i - global_views.size()];
  }
};

/// Contiguous crop with length uniform in [ceil(lo*len), floor(hi*len)] and
/// uniform start. Throws CropTooShort when ceil(lo*len) < min_length.
std::vector<double> random_crop(std::span<const double> series, ScaleRange scale, std::size_t min_length, Rng& rng);

/// Normalized Gaussian kernel of radius ceil(3*sigma), edge-repeating
/// ("reflect", d c b a | a b c d) boundary handling. Length preserving.
std::vector<double> gaussian_blur_1d(std::span<const double> series, double sigma);

std::vector<double> add_gaussian_noise(std::span<const double> series, double stddev, Rng& rng);

/// Each view: crop, then blur with probability `blur_probability` (sigma
/// uniform in the configured range), then additive noise.
ViewSet make_views(std::span<const double> sample, const AugmentConfig& config, Rng& rng);

/// Index of `i` mirrored into [0, n) with edge repetition; any offset.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) noexcept;

}  // namespace trex
