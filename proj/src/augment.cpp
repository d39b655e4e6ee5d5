#include "trex/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trex/error.hpp"

namespace trex {

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) noexcept {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - 1 - m);
}

std::vector<double> random_crop(std::span<const double> series, ScaleRange scale, std::size_t min_length, Rng& rng) {
  if (!(scale.lo > 0.0 && scale.lo <= scale.hi && scale.hi <= 1.0)) {
    throw Error(Errc::ConfigError, "crop scale range must satisfy 0 < lo <= hi <= 1");
  }
  const double len = static_cast<double>(series.size());
  const auto shortest = static_cast<std::size_t>(std::ceil(scale.lo * len - 1e-9));
  if (shortest < std::max<std::size_t>(min_length, 1)) {
    throw Error(Errc::CropTooShort, "shortest crop " + std::to_string(shortest) + " < required " +
                                        std::to_string(min_length));
  }
  auto longest = static_cast<std::size_t>(std::floor(scale.hi * len + 1e-9));
  longest = std::clamp(longest, shortest, series.size());
  const std::size_t length = std::uniform_int_distribution<std::size_t>(shortest, longest)(rng);
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, series.size() - length)(rng);
  return {series.begin() + static_cast<std::ptrdiff_t>(start),
          series.begin() + static_cast<std::ptrdiff_t>(start + length)};
}

std::vector<double> gaussian_blur_1d(std::span<const double> series, double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::ConfigError, "blur sigma must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
    const double w = std::exp(-0.5 * static_cast<double>(j * j) / (sigma * sigma));
    kernel[static_cast<std::size_t>(j + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const std::size_t n = series.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
      acc += kernel[static_cast<std::size_t>(j + radius)] *
             series[reflect_index(static_cast<std::ptrdiff_t>(i) + j, n)];
    }
    out[i] = acc;
  }
  return out;
}

std::vector<double> add_gaussian_noise(std::span<const double> series, double stddev, Rng& rng) {
  std::vector<double> out(series.begin(), series.end());
  if (stddev == 0.0) return out;
  if (!(stddev > 0.0)) throw Error(Errc::ConfigError, "noise std must be non-negative");
  std::normal_distribution<double> noise(0.0, stddev);
  for (double& v : out) v += noise(rng);
  return out;
}

namespace {

std::vector<double> augment_one(std::span<const double> sample, ScaleRange scale, const AugmentConfig& config,
                                Rng& rng) {
  auto view = random_crop(sample, scale, config.min_crop_length, rng);
  if (uniform01(rng) < config.blur_probability) {
    const double sigma =
        std::uniform_real_distribution<double>(config.blur_sigma_min, config.blur_sigma_max)(rng);
    view = gaussian_blur_1d(view, sigma);
  }
  return add_gaussian_noise(view, config.noise_std, rng);
}

}  // namespace

ViewSet make_views(std::span<const double> sample, const AugmentConfig& config, Rng& rng) {
  ViewSet views;
  views.source_length = sample.size();
  views.global_views.reserve(2);
  for (int i = 0; i < 2; ++i) views.global_views.push_back(augment_one(sample, config.global_scale, config, rng));
  views.local_views.reserve(config.n_local);
  for (std::size_t i = 0; i < config.n_local; ++i) {
    views.local_views.push_back(augment_one(sample, config.local_scale, config, rng));
  }
  return views;
}

}  // namespace trex
