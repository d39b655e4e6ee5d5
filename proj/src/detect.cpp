#include "trex/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "trex/augment.hpp"
#include "trex/error.hpp"

namespace trex {

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(Errc::ShapeMismatch, "cosine distance of vectors with lengths " + std::to_string(u.size()) + " and " +
                                         std::to_string(v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (!(uu > 0.0) || !(vv > 0.0)) throw Error(Errc::ZeroVector, "cosine distance of a zero vector");
  const double c = dot / (std::sqrt(uu) * std::sqrt(vv));
  return 1.0 - std::clamp(c, -1.0, 1.0);
}

DissimilarityProfile profile(std::span<const double> sample, const Embedder& embed, std::size_t half_window,
                             std::size_t stride) {
  if (half_window == 0 || stride == 0) throw Error(Errc::OutOfRange, "half_window and stride must be positive");
  if (sample.size() < 2 * half_window) {
    throw Error(Errc::SeriesTooShort, "sample of length " + std::to_string(sample.size()) + " is shorter than 2W = " +
                                          std::to_string(2 * half_window));
  }
  DissimilarityProfile p;
  p.half_window = half_window;
  p.stride = stride;
  std::unordered_map<std::size_t, std::vector<double>> cache;
  const auto window = [&](std::size_t start) -> const std::vector<double>& {
    auto it = cache.find(start);
    if (it == cache.end()) it = cache.emplace(start, embed(sample.subspan(start, half_window))).first;
    return it->second;
  };
  for (std::size_t t = half_window; t + half_window <= sample.size(); t += stride) {
    p.positions.push_back(t);
    p.d.push_back(cosine_distance(window(t - half_window), window(t)));
  }
  return p;
}

std::vector<double> smooth(std::span<const double> d, std::size_t width) {
  if (width == 0) throw Error(Errc::OutOfRange, "smoothing width must be positive");
  if (width % 2 == 0) ++width;
  if (width > d.size()) {
    throw Error(Errc::WidthTooLarge, "smoothing width " + std::to_string(width) + " exceeds profile length " +
                                         std::to_string(d.size()));
  }
  const auto r = static_cast<std::ptrdiff_t>(width / 2);
  const auto n = static_cast<std::ptrdiff_t>(d.size());
  std::vector<double> out(d.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::ptrdiff_t j = -r; j <= r; ++j) s += d[reflect_index(i + j, d.size())];
    out[static_cast<std::size_t>(i)] = s / static_cast<double>(width);
  }
  return out;
}

std::size_t smoothing_width(std::size_t width_steps, std::size_t stride) {
  if (stride == 0) throw Error(Errc::OutOfRange, "stride must be positive");
  const auto w = static_cast<std::size_t>(std::llround(static_cast<double>(width_steps) / static_cast<double>(stride)));
  return std::max<std::size_t>(1, w);
}

double sample_score(std::span<const double> d) {
  if (d.empty()) return 0.0;
  return *std::max_element(d.begin(), d.end());
}

std::vector<std::size_t> detect_peaks(std::span<const double> d, double threshold, std::size_t min_distance) {
  if (min_distance == 0) throw Error(Errc::OutOfRange, "min_distance must be at least 1");
  std::vector<std::size_t> candidates;
  const std::size_t n = d.size();
  std::size_t i = 1;
  while (i + 1 < n) {
    if (d[i] > d[i - 1]) {
      std::size_t r = i;
      while (r + 1 < n && d[r + 1] == d[i]) ++r;
      if (r + 1 < n && d[r + 1] < d[i] && d[i] > threshold) candidates.push_back((i + r) / 2);
      i = r + 1;
    } else {
      ++i;
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  std::vector<std::size_t> kept;
  for (const std::size_t c : candidates) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return (c > k ? c - k : k - c) >= min_distance;
    });
    if (clear) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

double embedding_score(std::span<const double> sample, const Embedder& embed, const DetectorConfig& config) {
  const auto p = profile(sample, embed, config.half_window, config.stride);
  std::size_t width = smoothing_width(config.smooth_width, config.stride);
  if (width % 2 == 0) ++width;
  width = std::min(width, p.d.size() % 2 == 1 ? p.d.size() : p.d.size() - 1);
  return sample_score(smooth(p.d, std::max<std::size_t>(width, 1)));
}

}  // namespace trex
