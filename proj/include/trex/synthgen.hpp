#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trex/series.hpp"

namespace trex {

inline constexpr std::size_t kHoursPerWeek = 168;
inline constexpr std::size_t kSampleLength = 4 * kHoursPerWeek;
inline constexpr std::size_t kChangeIndex = 2 * kHoursPerWeek;

/// Generative parameters of one metric under one system parameter set.
///
/// Mean profile: base_level + amp_daily*sin(2*pi*t/24 + phase)
///                          + amp_weekly*sin(2*pi*t/168 + phase).
/// Discrete metrics draw Poisson counts around it (plus rare bursts that add
/// a second Poisson draw); continuous metrics draw Gamma values with that
/// mean and scale `noise_scale`. noise_scale == 0 removes all randomness.
struct ParamSet {
  int id = 0;
  double base_level = 0.0;
  double amp_daily = 0.0;
  double amp_weekly = 0.0;
  double phase = 0.0;
  double noise_scale = 0.0;
  double burst_rate = 0.0;
};

struct MetricSpec {
  std::string metric_id;
  MetricKind kind = MetricKind::Continuous;
  std::vector<ParamSet> param_sets;
  /// sensitive[k1][k2]: whether switching between k1 and k2 changes this metric.
  std::vector<std::vector<bool>> sensitive;
  std::uint64_t noise_key = 0;
};

struct CatalogConfig {
  std::size_t n_cells = 40;
  std::size_t n_param_sets = 5;
  double sensitive_fraction = 0.7;
};

struct MetricCatalog {
  std::vector<MetricSpec> metrics;
  std::size_t n_param_sets = 5;

  const MetricSpec& metric(const std::string& metric_id) const;
};

/// Telemetry-like catalog: 28 metric kinds per cell, each with its own
/// parameter sets and per-pair sensitivity draws.
MetricCatalog make_catalog(const CatalogConfig& config, std::uint64_t seed);

enum class Tier { None, Easy, Subtle };
std::string_view to_string(Tier tier) noexcept;
Tier tier_from_string(std::string_view s);

struct Provenance {
  int rho1 = 0;
  int rho2 = 0;
  int kappa1 = 0;
  int kappa2 = 0;
  std::string metric_id;
};

struct Sample {
  Timeseries series;
  bool label = false;
  std::optional<std::size_t> change_index;
  Provenance provenance;
  Tier tier = Tier::None;
};

void check_param_set(const ParamSet& params);

/// One simulated week: 168 hourly raw values, a pure function of
/// (metric, param set, seed).
Timeseries gen_week(const MetricSpec& metric, const ParamSet& params, int rho);

/// Four-week sample following the week layout
/// [(rho1,k1) | (rho2,k1) | (rho1,k2) | (rho2,k2)]; raw (not preprocessed).
/// An insensitive metric keeps k1's parameters in weeks 3-4.
Sample concat_sample(const MetricSpec& metric, int rho1, int rho2, int kappa1, int kappa2);

/// Easy when the switch moves base level or RMS amplitude by >= 25%;
/// otherwise subtle (harmonic mix, phase, burst changes).
Tier difficulty_tier(const ParamSet& a, const ParamSet& b);

struct WeeklyMoments {
  double mean = 0.0;
  double variance = 0.0;
};
/// Expected mean and variance of one generated week under `params`.
WeeklyMoments expected_weekly_moments(const ParamSet& params, MetricKind kind);

struct GeneratorConfig {
  std::size_t n_samples = 1000;
  double positive_fraction = 0.154;
  std::size_t n_param_sets = 5;
  std::size_t n_seeds = 10;
  CatalogConfig catalog;
  std::uint64_t master_seed = 2024;
  /// Of the negatives whose metric has an insensitive parameter pair, the
  /// share built from that pair rather than from a repeated parameter set.
  double insensitive_negative_share = 0.5;
};

void validate(const GeneratorConfig& config);

/// The catalog gen_dataset draws metrics from.
MetricCatalog dataset_catalog(const GeneratorConfig& config);

/// Preprocessed samples, deterministic in master_seed regardless of thread
/// count (every sample draws from its own derived stream).
std::vector<Sample> gen_dataset(const GeneratorConfig& config);
/// Same as gen_dataset but keeps raw values (used by property checks).
std::vector<Sample> gen_dataset_raw(const GeneratorConfig& config);

nlohmann::json to_json(const Sample& sample);
Sample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeneratorConfig& config);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

}  // namespace trex
