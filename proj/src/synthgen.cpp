#include "trex/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "trex/error.hpp"
#include "trex/rng.hpp"

namespace trex {

namespace {

struct MetricTemplate {
  const char* name;
  MetricKind kind;
  double base_lo;
  double base_hi;
};

// 28 per-cell PM metrics: KPIs and lower-level subsystem counters.
constexpr std::array<MetricTemplate, 28> kTemplates{{
    {"active_ue_dl", MetricKind::Discrete, 15, 80},
    {"active_ue_ul", MetricKind::Discrete, 10, 60},
    {"rrc_conn_attempts", MetricKind::Discrete, 40, 200},
    {"rrc_conn_success", MetricKind::Discrete, 35, 180},
    {"ho_attempts", MetricKind::Discrete, 20, 120},
    {"ho_success", MetricKind::Discrete, 18, 110},
    {"erab_setup_attempts", MetricKind::Discrete, 30, 150},
    {"erab_setup_success", MetricKind::Discrete, 28, 140},
    {"paging_records", MetricKind::Discrete, 50, 250},
    {"rach_attempts", MetricKind::Discrete, 25, 130},
    {"cqi_reports", MetricKind::Discrete, 60, 300},
    {"rlc_retx_count", MetricKind::Discrete, 12, 70},
    {"harq_nack_count", MetricKind::Discrete, 20, 100},
    {"scell_activations", MetricKind::Discrete, 10, 50},
    {"dl_throughput", MetricKind::Continuous, 10, 80},
    {"ul_throughput", MetricKind::Continuous, 2, 20},
    {"prb_usage_dl", MetricKind::Continuous, 10, 60},
    {"prb_usage_ul", MetricKind::Continuous, 5, 40},
    {"dl_volume", MetricKind::Continuous, 100, 2000},
    {"ul_volume", MetricKind::Continuous, 20, 400},
    {"dl_latency", MetricKind::Continuous, 5, 40},
    {"avg_cqi", MetricKind::Continuous, 6, 12},
    {"avg_sinr", MetricKind::Continuous, 5, 25},
    {"avg_mcs", MetricKind::Continuous, 8, 24},
    {"pdcp_delay", MetricKind::Continuous, 2, 20},
    {"ue_tx_power", MetricKind::Continuous, 5, 20},
    {"bler_dl", MetricKind::Continuous, 3, 15},
    {"cell_energy", MetricKind::Continuous, 200, 800},
}};

double log_uniform(double lo, double hi, Rng& rng) {
  return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng));
}

double mean_profile(const ParamSet& p, std::size_t t) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double tt = static_cast<double>(t);
  const double m = p.base_level + p.amp_daily * std::sin(two_pi * tt / 24.0 + p.phase) +
                   p.amp_weekly * std::sin(two_pi * tt / 168.0 + p.phase);
  return std::max(m, 0.0);
}

}  // namespace

const MetricSpec& MetricCatalog::metric(const std::string& metric_id) const {
  for (const auto& m : metrics) {
    if (m.metric_id == metric_id) return m;
  }
  throw Error(Errc::InvalidParamSet, "unknown metric '" + metric_id + "'");
}

MetricCatalog make_catalog(const CatalogConfig& config, std::uint64_t seed) {
  if (config.n_param_sets < 2 || config.n_param_sets > 5) {
    throw Error(Errc::ConfigError, "n_param_sets must be in [2, 5]");
  }
  if (config.n_cells == 0) throw Error(Errc::ConfigError, "catalog needs at least one cell");
  if (!(config.sensitive_fraction >= 0.0 && config.sensitive_fraction <= 1.0)) {
    throw Error(Errc::ConfigError, "sensitive_fraction must be in [0, 1]");
  }

  MetricCatalog catalog;
  catalog.n_param_sets = config.n_param_sets;
  catalog.metrics.reserve(config.n_cells * kTemplates.size());
  for (std::size_t cell = 0; cell < config.n_cells; ++cell) {
    for (std::size_t k = 0; k < kTemplates.size(); ++k) {
      const auto& tmpl = kTemplates[k];
      Rng rng(derive_seed(seed, cell, k));
      MetricSpec spec;
      spec.metric_id = "cell" + std::to_string(cell) + "/" + tmpl.name;
      spec.kind = tmpl.kind;
      spec.noise_key = derive_seed(seed, cell, k, 0x5eed);

      const double level = log_uniform(tmpl.base_lo, tmpl.base_hi, rng);
      const double rel_amp = std::uniform_real_distribution<double>(0.3, 0.6)(rng);
      const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
      const double up = std::uniform_real_distribution<double>(1.6, 2.2)(rng);
      const double down = std::uniform_real_distribution<double>(0.4, 0.6)(rng);
      double noise = 1.0;
      double burst = 0.0;
      if (tmpl.kind == MetricKind::Continuous) {
        const double cv = std::uniform_real_distribution<double>(0.05, 0.15)(rng);
        noise = level * cv * cv;
      } else {
        burst = std::uniform_real_distribution<double>(0.0, 0.01)(rng);
      }
      const double a = rel_amp * level;
      const double half = a / std::numbers::sqrt2;
      // Three sets share level and harmonic power (daily, weekly, mixed);
      // two move the level (and amplitude with it).
      std::vector<ParamSet> protos{
          {0, level, a, 0.0, phase, noise, burst},
          {0, level, 0.0, a, phase, noise, burst},
          {0, level, half, half, phase, noise, burst},
          {0, level * up, a * up, 0.0, phase, noise, burst},
          {0, level * down, half * down, half * down, phase, noise, burst},
      };
      std::shuffle(protos.begin(), protos.end(), rng);
      protos.resize(config.n_param_sets);
      for (std::size_t i = 0; i < protos.size(); ++i) protos[i].id = static_cast<int>(i);
      spec.param_sets = std::move(protos);

      const std::size_t n = config.n_param_sets;
      spec.sensitive.assign(n, std::vector<bool>(n, false));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          const bool s = uniform01(rng) < config.sensitive_fraction;
          spec.sensitive[i][j] = s;
          spec.sensitive[j][i] = s;
        }
      }
      catalog.metrics.push_back(std::move(spec));
    }
  }
  return catalog;
}

std::string_view to_string(Tier tier) noexcept {
  switch (tier) {
    case Tier::Easy: return "easy";
    case Tier::Subtle: return "subtle";
    case Tier::None: break;
  }
  return "none";
}

Tier tier_from_string(std::string_view s) {
  if (s == "easy") return Tier::Easy;
  if (s == "subtle") return Tier::Subtle;
  if (s == "none") return Tier::None;
  throw Error(Errc::IoError, "unknown tier '" + std::string(s) + "'");
}

void check_param_set(const ParamSet& p) {
  const bool ok = p.base_level >= 0.0 && p.noise_scale >= 0.0 && p.amp_daily >= 0.0 && p.amp_weekly >= 0.0 &&
                  p.burst_rate >= 0.0 && p.burst_rate <= 1.0 && p.amp_daily + p.amp_weekly <= p.base_level + 1e-12 &&
                  std::isfinite(p.phase);
  if (!ok) {
    throw Error(Errc::InvalidParamSet,
                "parameter set " + std::to_string(p.id) + " can produce negative or undefined values");
  }
}

Timeseries gen_week(const MetricSpec& metric, const ParamSet& params, int rho) {
  check_param_set(params);
  Rng rng(derive_seed(metric.noise_key, static_cast<std::uint64_t>(params.id), static_cast<std::uint64_t>(rho)));
  Timeseries week{std::vector<double>(kHoursPerWeek), metric.metric_id, metric.kind};
  const bool stochastic = params.noise_scale > 0.0;
  for (std::size_t t = 0; t < kHoursPerWeek; ++t) {
    const double m = mean_profile(params, t);
    double v = m;
    if (metric.kind == MetricKind::Discrete) {
      if (!stochastic) {
        v = std::round(m);
      } else {
        v = m > 0.0 ? static_cast<double>(std::poisson_distribution<long>(m)(rng)) : 0.0;
        if (uniform01(rng) < params.burst_rate && m > 0.0) {
          v += static_cast<double>(std::poisson_distribution<long>(m)(rng));
        }
      }
    } else if (stochastic && m > 0.0) {
      v = std::gamma_distribution<double>(m / params.noise_scale, params.noise_scale)(rng);
    }
    week.values[t] = v;
  }
  return week;
}

Sample concat_sample(const MetricSpec& metric, int rho1, int rho2, int kappa1, int kappa2) {
  if (rho1 == rho2) throw Error(Errc::SeedCollision, "rho1 and rho2 must differ");
  const auto n = static_cast<int>(metric.param_sets.size());
  if (kappa1 < 0 || kappa2 < 0 || kappa1 >= n || kappa2 >= n) {
    throw Error(Errc::InvalidParamSet, "parameter set index out of range for '" + metric.metric_id + "'");
  }
  const bool sensitive = kappa1 != kappa2 && metric.sensitive[kappa1][kappa2];
  const ParamSet& first = metric.param_sets[kappa1];
  const ParamSet& second = metric.param_sets[sensitive ? kappa2 : kappa1];

  Sample sample;
  sample.series.metric_id = metric.metric_id;
  sample.series.kind = metric.kind;
  sample.series.values.reserve(kSampleLength);
  for (const auto& [params, rho] : {std::pair{&first, rho1}, {&first, rho2}, {&second, rho1}, {&second, rho2}}) {
    const auto week = gen_week(metric, *params, rho);
    sample.series.values.insert(sample.series.values.end(), week.values.begin(), week.values.end());
  }
  sample.label = sensitive;
  if (sensitive) {
    sample.change_index = kChangeIndex;
    sample.tier = difficulty_tier(first, metric.param_sets[kappa2]);
  }
  sample.provenance = Provenance{rho1, rho2, kappa1, kappa2, metric.metric_id};
  return sample;
}

Tier difficulty_tier(const ParamSet& a, const ParamSet& b) {
  const auto rel_change = [](double from, double to) {
    if (from == 0.0) return to == 0.0 ? 0.0 : 1.0;
    return std::abs(to - from) / std::abs(from);
  };
  const double amp_a = std::hypot(a.amp_daily, a.amp_weekly);
  const double amp_b = std::hypot(b.amp_daily, b.amp_weekly);
  if (rel_change(a.base_level, b.base_level) >= 0.25 || rel_change(amp_a, amp_b) >= 0.25) return Tier::Easy;
  return Tier::Subtle;
}

WeeklyMoments expected_weekly_moments(const ParamSet& params, MetricKind kind) {
  // Both harmonics complete whole cycles within a week and are orthogonal.
  WeeklyMoments out;
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t t = 0; t < kHoursPerWeek; ++t) {
    const double m = mean_profile(params, t);
    mean += m;
    second += m * m;
  }
  mean /= static_cast<double>(kHoursPerWeek);
  second /= static_cast<double>(kHoursPerWeek);
  double noise_var = 0.0;
  if (params.noise_scale > 0.0) {
    if (kind == MetricKind::Discrete) {
      // Poisson(m) plus Bernoulli(q) * Poisson(m): mean m(1+q), var m(1+q) + q(1-q)m^2.
      const double q = params.burst_rate;
      out.mean = mean * (1.0 + q);
      const double between = (second - mean * mean) * (1.0 + q) * (1.0 + q);
      out.variance = mean * (1.0 + q) + q * (1.0 - q) * second + between;
      return out;
    }
    noise_var = mean * params.noise_scale;
  }
  out.mean = mean;
  out.variance = second - mean * mean + noise_var;
  return out;
}

void validate(const GeneratorConfig& c) {
  if (c.n_samples == 0) throw Error(Errc::ConfigError, "n_samples must be positive");
  if (!(c.positive_fraction >= 0.0 && c.positive_fraction < 1.0)) {
    throw Error(Errc::ConfigError, "positive_fraction must be in [0, 1), got " + std::to_string(c.positive_fraction));
  }
  if (c.n_seeds < 2) throw Error(Errc::ConfigError, "n_seeds must be at least 2");
  if (c.n_param_sets < 2 || c.n_param_sets > 5) throw Error(Errc::ConfigError, "n_param_sets must be in [2, 5]");
  if (!(c.insensitive_negative_share >= 0.0 && c.insensitive_negative_share <= 1.0)) {
    throw Error(Errc::ConfigError, "insensitive_negative_share must be in [0, 1]");
  }
}

MetricCatalog dataset_catalog(const GeneratorConfig& config) {
  CatalogConfig catalog_config = config.catalog;
  catalog_config.n_param_sets = config.n_param_sets;
  return make_catalog(catalog_config, derive_seed(config.master_seed, 0xca7a));
}

namespace {

std::vector<Sample> generate(const GeneratorConfig& config, bool preprocessed) {
  validate(config);
  const MetricCatalog catalog = dataset_catalog(config);

  const std::size_t n = config.n_samples;
  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.positive_fraction));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng(derive_seed(config.master_seed, 1));
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  std::vector<bool> positive(n, false);
  for (std::size_t i = 0; i < n_pos; ++i) positive[order[i]] = true;

  std::vector<std::size_t> eligible;
  for (std::size_t m = 0; m < catalog.metrics.size(); ++m) {
    const auto& s = catalog.metrics[m].sensitive;
    const bool any = std::any_of(s.begin(), s.end(), [](const auto& row) {
      return std::find(row.begin(), row.end(), true) != row.end();
    });
    if (any) eligible.push_back(m);
  }
  if (n_pos > 0 && eligible.empty()) throw Error(Errc::ConfigError, "no metric is sensitive to any parameter switch");

  const int n_kappa = static_cast<int>(config.n_param_sets);
  const int n_rho = static_cast<int>(config.n_seeds);
  std::vector<Sample> samples(n);
  std::vector<std::string> failures(n);

#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(derive_seed(config.master_seed, 2, i, attempt));
        const auto pick = [&rng](std::size_t count) {
          return std::uniform_int_distribution<std::size_t>(0, count - 1)(rng);
        };
        std::size_t metric_index = 0;
        int k1 = 0;
        int k2 = 0;
        if (positive[i]) {
          metric_index = eligible[pick(eligible.size())];
          const auto& s = catalog.metrics[metric_index].sensitive;
          std::vector<std::pair<int, int>> pairs;
          for (int a = 0; a < n_kappa; ++a)
            for (int b = 0; b < n_kappa; ++b)
              if (s[a][b]) pairs.emplace_back(a, b);
          std::tie(k1, k2) = pairs[pick(pairs.size())];
        } else {
          metric_index = pick(catalog.metrics.size());
          const auto& s = catalog.metrics[metric_index].sensitive;
          std::vector<std::pair<int, int>> pairs;
          for (int a = 0; a < n_kappa; ++a)
            for (int b = 0; b < n_kappa; ++b)
              if (a != b && !s[a][b]) pairs.emplace_back(a, b);
          if (!pairs.empty() && uniform01(rng) < config.insensitive_negative_share) {
            std::tie(k1, k2) = pairs[pick(pairs.size())];
          } else {
            k1 = k2 = static_cast<int>(pick(static_cast<std::size_t>(n_kappa)));
          }
        }
        const int rho1 = static_cast<int>(pick(static_cast<std::size_t>(n_rho)));
        int rho2 = static_cast<int>(pick(static_cast<std::size_t>(n_rho - 1)));
        if (rho2 >= rho1) ++rho2;

        Sample sample = concat_sample(catalog.metrics[metric_index], rho1, rho2, k1, k2);
        try {
          Timeseries cleaned = preprocess(sample.series);
          if (preprocessed) sample.series = std::move(cleaned);
        } catch (const Error& e) {
          if (e.code() == Errc::DegenerateSeries && attempt < 64) continue;
          throw;
        }
        samples[i] = std::move(sample);
        break;
      }
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }
  for (const auto& f : failures) {
    if (!f.empty()) throw Error(Errc::ConfigError, "sample generation failed: " + f);
  }
  return samples;
}

}  // namespace

std::vector<Sample> gen_dataset(const GeneratorConfig& config) { return generate(config, true); }
std::vector<Sample> gen_dataset_raw(const GeneratorConfig& config) { return generate(config, false); }

nlohmann::json to_json(const Sample& s) {
  nlohmann::json j;
  j["series"] = to_json(s.series);
  j["label"] = s.label;
  j["change_index"] = s.change_index ? nlohmann::json(*s.change_index) : nlohmann::json(nullptr);
  j["provenance"] = {{"rho1", s.provenance.rho1},
                     {"rho2", s.provenance.rho2},
                     {"kappa1", s.provenance.kappa1},
                     {"kappa2", s.provenance.kappa2},
                     {"metric_id", s.provenance.metric_id}};
  j["tier"] = to_string(s.tier);
  return j;
}

Sample sample_from_json(const nlohmann::json& j) {
  try {
    Sample s;
    s.series = timeseries_from_json(j.at("series"));
    s.label = j.at("label").get<bool>();
    if (!j.at("change_index").is_null()) s.change_index = j.at("change_index").get<std::size_t>();
    const auto& p = j.at("provenance");
    s.provenance = Provenance{p.at("rho1").get<int>(), p.at("rho2").get<int>(), p.at("kappa1").get<int>(),
                              p.at("kappa2").get<int>(), p.at("metric_id").get<std::string>()};
    s.tier = tier_from_string(j.at("tier").get<std::string>());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoError, std::string("malformed sample record: ") + e.what());
  }
}

nlohmann::json to_json(const GeneratorConfig& c) {
  return {{"n_samples", c.n_samples},
          {"positive_fraction", c.positive_fraction},
          {"n_param_sets", c.n_param_sets},
          {"n_seeds", c.n_seeds},
          {"n_cells", c.catalog.n_cells},
          {"sensitive_fraction", c.catalog.sensitive_fraction},
          {"insensitive_negative_share", c.insensitive_negative_share},
          {"master_seed", c.master_seed}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.n_samples = j.value("n_samples", c.n_samples);
  c.positive_fraction = j.value("positive_fraction", c.positive_fraction);
  c.n_param_sets = j.value("n_param_sets", c.n_param_sets);
  c.n_seeds = j.value("n_seeds", c.n_seeds);
  c.catalog.n_cells = j.value("n_cells", c.catalog.n_cells);
  c.catalog.sensitive_fraction = j.value("sensitive_fraction", c.catalog.sensitive_fraction);
  c.insensitive_negative_share = j.value("insensitive_negative_share", c.insensitive_negative_share);
  c.master_seed = j.value("master_seed", c.master_seed);
  return c;
}

}  // namespace trex
