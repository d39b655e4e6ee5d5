#include <cmath>
#include <numbers>
#include <numeric>

#include "test_util.hpp"
#include "trex/synthgen.hpp"

using namespace trex;

namespace {

MetricSpec simple_metric(MetricKind kind, std::vector<ParamSet> sets, bool sensitive) {
  MetricSpec m;
  m.metric_id = "cell0/probe";
  m.kind = kind;
  m.noise_key = 12345;
  const std::size_t n = sets.size();
  m.param_sets = std::move(sets);
  m.sensitive.assign(n, std::vector<bool>(n, sensitive));
  return m;
}

double autocorr(const std::vector<double>& x, std::size_t lag) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) den += (x[i] - m) * (x[i] - m);
  for (std::size_t i = 0; i + lag < x.size(); ++i) num += (x[i] - m) * (x[i + lag] - m);
  return num / den;
}

std::vector<double> week(const std::vector<double>& v, std::size_t w) {
  return {v.begin() + w * 168, v.begin() + (w + 1) * 168};
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST_CASE("gen_week without variation sources is constant") {
  const auto m = simple_metric(MetricKind::Continuous, {{0, 7.0, 0.0, 0.0, 0.0, 0.0, 0.0}}, true);
  const auto w = gen_week(m, m.param_sets[0], 3);
  REQUIRE(w.size() == 168);
  for (double v : w.values) CHECK(v == 7.0);
}

TEST_CASE("gen_week is deterministic and seasonal") {
  const ParamSet p{0, 40.0, 15.0, 0.0, 0.3, 1.0, 0.0};
  const auto m = simple_metric(MetricKind::Discrete, {p}, true);
  CHECK(gen_week(m, p, 4).values == gen_week(m, p, 4).values);
  CHECK(gen_week(m, p, 4).values != gen_week(m, p, 5).values);

  double lag24 = 0.0, lag13 = 0.0;
  for (int rho = 0; rho < 10; ++rho) {
    const auto w = gen_week(m, p, rho);
    lag24 += autocorr(w.values, 24);
    lag13 += autocorr(w.values, 13);
  }
  CHECK(lag24 / 10 > lag13 / 10);
}

TEST_CASE("check_param_set rejects sets that can go negative") {
  CHECK_NOTHROW(check_param_set({0, 10.0, 3.0, 3.0, 0.0, 1.0, 0.0}));
  CHECK_THROWS_CODE(check_param_set({0, 1.0, 3.0, 0.0, 0.0, 1.0, 0.0}), Errc::InvalidParamSet);
  CHECK_THROWS_CODE(check_param_set({0, 10.0, 1.0, 0.0, 0.0, -1.0, 0.0}), Errc::InvalidParamSet);
}

TEST_CASE("concat_sample week layout and labels") {
  const ParamSet a{0, 20.0, 5.0, 0.0, 0.0, 0.5, 0.0};
  const ParamSet b{1, 40.0, 10.0, 0.0, 0.0, 0.5, 0.0};
  const auto sens = simple_metric(MetricKind::Continuous, {a, b}, true);
  const auto insens = simple_metric(MetricKind::Continuous, {a, b}, false);

  auto s = concat_sample(sens, 1, 2, 0, 0);
  CHECK_FALSE(s.label);
  CHECK_FALSE(s.change_index.has_value());
  CHECK(s.tier == Tier::None);
  CHECK(week(s.series.values, 0) == week(s.series.values, 2));
  CHECK(week(s.series.values, 1) == week(s.series.values, 3));
  CHECK(s.series.size() == 672);

  s = concat_sample(sens, 1, 2, 0, 1);
  CHECK(s.label);
  REQUIRE(s.change_index.has_value());
  CHECK(*s.change_index == 336);
  CHECK(week(s.series.values, 0) == gen_week(sens, a, 1).values);
  CHECK(week(s.series.values, 2) == gen_week(sens, b, 1).values);
  CHECK(week(s.series.values, 0) != week(s.series.values, 2));
  CHECK(s.tier == Tier::Easy);

  s = concat_sample(insens, 1, 2, 0, 1);
  CHECK_FALSE(s.label);
  CHECK(week(s.series.values, 0) == week(s.series.values, 2));
  CHECK(s.provenance.kappa2 == 1);

  CHECK_THROWS_CODE(concat_sample(sens, 3, 3, 0, 1), Errc::SeedCollision);
  CHECK_THROWS_CODE(concat_sample(sens, 1, 2, 0, 7), Errc::InvalidParamSet);
}

TEST_CASE("difficulty tiers") {
  CHECK(difficulty_tier({0, 10.0, 2.0, 0.0, 0.0, 1.0, 0.0}, {1, 20.0, 2.0, 0.0, 0.0, 1.0, 0.0}) == Tier::Easy);
  CHECK(difficulty_tier({0, 10.0, 2.0, 1.0, 0.0, 1.0, 0.0},
                        {1, 10.0, 2.0, 1.0, std::numbers::pi / 2, 1.0, 0.0}) == Tier::Subtle);
  CHECK(difficulty_tier({0, 10.0, 4.0, 0.0, 0.0, 1.0, 0.0}, {1, 10.0, 0.0, 4.0, 0.0, 1.0, 0.0}) == Tier::Subtle);
}

TEST_CASE("harmonic redistribution keeps weekly mean and variance") {
  const ParamSet daily{0, 50.0, 20.0, 0.0, 0.4, 2.5, 0.0};
  const ParamSet weekly{1, 50.0, 0.0, 20.0, 0.4, 2.5, 0.0};
  const auto m = simple_metric(MetricKind::Continuous, {daily, weekly}, true);
  double mean_d = 0, var_d = 0, mean_w = 0, var_w = 0;
  for (int rho = 0; rho < 10; ++rho) {
    const auto d = gen_week(m, daily, rho).values;
    const auto w = gen_week(m, weekly, rho).values;
    const double md = mean_of(d), mw = mean_of(w);
    double vd = 0, vw = 0;
    for (std::size_t i = 0; i < 168; ++i) {
      vd += (d[i] - md) * (d[i] - md) / 168.0;
      vw += (w[i] - mw) * (w[i] - mw) / 168.0;
    }
    mean_d += md / 10;
    mean_w += mw / 10;
    var_d += vd / 10;
    var_w += vw / 10;
  }
  CHECK(std::abs(mean_d - mean_w) / mean_d < 0.05);
  CHECK(std::abs(var_d - var_w) / var_d < 0.05);

  const auto ed = expected_weekly_moments(daily, MetricKind::Continuous);
  const auto ew = expected_weekly_moments(weekly, MetricKind::Continuous);
  CHECK(ed.mean == doctest::Approx(ew.mean).epsilon(1e-12));
  CHECK(ed.variance == doctest::Approx(ew.variance).epsilon(1e-9));
  CHECK(std::abs(mean_d - ed.mean) / ed.mean < 0.05);
}

TEST_CASE("gen_dataset counts and determinism") {
  GeneratorConfig c;
  c.n_samples = 1000;
  const auto a = gen_dataset(c);
  std::size_t pos = 0;
  for (const auto& s : a) pos += s.label;
  CHECK(pos >= 134);
  CHECK(pos <= 174);

  const auto b = gen_dataset(c);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(to_json(a[i]).dump() == to_json(b[i]).dump());

  c.positive_fraction = 0.0;
  for (const auto& s : gen_dataset(c)) CHECK_FALSE(s.label);

  c.positive_fraction = 1.5;
  CHECK_THROWS_CODE(validate(c), Errc::ConfigError);
}

TEST_CASE("gen_dataset week statistics") {
  GeneratorConfig c;
  c.n_samples = 1500;
  c.master_seed = 99;
  const auto samples = gen_dataset_raw(c);
  const auto catalog = dataset_catalog(c);

  std::size_t neg = 0, neg_ok = 0, easy = 0, easy_ok = 0;
  for (const auto& s : samples) {
    const auto& metric = catalog.metric(s.provenance.metric_id);
    const auto& p = metric.param_sets[s.provenance.kappa1];
    // Per-hour noise variance averaged over the week.
    double mean_m = 0.0, mean_m2 = 0.0;
    for (std::size_t t = 0; t < 168; ++t) {
      const double m = std::max(0.0, p.base_level + p.amp_daily * std::sin(2 * std::numbers::pi * t / 24.0 + p.phase) +
                                         p.amp_weekly * std::sin(2 * std::numbers::pi * t / 168.0 + p.phase));
      mean_m += m / 168;
      mean_m2 += m * m / 168;
    }
    const double q = p.burst_rate;
    const double noise_var = metric.kind == MetricKind::Discrete ? mean_m * (1 + q) + q * (1 - q) * mean_m2
                                                                 : mean_m * p.noise_scale;
    const double se = std::sqrt(2.0 * noise_var / 168.0);
    double w[4];
    for (std::size_t k = 0; k < 4; ++k) w[k] = mean_of(week(s.series.values, k));
    if (!s.label) {
      ++neg;
      bool ok = true;
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) ok = ok && std::abs(w[i] - w[j]) <= 3.0 * se;
      neg_ok += ok;
    } else if (s.tier == Tier::Easy) {
      ++easy;
      easy_ok += std::abs((w[2] + w[3]) / 2 - (w[0] + w[1]) / 2) >= 5.0 * se;
    }
  }
  REQUIRE(neg > 1000);
  REQUIRE(easy > 50);
  // Week means of negatives differ by noise only: Gaussian tails put a few
  // tenths of a percent of weeks beyond 3 standard errors.
  CHECK(static_cast<double>(neg_ok) / neg >= 0.98);
  CHECK(easy_ok == easy);
}

TEST_CASE("sample json round trip") {
  GeneratorConfig c;
  c.n_samples = 20;
  for (const auto& s : gen_dataset(c)) {
    const auto back = sample_from_json(nlohmann::json::parse(to_json(s).dump()));
    CHECK(back.series.values == s.series.values);
    CHECK(back.label == s.label);
    CHECK(back.change_index == s.change_index);
    CHECK(back.tier == s.tier);
    CHECK(back.provenance.metric_id == s.provenance.metric_id);
  }
  const auto j = to_json(c);
  CHECK(to_json(generator_config_from_json(j)) == j);
}
