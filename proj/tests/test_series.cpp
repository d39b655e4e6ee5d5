#include <cmath>
#include <numbers>
#include <numeric>

#include "test_util.hpp"
#include "trex/series.hpp"

using namespace trex;

namespace {

Timeseries make(std::vector<double> v, MetricKind kind = MetricKind::Continuous) {
  return Timeseries{std::move(v), "cell0/test", kind};
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double pop_var(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / v.size();
}

}  // namespace

TEST_CASE("preprocess rejects constant and negative series") {
  CHECK_THROWS_CODE(preprocess(make({5, 5, 5, 5})), Errc::DegenerateSeries);
  CHECK_THROWS_CODE(preprocess(make({1, -0.5, 2})), Errc::NegativeInput);
  CHECK_THROWS_CODE(preprocess(make({3})), Errc::DegenerateSeries);
}

TEST_CASE("preprocess hand example") {
  const double e1 = std::numbers::e - 1.0;
  const auto out = preprocess(make({0, e1, 0, e1}));
  const std::vector<double> expected{-1, 1, -1, 1};
  REQUIRE(out.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(out.values[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  CHECK(out.metric_id == "cell0/test");
}

TEST_CASE("preprocess yields zero mean and unit variance") {
  std::vector<double> v(672);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 50.0 + 30.0 * std::sin(0.26 * i) + (i % 7);
  const auto out = preprocess(make(v));
  CHECK(std::abs(mean(out.values)) < 1e-9);
  CHECK(std::abs(pop_var(out.values) - 1.0) < 1e-6);

  // Scaling only acts through the log transform; both outputs stay standardized.
  std::vector<double> scaled(v);
  for (double& x : scaled) x *= 3.0;
  const auto out2 = preprocess(make(scaled));
  CHECK(std::abs(mean(out2.values)) < 1e-9);
  CHECK(std::abs(pop_var(out2.values) - 1.0) < 1e-6);
  CHECK(preprocess(make(v)).values == out.values);
}

TEST_CASE("slice_window_pair boundaries") {
  std::vector<double> v(672);
  std::iota(v.begin(), v.end(), 0.0);

  auto p = slice_window_pair(v, 168, 168);
  CHECK(p.left.size() == 168);
  CHECK(p.right.size() == 168);
  CHECK(p.left.front() == 0.0);
  CHECK(p.right.front() == 168.0);
  CHECK(p.right.back() == 335.0);

  p = slice_window_pair(v, 336, 168);
  CHECK(p.left.front() == 168.0);
  CHECK(p.left.back() == 335.0);
  CHECK(p.right.front() == 336.0);
  CHECK(p.right.back() == 503.0);
  CHECK(p.center == 336);

  // left ++ right tiles series[t-W, t+W)
  CHECK(p.left.data() + p.left.size() == p.right.data());

  CHECK_THROWS_CODE(slice_window_pair(v, 100, 168), Errc::OutOfRange);
  CHECK_THROWS_CODE(slice_window_pair(v, 505, 168), Errc::OutOfRange);
  CHECK_NOTHROW(slice_window_pair(v, 504, 168));
}

TEST_CASE("validate checks discrete raw values") {
  CHECK_NOTHROW(validate(make({0, 1, 2}, MetricKind::Discrete), true));
  CHECK_THROWS(validate(make({0, 1.5, 2}, MetricKind::Discrete), true));
  CHECK_THROWS(validate(make({}), false));
  CHECK_THROWS(validate(make({1.0, NAN}), false));
}

TEST_CASE("timeseries json round trip") {
  const auto ts = make({0.25, 1.0 / 3.0, 7.0}, MetricKind::Discrete);
  const auto back = timeseries_from_json(nlohmann::json::parse(to_json(ts).dump()));
  CHECK(back.values == ts.values);
  CHECK(back.metric_id == ts.metric_id);
  CHECK(back.kind == MetricKind::Discrete);
  CHECK(to_string(MetricKind::Continuous) == "continuous");
}
