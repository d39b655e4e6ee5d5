#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include "test_util.hpp"
#include "trex/tire.hpp"

using namespace trex;

namespace {

std::vector<std::vector<double>> toy_samples(std::size_t n, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> out(n, std::vector<double>(len));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < len; ++t) out[s][t] = std::sin(0.5 * t + 0.3 * s) + 0.2 * normal(rng);
  return out;
}

TireConfig toy_config() {
  TireConfig c;
  c.window_size = 16;
  c.n_parallel = 2;
  c.hidden_dim = 8;
  c.epochs = 2;
  c.batch_size = 16;
  c.lr = 5e-3;
  c.pairs_per_sample = 4;
  c.seed = 5;
  return c;
}

double ti_consecutive_msd(const TireModel& m, const std::vector<std::vector<double>>& samples) {
  double acc = 0.0;
  std::size_t n = 0;
  const std::size_t w = m.config.window_size;
  for (const auto& s : samples)
    for (std::size_t t = 1; t + w <= s.size(); ++t) {
      const auto a = tire_embed(m, std::span(s).subspan(t - 1, w));
      const auto b = tire_embed(m, std::span(s).subspan(t, w));
      for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
      ++n;
    }
  return acc / static_cast<double>(n);
}

}  // namespace

TEST_CASE("dft magnitude examples") {
  const auto c = dft_magnitude(std::vector<double>(8, 1.5));
  REQUIRE(c.size() == 5);
  CHECK(c[0] == doctest::Approx(12.0).epsilon(1e-12));
  for (std::size_t k = 1; k < 5; ++k) CHECK(std::abs(c[k]) < 1e-12);

  std::vector<double> cosine(32);
  for (std::size_t n = 0; n < 32; ++n) cosine[n] = std::cos(2.0 * std::numbers::pi * 2.0 * n / 32.0);
  const auto m = dft_magnitude(cosine);
  REQUIRE(m.size() == 17);
  CHECK(m[2] == doctest::Approx(16.0).epsilon(1e-10));
  for (std::size_t k = 0; k < m.size(); ++k)
    if (k != 2) CHECK(m[k] < 1e-10);
}

TEST_CASE("dft magnitude matches a direct complex sum and Parseval") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (std::size_t n : {7u, 16u, 168u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = normal(rng);
    const auto mag = dft_magnitude(x);
    REQUIRE(mag.size() == n / 2 + 1);
    double energy = 0.0;
    for (double v : x) energy += v * v;
    double spectrum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * j % n) / n);
      spectrum += std::norm(s);
      if (k < mag.size()) CHECK(std::abs(mag[k] - std::abs(s)) < 1e-9);
    }
    // Full spectrum from the half spectrum by conjugate symmetry.
    double half = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k) {
      const bool paired = k != 0 && !(n % 2 == 0 && k == n / 2);
      half += (paired ? 2.0 : 1.0) * mag[k] * mag[k];
    }
    CHECK(std::abs(spectrum - n * energy) < 1e-9 * n * energy);
    CHECK(std::abs(half - n * energy) < 1e-9 * n * energy);
  }
}

TEST_CASE("tire input per domain") {
  const std::vector<double> w{1, 2, 3, 4};
  CHECK(tire_input(w, TireDomain::Time) == std::vector<float>{1, 2, 3, 4});
  const auto f = tire_input(w, TireDomain::Frequency);
  REQUIRE(f.size() == 3);
  CHECK(f[0] == doctest::Approx(5.0));
  CHECK(tire_domain_from_string("frequency") == TireDomain::Frequency);
  CHECK(to_string(TireDomain::Time) == "time");
}

TEST_CASE("tire config validation") {
  TireConfig c = toy_config();
  c.ti_features = 0;
  CHECK_THROWS_CODE(validate(c), Errc::ConfigError);
  c = toy_config();
  c.domains.clear();
  CHECK_THROWS_CODE(validate(c), Errc::ConfigError);
  const auto j = to_json(toy_config());
  CHECK(to_json(tire_config_from_json(j)) == j);
}

TEST_CASE("tire smoke training, embedding and checkpoint") {
  const auto samples = toy_samples(16, 32, 1);  // 16 samples x 4 pairs = 64 windows pairs
  TireTrainLog log;
  const auto model = train_tire(samples, toy_config(), &log);
  REQUIRE(log.epochs.size() == 2);
  for (const auto& e : log.epochs) {
    CHECK(std::isfinite(e.mean_loss));
    CHECK(e.mean_loss >= 0.0);
  }
  CHECK(log.epochs[1].mean_loss < log.epochs[0].mean_loss);
  CHECK(model.autoencoders.size() == 4);

  const auto window = std::span(samples[0]).subspan(3, 16);
  const auto e = tire_embed(model, window);
  CHECK(e.size() == 2 * 2 * 2);
  CHECK(e.size() == toy_config().embedding_dim());
  CHECK(e == tire_embed(model, window));
  CHECK(tire_encode(model.autoencoders[0], tire_input(window, TireDomain::Time)).size() == 3);

  TireTrainLog again;
  const auto model2 = train_tire(samples, toy_config(), &again);
  CHECK(again.epochs[1].mean_loss == log.epochs[1].mean_loss);
  CHECK(tire_embed(model2, window) == e);

  const auto path = std::filesystem::temp_directory_path() / "trex_tire_test.ckpt";
  save_tire_model(model, path);
  const auto back = load_tire_model(toy_config(), path);
  CHECK(tire_embed(back, window) == e);
}

TEST_CASE("plain autoencoder reconstruction improves") {
  auto c = toy_config();
  c.lambda = 0.0;
  c.epochs = 4;
  TireTrainLog log;
  train_tire(toy_samples(16, 32, 2), c, &log);
  CHECK(log.epochs.back().mean_reconstruction < log.epochs.front().mean_reconstruction);
  for (const auto& e : log.epochs) CHECK(e.mean_loss == doctest::Approx(e.mean_reconstruction));
}

TEST_CASE("similarity weight makes consecutive time-invariant features closer") {
  const auto samples = toy_samples(16, 48, 3);
  auto plain = toy_config();
  plain.lambda = 0.0;
  plain.epochs = 5;
  auto strong = plain;
  strong.lambda = 50.0;
  const double msd_plain = ti_consecutive_msd(train_tire(samples, plain), samples);
  const double msd_strong = ti_consecutive_msd(train_tire(samples, strong), samples);
  CHECK(msd_strong < msd_plain);
}
