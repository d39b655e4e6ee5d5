#include <cmath>
#include <filesystem>
#include <random>

#include "test_util.hpp"
#include "trex/dino.hpp"
#include "trex/diffnum/grad_check.hpp"
#include "trex/synthgen.hpp"

using namespace trex;

namespace {

VitConfig toy_vit() {
  VitConfig c;
  c.patch_size = 8;
  c.embed_dim = 16;
  c.depth = 1;
  c.n_heads = 2;
  c.head_hidden = 24;
  c.head_bottleneck = 12;
  c.out_dim = 16;
  c.canonical_length = 64;
  return c;
}

// The small model of the bundled configs.
VitConfig small_vit() {
  VitConfig c;
  c.patch_size = 16;
  c.embed_dim = 32;
  c.depth = 2;
  c.n_heads = 2;
  c.head_hidden = 64;
  c.head_bottleneck = 32;
  c.out_dim = 64;
  return c;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

std::vector<double> encode(const VisionTransformer1d<double>& net, const std::vector<double>& x) {
  diffnum::Graph<double> g(false);
  return net.encode(g, x).value().storage();
}

}  // namespace

TEST_CASE("patch token counts") {
  VitConfig c;
  c.depth = 1;
  VisionTransformer1d<double> net(c, 1);
  CHECK(net.patch_count(672) == 84);
  CHECK(net.patch_count(40) == 5);
  diffnum::Graph<double> g(false);
  CHECK(net.patch_embed(g, std::vector<double>(672, 0.1)).shape() == diffnum::Shape{85, 64});
  CHECK(net.patch_embed(g, std::vector<double>(40, 0.1)).shape() == diffnum::Shape{6, 64});
  CHECK_THROWS_CODE(net.patch_embed(g, std::vector<double>(7, 0.1)), Errc::SeriesTooShort);

  VitConfig one = c;
  one.patch_size = 672;
  VisionTransformer1d<double> single(one, 1);
  CHECK(single.patch_embed(g, std::vector<double>(672, 0.1)).shape() == diffnum::Shape{2, 64});
}

TEST_CASE("interpolation matrix rows are convex weights") {
  for (auto [out, in] : {std::pair<std::size_t, std::size_t>{5, 84}, {84, 84}, {100, 7}, {1, 10}}) {
    const auto m = interpolation_matrix(out, in);
    REQUIRE(m.size() == out * in);
    for (std::size_t i = 0; i < out; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < in; ++j) {
        CHECK(m[i * in + j] >= 0.0);
        s += m[i * in + j];
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  const auto id = interpolation_matrix(4, 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(id[i * 4 + i] == 1.0);
}

TEST_CASE("encode shape, determinism and sensitivity") {
  VisionTransformer1d<double> net(toy_vit(), 3);
  for (std::size_t len : {8u, 40u, 64u, 130u}) CHECK(encode(net, noise(len, len)).size() == 16);
  const auto x = noise(64, 1);
  CHECK(encode(net, x) == encode(net, x));
  int differ = 0;
  for (int i = 0; i < 100; ++i) differ += encode(net, noise(64, 100 + 2 * i)) != encode(net, noise(64, 101 + 2 * i));
  CHECK(differ == 100);
}

TEST_CASE("sharpen") {
  const std::vector<double> g{1.0, 0.0};
  const auto p = sharpen(g, 1.0);
  CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-15));
  const auto sharp = sharpen(g, 0.01);
  CHECK(sharp[0] > 1.0 - 1e-12);
  CHECK(sharpen(g, 0.1)[0] > p[0]);

  const auto u = sharpen(std::vector<double>(7, 0.0), 0.04);
  for (double v : u) CHECK(v == doctest::Approx(1.0 / 7).epsilon(1e-15));

  const auto r = noise(64, 9);
  auto shifted = r;
  for (auto& v : shifted) v += 123.0;
  for (double tau : {0.04, 0.1, 1.0}) {
    const auto a = sharpen(r, tau);
    const auto b = sharpen(shifted, tau);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i] >= 0.0);
      CHECK(std::abs(a[i] - b[i]) < 1e-12);
      s += a[i];
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  CHECK(entropy(u) == doctest::Approx(std::log(7.0)));
}

TEST_CASE("dino_loss term counts and stop-gradient") {
  ModelState<double> state(toy_vit(), 5);
  DinoConfig cfg;
  Rng rng(4);
  const auto x = noise(64, 4);

  AugmentConfig aug;
  aug.n_local = 0;
  aug.min_crop_length = 16;
  aug.local_scale = {0.3, 0.5};
  auto views = make_views(x, aug, rng);
  diffnum::Graph<double> g;
  auto two = dino_loss(g, views, state, cfg);
  CHECK(two.n_terms == 2);
  CHECK(two.teacher_outputs.size() == 2);

  aug.n_local = 6;
  views = make_views(x, aug, rng);
  diffnum::Graph<double> g8;
  auto eight = dino_loss(g8, views, state, cfg);
  CHECK(eight.n_terms == 14);
  CHECK(std::isfinite(eight.loss.value().item()));
  g8.backward(eight.loss);
  for (const auto& p : state.teacher.parameters()) CHECK(g8.param_grad(p) == nullptr);
  std::size_t with_grad = 0;
  for (const auto& p : state.student.parameters()) with_grad += g8.param_grad(p) != nullptr;
  CHECK(with_grad == state.student.parameters().size());
}

TEST_CASE("dino_loss reaches the entropy bound when student matches teacher") {
  // Equal temperatures, zero center and identical networks: with two
  // identical global views every student distribution equals its target.
  ModelState<double> state(toy_vit(), 6);
  DinoConfig cfg;
  cfg.student_temp = cfg.teacher_temp = 0.5;
  ViewSet views;
  const auto x = noise(64, 6);
  views.global_views = {x, x};
  views.source_length = 64;
  diffnum::Graph<double> g;
  auto terms = dino_loss(g, views, state, cfg);
  const auto p = sharpen(encode(state.teacher, x), 0.5);
  CHECK(terms.loss.value().item() == doctest::Approx(2.0 * entropy(p)).epsilon(1e-10));
  CHECK(terms.teacher_entropy == doctest::Approx(entropy(p)).epsilon(1e-10));
}

TEST_CASE("ema update") {
  ModelState<double> state(toy_vit(), 7);
  ModelState<double> other(toy_vit(), 8);
  state.student = other.student;
  const auto t0 = state.teacher.parameters();
  const auto& s = state.student.parameters();

  ema_update(state, 1.0);
  for (std::size_t i = 0; i < t0.size(); ++i) CHECK(state.teacher.parameters()[i].value.storage() == t0[i].value.storage());

  ema_update(state, 0.25);
  for (std::size_t i = 0; i < t0.size(); ++i) {
    const auto& now = state.teacher.parameters()[i].value;
    REQUIRE(now.shape() == t0[i].value.shape());
    for (std::size_t k = 0; k < now.size(); ++k)
      CHECK(std::abs(std::abs(now[k] - s[i].value[k]) - 0.25 * std::abs(t0[i].value[k] - s[i].value[k])) < 1e-12);
  }

  ema_update(state, 0.0);
  for (std::size_t i = 0; i < t0.size(); ++i) CHECK(state.teacher.parameters()[i].value.storage() == s[i].value.storage());

  state.teacher.parameters()[0].value[0] = 1.0;
  state.student.parameters()[0].value[0] = 0.0;
  ema_update(state, 0.5);
  CHECK(state.teacher.parameters()[0].value[0] == 0.5);
}

TEST_CASE("center update") {
  std::vector<double> c{0.3, -0.2};
  center_update(c, {{1.0, 0.0}, {0.0, 1.0}}, 1.0);
  CHECK(c == std::vector<double>{0.3, -0.2});
  center_update(c, {{1.0, 0.0}, {0.0, 1.0}}, 0.0);
  CHECK(c == std::vector<double>{0.5, 0.5});

  std::vector<double> d{2.0, -1.0};
  const std::vector<double> mu{0.25, 0.75};
  const double m = 0.9;
  for (int n = 1; n <= 60; ++n) {
    center_update(d, {mu, mu}, m);
    const double f = std::pow(m, n);
    CHECK(std::abs(d[0] - (mu[0] + f * (2.0 - mu[0]))) < 1e-9);
    CHECK(std::abs(d[1] - (mu[1] + f * (-1.0 - mu[1]))) < 1e-9);
  }
}

TEST_CASE("full model gradient check") {
  VitConfig vit = toy_vit();
  vit.embed_dim = 8;
  vit.head_hidden = 12;
  vit.head_bottleneck = 6;
  vit.out_dim = 8;
  vit.init_std = 0.5;
  ModelState<double> state(vit, 11);
  ModelState<double> other(vit, 12);
  state.teacher = other.student;
  state.center = std::vector<double>(8, 0.1);
  DinoConfig cfg;
  cfg.student_temp = 0.5;
  cfg.teacher_temp = 0.2;
  const auto x = noise(64, 13);
  ViewSet views;
  views.global_views = {x, std::vector<double>(x.begin(), x.begin() + 48)};
  views.local_views = {std::vector<double>(x.begin() + 20, x.begin() + 36)};
  views.source_length = 64;

  auto params = state.student.parameter_ptrs();
  const auto r = diffnum::grad_check(
      [&](diffnum::Graph<double>& g) { return dino_loss(g, views, state, cfg).loss; }, params, 1e-4, 16, 1);
  INFO("worst: " << r.worst_param << "[" << r.worst_index << "] over " << r.coords_checked);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("training smoke run") {
  GeneratorConfig gen;
  gen.n_samples = 32;
  gen.master_seed = 21;
  std::vector<std::vector<double>> samples;
  for (const auto& sample : gen_dataset(gen)) samples.push_back(sample.series.values);

  VitConfig vit = small_vit();
  DinoConfig dino;
  DinoTrainConfig train;
  train.epochs = 2;
  train.batch_size = 8;
  train.seed = 3;
  DinoTrainLog log;
  const auto state = train_dino(samples, vit, dino, train, &log);
  REQUIRE(log.epochs.size() == 2);
  CHECK(log.epochs[1].mean_loss < log.epochs[0].mean_loss);
  CHECK(state.step == 8);

  DinoTrainLog again;
  const auto state2 = train_dino(samples, vit, dino, train, &again);
  CHECK(again.step_loss == log.step_loss);

  const auto w = embed_window(state, std::span(samples[0]).subspan(0, 168));
  CHECK(w.size() == 64);
  CHECK(w == embed_window(state, std::span(samples[0]).subspan(0, 168)));
  CHECK(w == embed_window(state2, std::span(samples[0]).subspan(0, 168)));

  const auto path = std::filesystem::temp_directory_path() / "trex_dino_test.ckpt";
  save_model_state(state, path);
  const auto back = load_model_state(vit, path);
  CHECK(back.step == state.step);
  CHECK(back.center == state.center);
  CHECK(embed_window(back, std::span(samples[0]).subspan(0, 168)) == w);

  DinoConfig degenerate = dino;
  degenerate.teacher_momentum = 0.0;
  degenerate.center_momentum = 0.0;
  train.epochs = 1;
  DinoTrainLog dlog;
  train_dino(samples, vit, degenerate, train, &dlog);
  REQUIRE(dlog.step_loss.size() == 4);
  for (double l : dlog.step_loss) CHECK(std::isfinite(l));
}
