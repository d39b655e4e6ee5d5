#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "test_util.hpp"
#include "trex/diffnum/checkpoint.hpp"
#include "trex/diffnum/grad_check.hpp"
#include "trex/diffnum/graph.hpp"
#include "trex/diffnum/optim.hpp"

using namespace trex;
using namespace trex::diffnum;

namespace {

Tensor<double> randn(Shape shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

Parameter<double> param(const std::string& name, Shape shape, std::uint64_t seed, double scale = 1.0) {
  return {name, randn(std::move(shape), seed, scale)};
}

// Random linear read-out so every output entry gets a distinct weight.
Var<double> readout(Graph<double>& g, Var<double> y, std::uint64_t seed) {
  return sum(mul(y, g.constant(randn(y.shape(), seed))));
}

double check(const ScalarFn& f, std::vector<Parameter<double>*> params) {
  const auto r = grad_check(f, params, 1e-5, 64, 3);
  INFO("worst: " << r.worst_param << "[" << r.worst_index << "]");
  return r.max_rel_error;
}

}  // namespace

TEST_CASE("softmax and cross entropy values") {
  Graph<double> g;
  auto x = g.constant(Tensor<double>(Shape{1, 5}, 2.5));
  auto p = softmax(x, 1);
  for (double v : p.value().values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));

  auto u = g.constant(Tensor<double>(Shape{1, 4}, std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  auto h = cross_entropy(u, log_softmax(g.constant(Tensor<double>(Shape{1, 4}, 0.0)), 1));
  CHECK(h.value().item() == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(h.value().item() == doctest::Approx(1.3863).epsilon(1e-4));

  const auto r = randn({3, 7}, 5, 4.0);
  auto s1 = softmax(g.constant(r), 1).value();
  Tensor<double> shifted = r;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 7; ++j) shifted.at(i, j) += 10.0 * i - 3.0;
  auto s2 = softmax(g.constant(shifted), 1).value();
  for (std::size_t i = 0; i < 3; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 7; ++j) {
      row += s1.at(i, j);
      CHECK(std::abs(s1.at(i, j) - s2.at(i, j)) < 1e-12);
    }
    CHECK(std::abs(row - 1.0) < 1e-12);
  }
}

TEST_CASE("conv1d reproduces the kernel at an impulse") {
  Graph<double> g;
  Tensor<double> x(Shape{9, 1});
  x[4] = 1.0;
  const std::vector<double> k{1.0, 2.0, 3.0};
  auto y = conv1d(g.constant(x), g.constant(Tensor<double>(Shape{1, 1, 3}, k)), 1);
  REQUIRE(y.shape() == Shape{7, 1});
  // Cross-correlation: out[o] = sum_j x[o+j] k[j], so the kernel appears reversed.
  const std::vector<double> expected{0, 0, 3, 2, 1, 0, 0};
  for (std::size_t i = 0; i < 7; ++i) CHECK(y.value()[i] == expected[i]);

  auto z = conv1d(g.constant(Tensor<double>(Shape{16, 2}, 1.0)), g.constant(Tensor<double>(Shape{3, 2, 4}, 0.5)), 4);
  CHECK(z.shape() == Shape{4, 3});
  CHECK(z.value()[0] == 4.0);
}

TEST_CASE("backward hand examples") {
  Graph<double> g;
  auto x = g.input(Tensor<double>(Shape{1, 3}, std::vector<double>{1, 2, 3}));
  g.backward(sum(x * x));
  CHECK(g.grad(x).storage() == std::vector<double>{2, 4, 6});

  Graph<double> g2;
  auto y = g2.input(Tensor<double>(Shape{2, 2}, 0.7));
  g2.backward(sum(y));
  for (double v : g2.grad(y).values()) CHECK(v == 1.0);

  Graph<double> g3;
  auto z = g3.input(Tensor<double>(Shape{1, 4}, 0.1));
  g3.backward(sum(z + z));
  for (double v : g3.grad(z).values()) CHECK(v == 2.0);
}

TEST_CASE("graph error conditions") {
  Graph<double> g;
  auto x = g.input(Tensor<double>(Shape{1, 3}, 1.0));
  auto loss = sum(x);
  CHECK_THROWS_CODE(g.backward(x), Errc::NotScalar);
  g.backward(loss);
  CHECK_THROWS_CODE(g.backward(loss), Errc::TapeConsumed);

  Graph<double> h;
  auto big = h.input(Tensor<double>(Shape{1, 1}, 1e300));
  CHECK_THROWS_CODE(mul(big, big), Errc::NonFiniteValue);
  CHECK_THROWS_CODE(matmul(h.constant(Tensor<double>(Shape{2, 3})), h.constant(Tensor<double>(Shape{2, 3}))),
                    Errc::ShapeMismatch);
  CHECK_THROWS_CODE(Tensor<double>(Shape{2, 2}).item(), Errc::NotScalar);
}

TEST_CASE("forward passes are deterministic") {
  auto w = param("w", {6, 4}, 1);
  const auto run = [&] {
    Graph<double> g;
    return gelu(matmul(g.constant(randn({3, 6}, 2)), g.param(w))).value().storage();
  };
  CHECK(run() == run());
}

TEST_CASE("grad check: linear function is exact") {
  auto w = param("w", {4, 3}, 11);
  const auto x = randn({2, 4}, 12);
  const double err = check([&](Graph<double>& g) { return readout(g, matmul(g.constant(x), g.param(w)), 13); }, {&w});
  CHECK(err < 1e-10);
}

TEST_CASE("grad check: every op") {
  auto a = param("a", {3, 4}, 21);
  auto b = param("b", {4, 5}, 22);
  auto c = param("c", {3, 4}, 23);
  auto row = param("row", {1, 4}, 24);
  auto bt = param("bt", {5, 4}, 25);

  const std::vector<std::pair<const char*, ScalarFn>> cases = {
      {"matmul", [&](Graph<double>& g) { return readout(g, matmul(g.param(a), g.param(b)), 1); }},
      {"matmul_nt", [&](Graph<double>& g) { return readout(g, matmul_nt(g.param(a), g.param(bt)), 2); }},
      {"transpose", [&](Graph<double>& g) { return readout(g, transpose(g.param(a)), 3); }},
      {"add", [&](Graph<double>& g) { return readout(g, g.param(a) + g.param(c), 4); }},
      {"sub", [&](Graph<double>& g) { return readout(g, g.param(a) - g.param(c), 5); }},
      {"mul", [&](Graph<double>& g) { return readout(g, g.param(a) * g.param(c), 6); }},
      {"add_row", [&](Graph<double>& g) { return readout(g, add_row(g.param(a), g.param(row)), 7); }},
      {"scale", [&](Graph<double>& g) { return readout(g, scale(g.param(a), 0.37), 8); }},
      {"concat0", [&](Graph<double>& g) { return readout(g, concat<double>({g.param(a), g.param(c)}, 0), 9); }},
      {"concat1", [&](Graph<double>& g) { return readout(g, concat<double>({g.param(a), g.param(c)}, 1), 10); }},
      {"slice0", [&](Graph<double>& g) { return readout(g, slice(g.param(a), 0, 1, 3), 11); }},
      {"slice1", [&](Graph<double>& g) { return readout(g, slice(g.param(a), 1, 1, 3), 12); }},
      {"sum", [&](Graph<double>& g) { return scale(sum(g.param(a) * g.param(c)), 1.3); }},
      {"mean", [&](Graph<double>& g) { return mean(g.param(a) * g.param(c)); }},
      {"gelu", [&](Graph<double>& g) { return readout(g, gelu(g.param(a)), 13); }},
      {"tanh", [&](Graph<double>& g) { return readout(g, tanh(g.param(a)), 14); }},
      {"softmax0", [&](Graph<double>& g) { return readout(g, softmax(g.param(a), 0), 15); }},
      {"softmax1", [&](Graph<double>& g) { return readout(g, softmax(g.param(a), 1), 16); }},
      {"log_softmax0", [&](Graph<double>& g) { return readout(g, log_softmax(g.param(a), 0), 17); }},
      {"log_softmax1", [&](Graph<double>& g) { return readout(g, log_softmax(g.param(a), 1), 18); }},
      {"cross_entropy",
       [&](Graph<double>& g) { return cross_entropy(softmax(g.param(c), 1), log_softmax(g.param(a), 1)); }},
      {"l2_normalize", [&](Graph<double>& g) { return readout(g, l2_normalize(g.param(a), 1e-12), 19); }},
  };
  for (const auto& [name, f] : cases) {
    INFO(name);
    CHECK(check(f, {&a, &b, &c, &row, &bt}) < 1e-6);
  }
}

TEST_CASE("grad check: conv1d and layer_norm") {
  auto x = param("x", {20, 2}, 31);
  auto w = param("w", {3, 2, 4}, 32);
  for (std::size_t stride : {1, 2, 4}) {
    INFO("stride " << stride);
    CHECK(check([&](Graph<double>& g) { return readout(g, conv1d(g.param(x), g.param(w), stride), 33); }, {&x, &w}) <
          1e-6);
  }

  auto h = param("h", {5, 8}, 41);
  auto gamma = param("gamma", {1, 8}, 42, 0.5);
  auto beta = param("beta", {1, 8}, 43);
  auto proj = param("proj", {8, 6}, 44);
  const double err = check(
      [&](Graph<double>& g) {
        auto y = layer_norm(g.param(h), g.param(gamma), g.param(beta), 1e-6);
        return readout(g, gelu(matmul(y, g.param(proj))), 45);
      },
      {&h, &gamma, &beta, &proj});
  CHECK(err < 1e-5);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "trex_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "a.ckpt";
  Checkpoint ck;
  Tensor<float> f(Shape{2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6.5f});
  ck.add("layer/w", f);
  ck.add("step", Tensor<double>::scalar(42.0));
  ck.save(path);

  const auto back = Checkpoint::load(path);
  CHECK(back.contains("layer/w"));
  CHECK_FALSE(back.contains("missing"));
  CHECK(back.get<float>("layer/w").storage() == f.storage());
  CHECK(back.get<float>("layer/w").shape() == f.shape());
  CHECK(back.get<double>("layer/w").at(1, 2) == 6.5);
  CHECK(back.get<double>("step").item() == 42.0);
  CHECK_THROWS(back.get<float>("missing"));

  std::ifstream in(path, std::ios::binary);
  std::string first;
  std::getline(in, first);
  CHECK(first == "TREXCKPT 1");
  CHECK_THROWS_CODE(Checkpoint::load(dir / "nope.ckpt"), Errc::IoError);
}

TEST_CASE("adam minimizes a quadratic") {
  Parameter<double> p{"p", Tensor<double>(Shape{1, 3}, std::vector<double>{3.0, -2.0, 0.5})};
  std::vector<Parameter<double>*> ptrs{&p};
  Adam<double> adam(ptrs);
  GradBuffer<double> grads(ptrs);
  for (int i = 0; i < 2000; ++i) {
    Graph<double> g;
    auto v = g.param(p);
    auto loss = sum(v * v);
    g.backward(loss);
    grads.zero();
    grads.accumulate(g, ptrs, 1.0);
    adam.step(ptrs, grads, 0.01);
  }
  for (double v : p.value.values()) CHECK(std::abs(v) < 1e-2);

  grads.zero();
  grads.tensors()[0].fill(4.0);
  CHECK(grads.clip(1.0) == doctest::Approx(std::sqrt(48.0)));
  double norm = 0.0;
  for (double v : grads.tensors()[0].values()) norm += v * v;
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("warmup cosine schedule") {
  CHECK(warmup_cosine_lr(0, 100, 10, 1.0, 0.0) == doctest::Approx(0.1));
  CHECK(warmup_cosine_lr(9, 100, 10, 1.0, 0.0) == doctest::Approx(1.0));
  CHECK(warmup_cosine_lr(10, 100, 10, 1.0, 0.0) == doctest::Approx(1.0));
  CHECK(warmup_cosine_lr(100, 100, 10, 1.0, 0.1) == doctest::Approx(0.1));
  CHECK(warmup_cosine_lr(55, 100, 10, 1.0, 0.0) == doctest::Approx(0.5));
}
