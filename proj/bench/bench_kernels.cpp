// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "trex/kernels/kernels.hpp"

namespace {

std::vector<float> random_matrix(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> normal;
  std::vector<float> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

template <bool Parallel>
void BM_GemmNN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n * n, 1), b = random_matrix(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0f);
    if constexpr (Parallel) {
      trex::kernels::parallel::gemm_nn(n, n, n, a.data(), b.data(), c.data());
    } else {
      trex::kernels::serial::gemm_nn(n, n, n, a.data(), b.data(), c.data());
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<long>(state.iterations() * n * n * n));
}

template <bool Parallel>
void BM_GemmNT(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n * n, 3), b = random_matrix(n * n, 4);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0f);
    if constexpr (Parallel) {
      trex::kernels::parallel::gemm_nt(n, n, n, a.data(), b.data(), c.data());
    } else {
      trex::kernels::serial::gemm_nt(n, n, n, a.data(), b.data(), c.data());
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<long>(state.iterations() * n * n * n));
}

template <bool Parallel>
void BM_RbfPartialSums(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> x(n), before(n), after(n);
  std::mt19937 rng(5);
  std::normal_distribution<double> normal;
  for (auto& v : x) v = normal(rng);
  for (auto _ : state) {
    if constexpr (Parallel) {
      trex::kernels::parallel::rbf_partial_sums(x, 0.5, before, after);
    } else {
      trex::kernels::serial::rbf_partial_sums(x, 0.5, before, after);
    }
    benchmark::DoNotOptimize(before.data());
  }
  state.SetItemsProcessed(static_cast<long>(state.iterations() * n * n));
}

}  // namespace

BENCHMARK(BM_GemmNN<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_GemmNN<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_GemmNT<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_GemmNT<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_RbfPartialSums<false>)->Arg(672)->Arg(2688);
BENCHMARK(BM_RbfPartialSums<true>)->Arg(672)->Arg(2688);

BENCHMARK_MAIN();
