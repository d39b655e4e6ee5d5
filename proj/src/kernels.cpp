#include "trex/kernels/kernels.hpp"

#include <cmath>

namespace trex::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;
}  // namespace

namespace serial {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
}

void rbf_partial_sums(std::span<const double> x, double gamma, std::span<double> before, std::span<double> after) {
  const std::size_t n = x.size();
  for (std::size_t t = 0; t < n; ++t) {
    double lo = 0.0;
    for (std::size_t i = 0; i < t; ++i) lo += std::exp(-gamma * (x[i] - x[t]) * (x[i] - x[t]));
    double hi = 0.0;
    for (std::size_t i = t + 1; i < n; ++i) hi += std::exp(-gamma * (x[i] - x[t]) * (x[i] - x[t]));
    before[t] = lo;
    after[t] = hi;
  }
}

}  // namespace serial

namespace parallel {

// The inner loops run over the contiguous output row so they vectorize; the
// per-element accumulation order over p matches the serial kernels except
// that products are summed into c directly, which is the same sequence of
// roundings because c starts the chain in both.
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[p * m + i];
      const T* brow = b + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void rbf_partial_sums(std::span<const double> x, double gamma, std::span<double> before, std::span<double> after) {
  const std::size_t n = x.size();
#pragma omp parallel for schedule(dynamic, 32) if (n * n > kParallelWork)
  for (std::size_t t = 0; t < n; ++t) {
    double lo = 0.0;
    for (std::size_t i = 0; i < t; ++i) lo += std::exp(-gamma * (x[i] - x[t]) * (x[i] - x[t]));
    double hi = 0.0;
    for (std::size_t i = t + 1; i < n; ++i) hi += std::exp(-gamma * (x[i] - x[t]) * (x[i] - x[t]));
    before[t] = lo;
    after[t] = hi;
  }
}

}  // namespace parallel

#define TREX_INSTANTIATE_GEMM(NS, T)                                                  \
  template void NS::gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*); \
  template void NS::gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*); \
  template void NS::gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*);

TREX_INSTANTIATE_GEMM(serial, float)
TREX_INSTANTIATE_GEMM(serial, double)
TREX_INSTANTIATE_GEMM(parallel, float)
TREX_INSTANTIATE_GEMM(parallel, double)

}  // namespace trex::kernels
