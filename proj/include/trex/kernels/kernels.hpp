#pragma once

// Dense kernels in two flavours: `serial` is the straightforward reference
// kept for testing, `parallel` is the OpenMP version used by the library.
// Both compute identical results bit for bit: parallel variants split work
// by output row and keep each row's accumulation order.

#include <cstddef>
#include <span>

namespace trex::kernels {

// Row-major. C (m x n) += A (m x k) * B (k x n).
namespace serial {
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
/// C (m x n) += A (m x k) * B^T, B is (n x k).
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
/// C (m x n) += A^T * B, A is (k x m), B is (k x n).
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);

/// out[t] = sum_{i<t} exp(-gamma (x_i - x_t)^2), and `after` the same over i>t.
void rbf_partial_sums(std::span<const double> x, double gamma, std::span<double> before, std::span<double> after);
}  // namespace serial

namespace parallel {
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);

void rbf_partial_sums(std::span<const double> x, double gamma, std::span<double> before, std::span<double> after);
}  // namespace parallel

}  // namespace trex::kernels
