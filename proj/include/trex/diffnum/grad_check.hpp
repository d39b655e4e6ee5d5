#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "trex/diffnum/graph.hpp"

namespace trex::diffnum {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
};

using ScalarFn = std::function<Var<double>(Graph<double>&)>;

/// Compares reverse-mode gradients of `f` with central differences
/// (f(p+eps) - f(p-eps)) / (2 eps). Tensors larger than `coords_per_tensor`
/// are checked on a seeded random subset of that many coordinates.
/// Error per coordinate: |g_ad - g_fd| / max(|g_ad|, |g_fd|, floor). The
/// floor keeps exactly-zero gradients (e.g. attention key biases) from
/// turning central-difference rounding noise, about |f| * 1e-16 / eps, into
/// a large relative error.
inline GradCheckResult grad_check(const ScalarFn& f, const std::vector<Parameter<double>*>& params,
                                  double eps = 1e-5, std::size_t coords_per_tensor = 64,
                                  std::uint64_t seed = 0, double floor = 1e-6) {
  Graph<double> graph;
  const Var<double> loss = f(graph);
  graph.backward(loss);

  const auto evaluate = [&f]() {
    Graph<double> g(false);
    return f(g).value().item();
  };

  GradCheckResult result;
  std::mt19937_64 rng(seed);
  for (Parameter<double>* p : params) {
    const Tensor<double>* ad = graph.param_grad(*p);
    const std::size_t n = p->value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(coords_per_tensor);
    }
    for (const std::size_t i : coords) {
      const double original = p->value[i];
      p->value[i] = original + eps;
      const double up = evaluate();
      p->value[i] = original - eps;
      const double down = evaluate();
      p->value[i] = original;
      const double fd = (up - down) / (2.0 * eps);
      const double g = ad ? (*ad)[i] : 0.0;
      const double err = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), floor});
      ++result.coords_checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = p->name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace trex::diffnum
