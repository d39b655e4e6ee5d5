#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "trex/diffnum/graph.hpp"

namespace trex::diffnum {

/// Gradient buffers aligned with a parameter list.
template <typename T>
class GradBuffer {
 public:
  explicit GradBuffer(std::span<Parameter<T>* const> params) {
    grads_.reserve(params.size());
    for (const auto* p : params) grads_.emplace_back(p->value.shape());
  }

  void zero() {
    for (auto& g : grads_) g.fill(T{0});
  }

  /// grads += factor * (gradient each parameter received in `graph`).
  void accumulate(const Graph<T>& graph, std::span<Parameter<T>* const> params, T factor) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (const Tensor<T>* g = graph.param_grad(*params[i])) {
        T* dst = grads_[i].data();
        const T* src = g->data();
        for (std::size_t k = 0; k < grads_[i].size(); ++k) dst[k] += factor * src[k];
      }
    }
  }

  /// Rescales to a global L2 norm of at most `max_norm`; returns the norm before.
  double clip(double max_norm) {
    double ss = 0.0;
    for (const auto& g : grads_)
      for (const T v : g.values()) ss += static_cast<double>(v) * static_cast<double>(v);
    const double norm = std::sqrt(ss);
    if (max_norm > 0.0 && norm > max_norm) {
      const T factor = static_cast<T>(max_norm / (norm + 1e-6));
      for (auto& g : grads_)
        for (T& v : g.values()) v *= factor;
    }
    return norm;
  }

  std::vector<Tensor<T>>& tensors() noexcept { return grads_; }
  const std::vector<Tensor<T>>& tensors() const noexcept { return grads_; }

 private:
  std::vector<Tensor<T>> grads_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  ///< decoupled
};

template <typename T>
class Adam {
 public:
  Adam(std::span<Parameter<T>* const> params, AdamConfig config = {}) : config_(config) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void step(std::span<Parameter<T>* const> params, const GradBuffer<T>& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      T* w = params[i]->value.data();
      const T* g = grads.tensors()[i].data();
      T* m = m_[i].data();
      T* v = v_[i].data();
      const std::size_t n = params[i]->value.size();
      for (std::size_t k = 0; k < n; ++k) {
        m[k] = b1 * m[k] + (T(1) - b1) * g[k];
        v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
        const double mhat = static_cast<double>(m[k]) / c1;
        const double vhat = static_cast<double>(v[k]) / c2;
        double update = mhat / (std::sqrt(vhat) + config_.eps);
        if (config_.weight_decay > 0.0) update += config_.weight_decay * static_cast<double>(w[k]);
        w[k] -= static_cast<T>(lr * update);
      }
    }
  }

  long steps() const noexcept { return t_; }

 private:
  AdamConfig config_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  long t_ = 0;
};

/// Linear warmup to `base` over `warmup` steps, then cosine decay to `floor`.
inline double warmup_cosine_lr(long step, long total, long warmup, double base, double floor) {
  if (total <= 0) return base;
  if (step < warmup) return base * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(std::max(1L, total - warmup));
  return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

}  // namespace trex::diffnum
