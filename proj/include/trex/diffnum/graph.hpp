#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "trex/diffnum/tensor.hpp"

namespace trex::diffnum {

template <typename T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Graph<T>* graph() const noexcept { return graph_; }
  std::size_t id() const noexcept { return id_; }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Records operations in creation order so the backward sweep can visit
/// them in reverse topological order. A graph built with `record == false`
/// only evaluates (no closures, no gradients); teacher passes use that.
template <typename T>
class Graph {
 public:
  using Backward = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return record_; }

  Var<T> constant(Tensor<T> value);
  /// Leaf whose gradient can be read back with grad().
  Var<T> input(Tensor<T> value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var<T> param(const Parameter<T>& p);

  /// Appends an op result. `parents` are the inputs; `backward` is only kept
  /// when some parent needs a gradient.
  Var<T> emit(Tensor<T> value, std::initializer_list<std::size_t> parents, Backward backward, const char* op);
  Var<T> emit(Tensor<T> value, const std::vector<std::size_t>& parents, Backward backward, const char* op);

  void backward(const Var<T>& loss);

  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.borrowed ? *n.borrowed : n.value;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Upstream gradient of a node (empty when nothing flowed into it).
  const Tensor<T>& grad(std::size_t id) const { return nodes_[id].grad; }
  const Tensor<T>& grad(const Var<T>& v) const { return grad(v.id()); }
  /// Gradient accumulator of a node, allocated on first use.
  Tensor<T>& grad_accumulator(std::size_t id);
  /// Gradient reaching a parameter, or nullptr when it did not take part.
  const Tensor<T>* param_grad(const Parameter<T>& p) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* borrowed = nullptr;
    Tensor<T> grad;
    bool needs_grad = false;
    Backward backward;
  };

  bool record_;
  bool consumed_ = false;
  std::deque<Node> nodes_;  // deque: node references stay valid while ops append
  std::unordered_map<const Parameter<T>*, std::size_t> params_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

// ---- ops -------------------------------------------------------------------
// All ops take and return 2-D views unless stated otherwise.

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);     ///< (m,k)(k,n)
template <typename T> Var<T> matmul_nt(Var<T> a, Var<T> b);  ///< (m,k)(n,k)^T
template <typename T> Var<T> transpose(Var<T> a);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);        ///< elementwise
/// a (m,n) + row (1,n) broadcast over rows.
template <typename T> Var<T> add_row(Var<T> a, Var<T> row);
template <typename T> Var<T> scale(Var<T> a, T s);
/// axis 0 stacks rows, axis 1 joins columns.
template <typename T> Var<T> concat(const std::vector<Var<T>>& parts, int axis);
/// Half-open [begin, end) along axis 0 (rows) or 1 (columns).
template <typename T> Var<T> slice(Var<T> a, int axis, std::size_t begin, std::size_t end);
template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean(Var<T> a);
/// Row-wise normalization with affine gamma/beta of shape (1,n).
template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps);
template <typename T> Var<T> gelu(Var<T> a);  ///< exact erf form
template <typename T> Var<T> tanh(Var<T> a);
template <typename T> Var<T> softmax(Var<T> a, int axis);
template <typename T> Var<T> log_softmax(Var<T> a, int axis);
/// -sum(p * log_q); scalar.
template <typename T> Var<T> cross_entropy(Var<T> p, Var<T> log_q);
/// Channels-last 1-D cross-correlation: x (L, Cin), w (Cout, Cin, k) ->
/// (floor((L-k)/stride)+1, Cout).
template <typename T> Var<T> conv1d(Var<T> x, Var<T> w, std::size_t stride);
/// Rows scaled to unit L2 norm (norm floored at eps).
template <typename T> Var<T> l2_normalize(Var<T> a, T eps);

template <typename T>
Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T>
Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T>
Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }

}  // namespace trex::diffnum
