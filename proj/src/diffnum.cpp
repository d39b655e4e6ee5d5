#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "trex/diffnum/graph.hpp"
#include "trex/kernels/kernels.hpp"

namespace trex::diffnum {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

// ---- graph -----------------------------------------------------------------

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::input(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::param(const Parameter<T>& p) {
  if (auto it = params_.find(&p); it != params_.end()) return Var<T>(this, it->second);
  Node n;
  n.borrowed = &p.value;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  params_.emplace(&p, nodes_.size() - 1);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::emit(Tensor<T> value, std::initializer_list<std::size_t> parents, Backward backward, const char* op) {
  return emit(std::move(value), std::vector<std::size_t>(parents), std::move(backward), op);
}

template <typename T>
Var<T> Graph<T>::emit(Tensor<T> value, const std::vector<std::size_t>& parents, Backward backward, const char* op) {
  for (const T v : value.values()) {
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, std::string("op '") + op + "' produced a non-finite value");
  }
  Node n;
  n.value = std::move(value);
  if (record_) {
    n.needs_grad = std::any_of(parents.begin(), parents.end(), [this](std::size_t p) { return nodes_[p].needs_grad; });
    if (n.needs_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T>& Graph<T>::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
  return n.grad;
}

template <typename T>
void Graph<T>::backward(const Var<T>& loss) {
  if (consumed_) throw Error(Errc::TapeConsumed, "backward already ran on this graph; rebuild the forward pass");
  if (loss.value().size() != 1) {
    throw Error(Errc::NotScalar, "backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  consumed_ = true;
  if (!record_ || !nodes_[loss.id()].needs_grad) return;
  grad_accumulator(loss.id())[0] = T{1};
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, i);
  }
}

template <typename T>
const Tensor<T>* Graph<T>::param_grad(const Parameter<T>& p) const {
  auto it = params_.find(&p);
  if (it == params_.end() || nodes_[it->second].grad.empty()) return nullptr;
  return &nodes_[it->second].grad;
}

// ---- helpers ---------------------------------------------------------------

namespace {

template <typename T>
void require(bool ok, const char* op, const Shape& a, const Shape& b) {
  if (!ok) {
    throw Error(Errc::ShapeMismatch, std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                                         shape_string(b));
  }
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) throw Error(Errc::ShapeMismatch, std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

template <typename T>
void accumulate(Graph<T>& g, std::size_t id, const Tensor<T>& delta, T factor = T{1}) {
  if (!g.needs_grad(id)) return;
  auto& acc = g.grad_accumulator(id);
  T* dst = acc.data();
  const T* src = delta.data();
  const std::size_t n = acc.size();
  for (std::size_t i = 0; i < n; ++i) dst[i] += factor * src[i];
}

template <typename T>
T gelu_cdf(T x) {
  return T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

}  // namespace

// ---- linear algebra --------------------------------------------------------

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  require<T>(av.shape()[1] == bv.shape()[0], "matmul", av.shape(), bv.shape());
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  Tensor<T> out(Shape{m, n});
  kernels::parallel::gemm_nn(m, n, k, av.data(), bv.data(), out.data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->emit(std::move(out), {ia, ib}, [ia, ib, m, n, k](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    if (g.needs_grad(ia)) kernels::parallel::gemm_nt(m, k, n, gy.data(), g.value(ib).data(), g.grad_accumulator(ia).data());
    if (g.needs_grad(ib)) kernels::parallel::gemm_tn(k, n, m, g.value(ia).data(), gy.data(), g.grad_accumulator(ib).data());
  }, "matmul");
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_matrix(av, "matmul_nt");
  require_matrix(bv, "matmul_nt");
  require<T>(av.shape()[1] == bv.shape()[1], "matmul_nt", av.shape(), bv.shape());
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[0];
  Tensor<T> out(Shape{m, n});
  kernels::parallel::gemm_nt(m, n, k, av.data(), bv.data(), out.data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->emit(std::move(out), {ia, ib}, [ia, ib, m, n, k](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    // d a = gy (m,n) * b (n,k); d b = gy^T (n,m) * a (m,k)
    if (g.needs_grad(ia)) kernels::parallel::gemm_nn(m, k, n, gy.data(), g.value(ib).data(), g.grad_accumulator(ia).data());
    if (g.needs_grad(ib)) kernels::parallel::gemm_tn(n, k, m, gy.data(), g.value(ia).data(), g.grad_accumulator(ib).data());
  }, "matmul_nt");
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const auto& av = a.value();
  require_matrix(av, "transpose");
  const std::size_t r = av.shape()[0], c = av.shape()[1];
  Tensor<T> out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const std::size_t ia = a.id();
  return a.graph()->emit(std::move(out), {ia}, [ia, r, c](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& ga = g.grad_accumulator(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += gy[j * r + i];
  }, "transpose");
}

// ---- elementwise -----------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require<T>(av.shape() == bv.shape(), "add", av.shape(), bv.shape());
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->emit(std::move(out), {ia, ib}, [ia, ib](Graph<T>& g, std::size_t self) {
    accumulate(g, ia, g.grad(self));
    accumulate(g, ib, g.grad(self));
  }, "add");
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require<T>(av.shape() == bv.shape(), "sub", av.shape(), bv.shape());
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->emit(std::move(out), {ia, ib}, [ia, ib](Graph<T>& g, std::size_t self) {
    accumulate(g, ia, g.grad(self));
    accumulate(g, ib, g.grad(self), T{-1});
  }, "sub");
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require<T>(av.shape() == bv.shape(), "mul", av.shape(), bv.shape());
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph()->emit(std::move(out), {ia, ib}, [ia, ib](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    if (g.needs_grad(ia)) {
      auto& ga = g.grad_accumulator(ia);
      const auto& bv = g.value(ib);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (g.needs_grad(ib)) {
      auto& gb = g.grad_accumulator(ib);
      const auto& av = g.value(ia);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * av[i];
    }
  }, "mul");
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> row) {
  const auto& av = a.value();
  const auto& rv = row.value();
  const std::size_t m = av.rows(), n = av.cols();
  require<T>(rv.size() == n, "add_row", av.shape(), rv.shape());
  Tensor<T> out = av;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  const std::size_t ia = a.id(), ir = row.id();
  return a.graph()->emit(std::move(out), {ia, ir}, [ia, ir, m, n](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    accumulate(g, ia, gy);
    if (g.needs_grad(ir)) {
      auto& gr = g.grad_accumulator(ir);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += gy[i * n + j];
    }
  }, "add_row");
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= s;
  const std::size_t ia = a.id();
  return a.graph()->emit(std::move(out), {ia}, [ia, s](Graph<T>& g, std::size_t self) {
    accumulate(g, ia, g.grad(self), s);
  }, "scale");
}

template <typename T>
Var<T> gelu(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = v * gelu_cdf(v);
  const std::size_t ia = a.id();
  return a.graph()->emit(std::move(out), {ia}, [ia](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& x = g.value(ia);
    auto& ga = g.grad_accumulator(ia);
    const T inv_sqrt_2pi = T(0.5) * std::numbers::inv_sqrtpi_v<T> * std::numbers::sqrt2_v<T>;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const T xi = x[i];
      ga[i] += gy[i] * (gelu_cdf(xi) + xi * inv_sqrt_2pi * std::exp(T(-0.5) * xi * xi));
    }
  }, "gelu");
}

template <typename T>
Var<T> tanh(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = std::tanh(v);
  const std::size_t ia = a.id();
  return a.graph()->emit(std::move(out), {ia}, [ia](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& y = g.value(self);
    auto& ga = g.grad_accumulator(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * (T(1) - y[i] * y[i]);
  }, "tanh");
}

// ---- shape ops -------------------------------------------------------------

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat of zero tensors");
  if (axis != 0 && axis != 1) throw Error(Errc::ShapeMismatch, "concat axis must be 0 or 1");
  std::vector<std::size_t> ids;
  std::vector<std::size_t> extents;
  const auto& first = parts.front().value();
  require_matrix(first, "concat");
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    require_matrix(v, "concat");
    if (axis == 0) require<T>(v.shape()[1] == first.shape()[1], "concat", first.shape(), v.shape());
    else require<T>(v.shape()[0] == first.shape()[0], "concat", first.shape(), v.shape());
    extents.push_back(v.shape()[axis]);
    total += v.shape()[axis];
    ids.push_back(p.id());
  }
  const std::size_t rows = axis == 0 ? total : first.shape()[0];
  const std::size_t cols = axis == 0 ? first.shape()[1] : total;
  Tensor<T> out(Shape{rows, cols});
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = parts[p].value();
    if (axis == 0) {
      std::copy(v.data(), v.data() + v.size(), out.data() + offset * cols);
    } else {
      for (std::size_t r = 0; r < rows; ++r)
        std::copy(v.data() + r * extents[p], v.data() + (r + 1) * extents[p], out.data() + r * cols + offset);
    }
    offset += extents[p];
  }
  return parts.front().graph()->emit(std::move(out), ids, [ids, extents, axis, rows, cols](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (g.needs_grad(ids[p])) {
        auto& gp = g.grad_accumulator(ids[p]);
        if (axis == 0) {
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[offset * cols + i];
        } else {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < extents[p]; ++c) gp[r * extents[p] + c] += gy[r * cols + offset + c];
        }
      }
      offset += extents[p];
    }
  }, "concat");
}

template <typename T>
Var<T> slice(Var<T> a, int axis, std::size_t begin, std::size_t end) {
  const auto& av = a.value();
  require_matrix(av, "slice");
  if ((axis != 0 && axis != 1) || begin >= end || end > av.shape()[axis]) {
    throw Error(Errc::ShapeMismatch, "slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                         ") out of bounds for " + shape_string(av.shape()));
  }
  const std::size_t rows = av.shape()[0], cols = av.shape()[1];
  const std::size_t out_rows = axis == 0 ? end - begin : rows;
  const std::size_t out_cols = axis == 0 ? cols : end - begin;
  Tensor<T> out(Shape{out_rows, out_cols});
  for (std::size_t r = 0; r < out_rows; ++r)
    for (std::size_t c = 0; c < out_cols; ++c)
      out[r * out_cols + c] = axis == 0 ? av[(begin + r) * cols + c] : av[r * cols + begin + c];
  const std::size_t ia = a.id();
  return a.graph()->emit(std::move(out), {ia}, [=](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& ga = g.grad_accumulator(ia);
    for (std::size_t r = 0; r < out_rows; ++r)
      for (std::size_t c = 0; c < out_cols; ++c) {
        const std::size_t src = axis == 0 ? (begin + r) * cols + c : r * cols + begin + c;
        ga[src] += gy[r * out_cols + c];
      }
  }, "slice");
}

// ---- reductions ------------------------------------------------------------

template <typename T>
Var<T> sum(Var<T> a) {
  T total = 0;
  for (const T v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return a.graph()->emit(Tensor<T>::scalar(total), {ia}, [ia](Graph<T>& g, std::size_t self) {
    const T gy = g.grad(self)[0];
    for (auto& v : g.grad_accumulator(ia).values()) v += gy;
  }, "sum");
}

template <typename T>
Var<T> mean(Var<T> a) {
  const std::size_t n = a.value().size();
  T total = 0;
  for (const T v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return a.graph()->emit(Tensor<T>::scalar(total / static_cast<T>(n)), {ia}, [ia, n](Graph<T>& g, std::size_t self) {
    const T gy = g.grad(self)[0] / static_cast<T>(n);
    for (auto& v : g.grad_accumulator(ia).values()) v += gy;
  }, "mean");
}

template <typename T>
Var<T> cross_entropy(Var<T> p, Var<T> log_q) {
  const auto& pv = p.value();
  const auto& qv = log_q.value();
  require<T>(pv.shape() == qv.shape(), "cross_entropy", pv.shape(), qv.shape());
  T total = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) total -= pv[i] * qv[i];
  const std::size_t ip = p.id(), iq = log_q.id();
  return p.graph()->emit(Tensor<T>::scalar(total), {ip, iq}, [ip, iq](Graph<T>& g, std::size_t self) {
    const T gy = g.grad(self)[0];
    accumulate(g, ip, g.value(iq), -gy);
    accumulate(g, iq, g.value(ip), -gy);
  }, "cross_entropy");
}

// ---- normalization / softmax ------------------------------------------------

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  if (!(eps > T{0})) throw Error(Errc::ConfigError, "layer_norm eps must be positive");
  const auto& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  require<T>(gamma.value().size() == n && beta.value().size() == n, "layer_norm", xv.shape(), gamma.shape());
  Tensor<T> out(xv.shape());
  Tensor<T> xhat(xv.shape());
  std::vector<T> inv_std(m);
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xv.data() + i * n;
    T mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<T>(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(n);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const T h = (row[j] - mu) * is;
      xhat[i * n + j] = h;
      out[i * n + j] = h * gv[j] + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.graph()->emit(std::move(out), {ix, ig, ib},
                         [ix, ig, ib, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& gv = g.value(ig);
    if (g.needs_grad(ig) || g.needs_grad(ib)) {
      auto& gg = g.grad_accumulator(ig);
      auto& gb = g.grad_accumulator(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          gg[j] += gy[i * n + j] * xhat[i * n + j];
          gb[j] += gy[i * n + j];
        }
    }
    if (g.needs_grad(ix)) {
      auto& gx = g.grad_accumulator(ix);
      for (std::size_t i = 0; i < m; ++i) {
        T mean_d = 0, mean_dx = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const T d = gy[i * n + j] * gv[j];
          mean_d += d;
          mean_dx += d * xhat[i * n + j];
        }
        mean_d /= static_cast<T>(n);
        mean_dx /= static_cast<T>(n);
        for (std::size_t j = 0; j < n; ++j) {
          const T d = gy[i * n + j] * gv[j];
          gx[i * n + j] += inv_std[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
        }
      }
    }
  }, "layer_norm");
}

namespace {

// Visits the 1-D lines along `axis` of a matrix: calls fn(offset, stride, length).
template <typename T, typename Fn>
void for_each_line(const Tensor<T>& t, int axis, Fn&& fn) {
  const std::size_t rows = t.rows(), cols = t.cols();
  if (axis == 1 || axis == -1) {
    for (std::size_t r = 0; r < rows; ++r) fn(r * cols, std::size_t{1}, cols);
  } else if (axis == 0) {
    for (std::size_t c = 0; c < cols; ++c) fn(c, cols, rows);
  } else {
    throw Error(Errc::ShapeMismatch, "softmax axis must be 0 or 1");
  }
}

}  // namespace

template <typename T>
Var<T> softmax(Var<T> a, int axis) {
  const auto& av = a.value();
  Tensor<T> out(av.shape());
  for_each_line(av, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
    T mx = av[off];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, av[off + i * stride]);
    T z = 0;
    for (std::size_t i = 0; i < len; ++i) {
      const T e = std::exp(av[off + i * stride] - mx);
      out[off + i * stride] = e;
      z += e;
    }
    for (std::size_t i = 0; i < len; ++i) out[off + i * stride] /= z;
  });
  const std::size_t ia = a.id();
  return a.graph()->emit(std::move(out), {ia}, [ia, axis](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& y = g.value(self);
    auto& ga = g.grad_accumulator(ia);
    for_each_line(y, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
      T dot = 0;
      for (std::size_t i = 0; i < len; ++i) dot += gy[off + i * stride] * y[off + i * stride];
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t k = off + i * stride;
        ga[k] += y[k] * (gy[k] - dot);
      }
    });
  }, "softmax");
}

template <typename T>
Var<T> log_softmax(Var<T> a, int axis) {
  const auto& av = a.value();
  Tensor<T> out(av.shape());
  for_each_line(av, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
    T mx = av[off];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, av[off + i * stride]);
    T z = 0;
    for (std::size_t i = 0; i < len; ++i) z += std::exp(av[off + i * stride] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t i = 0; i < len; ++i) out[off + i * stride] = av[off + i * stride] - lse;
  });
  const std::size_t ia = a.id();
  return a.graph()->emit(std::move(out), {ia}, [ia, axis](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& y = g.value(self);
    auto& ga = g.grad_accumulator(ia);
    for_each_line(y, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
      T total = 0;
      for (std::size_t i = 0; i < len; ++i) total += gy[off + i * stride];
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t k = off + i * stride;
        ga[k] += gy[k] - std::exp(y[k]) * total;
      }
    });
  }, "log_softmax");
}

template <typename T>
Var<T> l2_normalize(Var<T> a, T eps) {
  const auto& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<T> out(av.shape());
  std::vector<T> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    T ss = 0;
    for (std::size_t j = 0; j < n; ++j) ss += av[i * n + j] * av[i * n + j];
    norms[i] = std::max(std::sqrt(ss), eps);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] / norms[i];
  }
  const std::size_t ia = a.id();
  return a.graph()->emit(std::move(out), {ia}, [ia, m, n, eps, norms = std::move(norms)](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& y = g.value(self);
    auto& ga = g.grad_accumulator(ia);
    for (std::size_t i = 0; i < m; ++i) {
      if (norms[i] <= eps) {
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += gy[i * n + j] / eps;
        continue;
      }
      T dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += gy[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += (gy[i * n + j] - y[i * n + j] * dot) / norms[i];
    }
  }, "l2_normalize");
}

// ---- convolution -------------------------------------------------------------

template <typename T>
Var<T> conv1d(Var<T> x, Var<T> w, std::size_t stride) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  if (xv.rank() != 2 || wv.rank() != 3 || wv.shape()[1] != xv.shape()[1] || stride == 0) {
    throw Error(Errc::ShapeMismatch, "conv1d: input " + shape_string(xv.shape()) + " vs weight " +
                                         shape_string(wv.shape()));
  }
  const std::size_t len = xv.shape()[0], cin = xv.shape()[1];
  const std::size_t cout = wv.shape()[0], k = wv.shape()[2];
  if (len < k) throw Error(Errc::SeriesTooShort, "conv1d: input length " + std::to_string(len) + " < kernel " + std::to_string(k));
  const std::size_t lout = (len - k) / stride + 1;
  Tensor<T> out(Shape{lout, cout});
  for (std::size_t o = 0; o < lout; ++o)
    for (std::size_t c = 0; c < cout; ++c) {
      T acc = 0;
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t j = 0; j < k; ++j) acc += xv[(o * stride + j) * cin + ci] * wv[(c * cin + ci) * k + j];
      out[o * cout + c] = acc;
    }
  const std::size_t ix = x.id(), iw = w.id();
  return x.graph()->emit(std::move(out), {ix, iw}, [=](Graph<T>& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& xv = g.value(ix);
    const auto& wv = g.value(iw);
    const bool gx_needed = g.needs_grad(ix), gw_needed = g.needs_grad(iw);
    Tensor<T>* gx = gx_needed ? &g.grad_accumulator(ix) : nullptr;
    Tensor<T>* gw = gw_needed ? &g.grad_accumulator(iw) : nullptr;
    for (std::size_t o = 0; o < lout; ++o)
      for (std::size_t c = 0; c < cout; ++c) {
        const T d = gy[o * cout + c];
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t xi = (o * stride + j) * cin + ci;
            const std::size_t wi = (c * cin + ci) * k + j;
            if (gx) (*gx)[xi] += d * wv[wi];
            if (gw) (*gw)[wi] += d * xv[xi];
          }
      }
  }, "conv1d");
}

// ---- instantiation ---------------------------------------------------------

#define TREX_INSTANTIATE_OPS(T)                                                  \
  template class Graph<T>;                                                       \
  template Var<T> matmul<T>(Var<T>, Var<T>);                                     \
  template Var<T> matmul_nt<T>(Var<T>, Var<T>);                                  \
  template Var<T> transpose<T>(Var<T>);                                          \
  template Var<T> add<T>(Var<T>, Var<T>);                                        \
  template Var<T> sub<T>(Var<T>, Var<T>);                                        \
  template Var<T> mul<T>(Var<T>, Var<T>);                                        \
  template Var<T> add_row<T>(Var<T>, Var<T>);                                    \
  template Var<T> scale<T>(Var<T>, T);                                           \
  template Var<T> concat<T>(const std::vector<Var<T>>&, int);                    \
  template Var<T> slice<T>(Var<T>, int, std::size_t, std::size_t);               \
  template Var<T> sum<T>(Var<T>);                                                \
  template Var<T> mean<T>(Var<T>);                                               \
  template Var<T> layer_norm<T>(Var<T>, Var<T>, Var<T>, T);                      \
  template Var<T> gelu<T>(Var<T>);                                               \
  template Var<T> tanh<T>(Var<T>);                                               \
  template Var<T> softmax<T>(Var<T>, int);                                       \
  template Var<T> log_softmax<T>(Var<T>, int);                                   \
  template Var<T> cross_entropy<T>(Var<T>, Var<T>);                              \
  template Var<T> conv1d<T>(Var<T>, Var<T>, std::size_t);                        \
  template Var<T> l2_normalize<T>(Var<T>, T);

TREX_INSTANTIATE_OPS(float)
TREX_INSTANTIATE_OPS(double)

}  // namespace trex::diffnum
