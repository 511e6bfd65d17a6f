/* Copyright 2026 The Scatter STR Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Dense tensor with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle to a graph Node holding a row-major value
// buffer, an optional gradient buffer, and a backward closure that scatters
// the node's gradient into its parents. Graphs are built define-by-run and
// freed when the last handle drops. One graph is confined to one thread;
// tensors without gradient tracking are immutable after creation and safe
// to share across threads.

#ifndef SCATTER_TENSOR_HPP_
#define SCATTER_TENSOR_HPP_

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "scatter/errors.hpp"

namespace scatter {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// Thread-local switch: when false, ops do not record parents or backward
// closures. Used for inference and for concurrent evaluation.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev; }
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized lazily; same length as value once touched
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward_fn;

  std::size_t numel() const { return value.size(); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

#ifndef NDEBUG
template <typename T>
inline void debug_check_finite(const Node<T>& n) {
  for (T v : n.value) {
    if (std::isnan(static_cast<double>(v)))
      throw NumericError("forward op produced NaN on finite inputs");
  }
}
#else
template <typename T>
inline void debug_check_finite(const Node<T>&) {}
#endif

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape) {
    auto n = std::make_shared<Node<T>>();
    n->value.assign(shape_numel(shape), T(0));
    n->shape = std::move(shape);
    return Tensor(n);
  }

  static Tensor full(Shape shape, T v) {
    auto n = std::make_shared<Node<T>>();
    n->value.assign(shape_numel(shape), v);
    n->shape = std::move(shape);
    return Tensor(n);
  }

  static Tensor from(Shape shape, std::vector<T> values) {
    if (shape_numel(shape) != values.size())
      throw DimensionError("tensor init: shape " + shape_str(shape) + " expects " +
                           std::to_string(shape_numel(shape)) + " values, got " +
                           std::to_string(values.size()));
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    return Tensor(n);
  }

  static Tensor scalar(T v) { return from({}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }
  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  const std::vector<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }

  Tensor& set_requires_grad(bool v = true) {
    node_->requires_grad = v;
    if (v) node_->ensure_grad();
    return *this;
  }

  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor " + shape_str(shape()));
    return node_->value[0];
  }

  bool is_scalar() const { return numel() == 1 && shape().empty(); }

  void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

  // Reverse-mode backprop from a scalar. Gradients accumulate additively in
  // every reachable grad-enabled node; deterministic given construction order.
  void backward() const {
    if (numel() != 1)
      throw ContractError("backward() requires a scalar loss, got " + shape_str(shape()));
    if (!node_->requires_grad)
      throw ContractError("backward() on a tensor with no tracked graph");
    std::vector<Node<T>*> order;
    topo_order(order);
    node_->ensure_grad();
    node_->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* n = *it;
      if (n->backward_fn) n->backward_fn(*n);
    }
  }

  std::shared_ptr<Node<T>> node() const { return node_; }

 private:
  // Iterative postorder DFS over parents; reversed, children (consumers) come
  // before parents so each node's grad is complete when its backward runs.
  void topo_order(std::vector<Node<T>*>& out) const {
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->parents.size()) {
        Node<T>* p = n->parents[idx++].get();
        if (p->requires_grad && !visited.count(p)) {
          visited.insert(p);
          stack.push_back({p, 0});
        }
      } else {
        out.push_back(n);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node<T>> node_;
};

namespace detail {

// Finalizes an op node: attaches parents and the backward closure when
// gradient tracking is on, and ensures parents have grad buffers ready.
template <typename T>
Tensor<T> make_node(Shape shape, std::vector<T> value,
                    std::vector<Tensor<T>> inputs,
                    std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  debug_check_finite(*n);
  bool track = grad_mode();
  bool any = false;
  if (track) {
    for (const auto& in : inputs)
      if (in.node()->requires_grad) any = true;
  }
  if (any) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (const auto& in : inputs) {
      in.node()->ensure_grad();
      n->parents.push_back(in.node());
    }
    n->backward_fn = std::move(backward);
    n->ensure_grad();
  }
  return Tensor<T>(n);
}

}  // namespace detail

// Public hook for composite modules (CTC, bilinear sampling) and tests that
// register their own primitives with hand-derived gradients.
template <typename T>
Tensor<T> custom_op(Shape shape, std::vector<T> value, std::vector<Tensor<T>> inputs,
                    std::function<void(Node<T>&)> backward) {
  return detail::make_node<T>(std::move(shape), std::move(value), std::move(inputs),
                              std::move(backward));
}

// ---------------------------------------------------------------------------
// GEMM. C[m x n] += A[m x k] * B[k x n], row major. The i-p-j loop order keeps
// the inner loop contiguous over B and C rows so it vectorizes.
// ---------------------------------------------------------------------------
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A^T * B where A is [k x m] (so A^T is [m x k]), B is [k x n].
template <typename T>
void gemm_at_b_acc(const T* a, const T* b, T* c, std::size_t k, std::size_t m, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A * B^T where A is [m x k], B is [n x k].
template <typename T>
void gemm_a_bt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

namespace detail {

template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> binary_elementwise(const char* name, const Tensor<T>& a, const Tensor<T>& b,
                             FwdFn fwd, BwdFn bwd) {
  const bool a_scalar = a.numel() == 1;
  const bool b_scalar = b.numel() == 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape())
    throw DimensionError(std::string(name) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ (only scalar broadcast is supported)");
  const Shape& out_shape = a_scalar ? b.shape() : a.shape();
  std::size_t n = std::max(a.numel(), b.numel());
  std::vector<T> out(n);
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < n; ++i) fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i], out[i]);
  return make_node<T>(
      out_shape, std::move(out), {a, b}, [a_scalar, b_scalar, n, bwd](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < n; ++i) {
          T ga = T(0), gb = T(0);
          bwd(pa.value[a_scalar ? 0 : i], pb.value[b_scalar ? 0 : i], self.grad[i], ga, gb);
          if (pa.requires_grad) pa.grad[a_scalar ? 0 : i] += ga;
          if (pb.requires_grad) pb.grad[b_scalar ? 0 : i] += gb;
        }
      });
}

template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> unary_elementwise(const Tensor<T>& x, FwdFn fwd, BwdFn bwd) {
  std::vector<T> out(x.numel());
  const auto& xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  std::vector<T> saved = out;
  return make_node<T>(x.shape(), std::move(out), {x},
                      [saved = std::move(saved), bwd](Node<T>& self) {
                        auto& p = *self.parents[0];
                        for (std::size_t i = 0; i < self.grad.size(); ++i)
                          p.grad[i] += bwd(p.value[i], saved[i]) * self.grad[i];
                      });
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_elementwise<T>(
      "add", a, b, [](T x, T y, T& o) { o = x + y; },
      [](T, T, T g, T& ga, T& gb) { ga = g; gb = g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_elementwise<T>(
      "sub", a, b, [](T x, T y, T& o) { o = x - y; },
      [](T, T, T g, T& ga, T& gb) { ga = g; gb = -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_elementwise<T>(
      "mul", a, b, [](T x, T y, T& o) { o = x * y; },
      [](T x, T y, T g, T& ga, T& gb) { ga = g * y; gb = g * x; });
}

// x * c for a compile-time constant factor (no graph edge for c).
template <typename T>
Tensor<T> scale(const Tensor<T>& x, double c) {
  std::vector<T> out(x.numel());
  const auto& xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(xv[i] * c);
  return detail::make_node<T>(x.shape(), std::move(out), {x}, [c](Node<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += static_cast<T>(self.grad[i] * c);
  });
}

// x + c for a constant offset.
template <typename T>
Tensor<T> shift(const Tensor<T>& x, double c) {
  std::vector<T> out(x.numel());
  const auto& xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(xv[i] + c);
  return detail::make_node<T>(x.shape(), std::move(out), {x}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) { return scale(x, -1.0); }

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x) {
  return detail::unary_elementwise<T>(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary_elementwise<T>(
      x,
      [](T v) {
        // Split on sign so exp never overflows.
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary_elementwise<T>(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> exp_op(const Tensor<T>& x) {
  return detail::unary_elementwise<T>(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log_op(const Tensor<T>& x) {
  for (T v : x.data())
    if (!(v > T(0)))
      throw std::domain_error("log of nonpositive value " + std::to_string(static_cast<double>(v)));
  return detail::unary_elementwise<T>(
      x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n, T(0));
  gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  return detail::make_node<T>({m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    // dA = dC * B^T ; dB = A^T * dC
    if (pa.requires_grad) gemm_a_bt_acc(self.grad.data(), pb.value.data(), pa.grad.data(), m, n, k);
    if (pb.requires_grad) gemm_at_b_acc(pa.value.data(), self.grad.data(), pb.grad.data(), m, k, n);
  });
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& x) {
  if (x.shape().size() != 2)
    throw DimensionError("transpose2d: expected rank-2, got " + shape_str(x.shape()));
  std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<T> out(r * c);
  const auto& xv = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  return detail::make_node<T>({c, r}, std::move(out), {x}, [r, c](Node<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j * r + i];
  });
}

// x [n x m] + row vector b [m] (or [1 x m]) added to every row.
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.shape().size() != 2)
    throw DimensionError("add_rowvec: x must be rank-2, got " + shape_str(x.shape()));
  std::size_t n = x.dim(0), m = x.dim(1);
  if (b.numel() != m)
    throw DimensionError("add_rowvec: row vector " + shape_str(b.shape()) +
                         " does not match width of " + shape_str(x.shape()));
  std::vector<T> out(n * m);
  const auto& xv = x.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = xv[i * m + j] + bv[j];
  return detail::make_node<T>(x.shape(), std::move(out), {x, b}, [n, m](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        T g = self.grad[i * m + j];
        if (px.requires_grad) px.grad[i * m + j] += g;
        if (pb.requires_grad) pb.grad[j] += g;
      }
  });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                         " changes element count");
  std::vector<T> out = x.data();
  return detail::make_node<T>(std::move(shape), std::move(out), {x}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t len) {
  const Shape& s = x.shape();
  if (axis >= s.size() || start + len > s[axis])
    throw DimensionError("slice: axis " + std::to_string(axis) + " [" + std::to_string(start) +
                         ", +" + std::to_string(len) + ") out of range for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  std::size_t ax = s[axis];
  Shape out_shape = s;
  out_shape[axis] = len;
  std::vector<T> out(outer * len * inner);
  const auto& xv = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < len; ++a)
      std::copy_n(&xv[(o * ax + start + a) * inner], inner, &out[(o * len + a) * inner]);
  return detail::make_node<T>(std::move(out_shape), std::move(out), {x},
                              [outer, inner, ax, start, len](Node<T>& self) {
                                auto& p = *self.parents[0];
                                for (std::size_t o = 0; o < outer; ++o)
                                  for (std::size_t a = 0; a < len; ++a) {
                                    const T* g = &self.grad[(o * len + a) * inner];
                                    T* pg = &p.grad[(o * ax + start + a) * inner];
                                    for (std::size_t i = 0; i < inner; ++i) pg[i] += g[i];
                                  }
                              });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw ContractError("concat: empty input list");
  const Shape& s0 = xs[0].shape();
  if (axis >= s0.size()) throw DimensionError("concat: axis out of range");
  std::size_t total_axis = 0;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    if (s.size() != s0.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != s0[i])
        throw DimensionError("concat: shapes " + shape_str(s0) + " and " + shape_str(s) +
                             " differ off-axis");
    total_axis += s[axis];
  }
  Shape out_shape = s0;
  out_shape[axis] = total_axis;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  std::vector<T> out(shape_numel(out_shape));
  std::vector<std::size_t> axis_sizes;
  axis_sizes.reserve(xs.size());
  std::size_t off = 0;
  for (const auto& x : xs) {
    std::size_t ax = x.shape()[axis];
    axis_sizes.push_back(ax);
    const auto& xv = x.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(&xv[o * ax * inner], ax * inner, &out[(o * total_axis + off) * inner]);
    off += ax;
  }
  return detail::make_node<T>(std::move(out_shape), std::move(out), xs,
                              [outer, inner, total_axis, axis_sizes](Node<T>& self) {
                                std::size_t off = 0;
                                for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                                  auto& p = *self.parents[pi];
                                  std::size_t ax = axis_sizes[pi];
                                  if (p.requires_grad) {
                                    for (std::size_t o = 0; o < outer; ++o) {
                                      const T* g = &self.grad[(o * total_axis + off) * inner];
                                      T* pg = &p.grad[o * ax * inner];
                                      for (std::size_t i = 0; i < ax * inner; ++i) pg[i] += g[i];
                                    }
                                  }
                                  off += ax;
                                }
                              });
}

// Scalar element pick from a flat offset.
template <typename T>
Tensor<T> pick(const Tensor<T>& x, std::size_t flat_index) {
  if (flat_index >= x.numel()) throw DimensionError("pick: index out of range");
  return detail::make_node<T>({}, {x.data()[flat_index]}, {x}, [flat_index](Node<T>& self) {
    self.parents[0]->grad[flat_index] += self.grad[0];
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  // Accumulate in double so reduction error stays independent of T.
  double acc = 0;
  for (T v : x.data()) acc += static_cast<double>(v);
  return detail::make_node<T>({}, {static_cast<T>(acc)}, {x}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    T g = self.grad[0];
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  std::size_t n = x.numel();
  double acc = 0;
  for (T v : x.data()) acc += static_cast<double>(v);
  return detail::make_node<T>({}, {static_cast<T>(acc / static_cast<double>(n))}, {x},
                              [n](Node<T>& self) {
                                auto& p = *self.parents[0];
                                T g = static_cast<T>(self.grad[0] / static_cast<double>(n));
                                for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
                              });
}

// ---------------------------------------------------------------------------
// Softmax, numerically stabilized by max subtraction. The normalizing sum is
// accumulated in double so each output slice sums to 1 well within 1e-6 even
// at f32.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw DimensionError("softmax: axis out of range for " + shape_str(s));
  std::size_t outer = 1, inner = 1, ax = s[axis];
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  std::vector<T> out(x.numel());
  const auto& xv = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      T mx = xv[o * ax * inner + in];
      for (std::size_t a = 1; a < ax; ++a)
        mx = std::max(mx, xv[(o * ax + a) * inner + in]);
      double denom = 0;
      for (std::size_t a = 0; a < ax; ++a) {
        T e = std::exp(xv[(o * ax + a) * inner + in] - mx);
        out[(o * ax + a) * inner + in] = e;
        denom += static_cast<double>(e);
      }
      for (std::size_t a = 0; a < ax; ++a)
        out[(o * ax + a) * inner + in] =
            static_cast<T>(static_cast<double>(out[(o * ax + a) * inner + in]) / denom);
    }
  std::vector<T> saved = out;
  return detail::make_node<T>(
      s, std::move(out), {x}, [outer, inner, ax, saved = std::move(saved)](Node<T>& self) {
        auto& p = *self.parents[0];
        // dx = (dy - sum(dy * y)) * y per slice
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t in = 0; in < inner; ++in) {
            double dot = 0;
            for (std::size_t a = 0; a < ax; ++a) {
              std::size_t idx = (o * ax + a) * inner + in;
              dot += static_cast<double>(self.grad[idx]) * static_cast<double>(saved[idx]);
            }
            for (std::size_t a = 0; a < ax; ++a) {
              std::size_t idx = (o * ax + a) * inner + in;
              p.grad[idx] += static_cast<T>((static_cast<double>(self.grad[idx]) - dot) *
                                            static_cast<double>(saved[idx]));
            }
          }
      });
}

// ---------------------------------------------------------------------------
// conv2d: cross-correlation with zero padding, via im2col + GEMM.
// input [C_in x H x W], kernels [C_out x C_in x kh x kw], optional bias [C_out].
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void im2col(const T* x, std::size_t c_in, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t sh, std::size_t sw, std::size_t ph, std::size_t pw,
            std::size_t oh, std::size_t ow, T* col) {
  // col is [c_in*kh*kw x oh*ow]
  std::size_t row = 0;
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
        T* dst = col + row * oh * ow;
        for (std::size_t oi = 0; oi < oh; ++oi) {
          std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * sh + ki) -
                              static_cast<std::ptrdiff_t>(ph);
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) {
            std::fill_n(dst + oi * ow, ow, T(0));
            continue;
          }
          const T* src = x + (c * h + ii) * w;
          for (std::size_t oj = 0; oj < ow; ++oj) {
            std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * sw + kj) -
                                static_cast<std::ptrdiff_t>(pw);
            dst[oi * ow + oj] =
                (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) ? T(0) : src[jj];
          }
        }
      }
}

template <typename T>
void col2im_acc(const T* col, std::size_t c_in, std::size_t h, std::size_t w, std::size_t kh,
                std::size_t kw, std::size_t sh, std::size_t sw, std::size_t ph, std::size_t pw,
                std::size_t oh, std::size_t ow, T* x) {
  std::size_t row = 0;
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
        const T* src = col + row * oh * ow;
        for (std::size_t oi = 0; oi < oh; ++oi) {
          std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * sh + ki) -
                              static_cast<std::ptrdiff_t>(ph);
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = x + (c * h + ii) * w;
          for (std::size_t oj = 0; oj < ow; ++oj) {
            std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * sw + kj) -
                                static_cast<std::ptrdiff_t>(pw);
            if (jj >= 0 && jj < static_cast<std::ptrdiff_t>(w)) dst[jj] += src[oi * ow + oj];
          }
        }
      }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                 std::pair<std::size_t, std::size_t> stride,
                 std::pair<std::size_t, std::size_t> padding) {
  const Shape& xs = input.shape();
  const Shape& ks = kernels.shape();
  if (xs.size() != 3 || ks.size() != 4 || xs[0] != ks[1])
    throw DimensionError("conv2d: input " + shape_str(xs) + " vs kernels " + shape_str(ks));
  std::size_t c_in = xs[0], h = xs[1], w = xs[2];
  std::size_t c_out = ks[0], kh = ks[2], kw = ks[3];
  auto [sh, sw] = stride;
  auto [ph, pw] = padding;
  if (sh == 0 || sw == 0) throw ContractError("conv2d: stride must be positive");
  if (kh > h + 2 * ph || kw > w + 2 * pw)
    throw DimensionError("conv2d: kernel " + shape_str(ks) + " larger than padded input " +
                         shape_str(xs));
  std::size_t oh = (h + 2 * ph - kh) / sh + 1;
  std::size_t ow = (w + 2 * pw - kw) / sw + 1;
  if (bias.defined() && bias.numel() != c_out)
    throw DimensionError("conv2d: bias size " + std::to_string(bias.numel()) +
                         " != out channels " + std::to_string(c_out));

  std::size_t krows = c_in * kh * kw;
  std::vector<T> col(krows * oh * ow);
  detail::im2col(input.data().data(), c_in, h, w, kh, kw, sh, sw, ph, pw, oh, ow, col.data());
  std::vector<T> out(c_out * oh * ow, T(0));
  gemm_acc(kernels.data().data(), col.data(), out.data(), c_out, krows, oh * ow);
  if (bias.defined()) {
    const auto& bv = bias.data();
    for (std::size_t c = 0; c < c_out; ++c) {
      T b = bv[c];
      for (std::size_t i = 0; i < oh * ow; ++i) out[c * oh * ow + i] += b;
    }
  }
  std::vector<Tensor<T>> inputs = {input, kernels};
  if (bias.defined()) inputs.push_back(bias);
  bool has_bias = bias.defined();
  return detail::make_node<T>(
      {c_out, oh, ow}, std::move(out), std::move(inputs),
      [=, col = std::move(col)](Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pk = *self.parents[1];
        // dK = dOut [c_out x oh*ow] * col^T
        if (pk.requires_grad)
          gemm_a_bt_acc(self.grad.data(), col.data(), pk.grad.data(), c_out, oh * ow, krows);
        if (px.requires_grad) {
          std::vector<T> dcol(krows * oh * ow, T(0));
          gemm_at_b_acc(pk.value.data(), self.grad.data(), dcol.data(), c_out, krows, oh * ow);
          detail::col2im_acc(dcol.data(), c_in, h, w, kh, kw, sh, sw, ph, pw, oh, ow,
                             px.grad.data());
        }
        if (has_bias) {
          auto& pb = *self.parents[2];
          if (pb.requires_grad)
            for (std::size_t c = 0; c < c_out; ++c) {
              T acc = T(0);
              for (std::size_t i = 0; i < oh * ow; ++i) acc += self.grad[c * oh * ow + i];
              pb.grad[c] += acc;
            }
        }
      });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels,
                 std::pair<std::size_t, std::size_t> stride,
                 std::pair<std::size_t, std::size_t> padding) {
  return conv2d(input, kernels, Tensor<T>(), stride, padding);
}

// Max pooling over [C x H x W]. No padding; ties break toward the earlier
// (row-major) element so backward routing is deterministic.
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t kh, std::size_t kw, std::size_t sh,
                     std::size_t sw) {
  const Shape& s = x.shape();
  if (s.size() != 3) throw DimensionError("max_pool2d: expected [C x H x W], got " + shape_str(s));
  std::size_t c = s[0], h = s[1], w = s[2];
  if (kh > h || kw > w)
    throw DimensionError("max_pool2d: window " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " larger than input " + shape_str(s));
  std::size_t oh = (h - kh) / sh + 1;
  std::size_t ow = (w - kw) / sw + 1;
  std::vector<T> out(c * oh * ow);
  std::vector<std::uint32_t> argmax(c * oh * ow);
  const auto& xv = x.data();
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t oi = 0; oi < oh; ++oi)
      for (std::size_t oj = 0; oj < ow; ++oj) {
        std::size_t best = (ci * h + oi * sh) * w + oj * sw;
        T bv = xv[best];
        for (std::size_t ki = 0; ki < kh; ++ki)
          for (std::size_t kj = 0; kj < kw; ++kj) {
            std::size_t idx = (ci * h + oi * sh + ki) * w + oj * sw + kj;
            if (xv[idx] > bv) { bv = xv[idx]; best = idx; }
          }
        out[(ci * oh + oi) * ow + oj] = bv;
        argmax[(ci * oh + oi) * ow + oj] = static_cast<std::uint32_t>(best);
      }
  return detail::make_node<T>({c, oh, ow}, std::move(out), {x},
                              [argmax = std::move(argmax)](Node<T>& self) {
                                auto& p = *self.parents[0];
                                for (std::size_t i = 0; i < self.grad.size(); ++i)
                                  p.grad[argmax[i]] += self.grad[i];
                              });
}

// ---------------------------------------------------------------------------
// Elementwise dispatch by name, the generic surface for the op table.
// ---------------------------------------------------------------------------

enum class EwOp { Add, Sub, Mul, Tanh, Sigmoid, Relu, Log, Exp };

template <typename T>
Tensor<T> elementwise(EwOp op, const Tensor<T>& a, const Tensor<T>& b = Tensor<T>()) {
  switch (op) {
    case EwOp::Add: return add(a, b);
    case EwOp::Sub: return sub(a, b);
    case EwOp::Mul: return mul(a, b);
    case EwOp::Tanh: return tanh_op(a);
    case EwOp::Sigmoid: return sigmoid(a);
    case EwOp::Relu: return relu(a);
    case EwOp::Log: return log_op(a);
    case EwOp::Exp: return exp_op(a);
  }
  throw ContractError("elementwise: unknown op");
}

// log(sum(exp(x))) over all elements, shift-stabilized; never overflows and
// the inner log argument is always >= 1.
template <typename T>
Tensor<T> logsumexp(const Tensor<T>& x) {
  T mx = *std::max_element(x.data().begin(), x.data().end());
  return shift(log_op(sum(exp_op(shift(x, -static_cast<double>(mx))))),
               static_cast<double>(mx));
}

}  // namespace scatter

#endif  // SCATTER_TENSOR_HPP_
