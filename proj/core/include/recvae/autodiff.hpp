#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "recvae/tensor.hpp"

namespace recvae {

// Define-by-run reverse-mode tape over dense tensors. Graphs are built per
// step and discarded; leaf parameters persist across steps and carry their
// gradient buffers with them. backward() runs a reverse topological traversal
// and accumulates (never overwrites) gradients, so shared subexpressions and
// reused parameters behave correctly.
template <typename S>
class Node {
 public:
  Tensor<S> value;
  Tensor<S> grad;  // allocated only for tracked nodes
  bool tracked = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> pull;  // propagates this->grad into parent grads

  explicit Node(Tensor<S> v) : value(std::move(v)) {}

  void ensure_grad() {
    if (tracked && grad.size() != value.size()) grad = Tensor<S>(value.shape());
  }

  void zero_grad() { grad.fill(S(0)); }
};

template <typename S>
using NodePtr = std::shared_ptr<Node<S>>;

namespace detail {

inline thread_local bool no_grad_mode = false;

}  // namespace detail

// Leaf with no gradient tracking (inputs, detached snapshots).
template <typename S>
NodePtr<S> constant(Tensor<S> v) {
  return std::make_shared<Node<S>>(std::move(v));
}

// Trainable leaf.
template <typename S>
NodePtr<S> parameter(Tensor<S> v) {
  auto n = std::make_shared<Node<S>>(std::move(v));
  n->tracked = true;
  n->ensure_grad();
  return n;
}

// Suppresses gradient tracking for ops created in its scope (evaluation
// forward passes over trainable parameters).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::no_grad_mode) { detail::no_grad_mode = true; }
  ~NoGradGuard() { detail::no_grad_mode = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

namespace detail {

template <typename S>
NodePtr<S> make_op(Tensor<S> value, std::vector<NodePtr<S>> parents) {
  auto n = std::make_shared<Node<S>>(std::move(value));
  if (!no_grad_mode) {
    for (const auto& p : parents)
      if (p->tracked) n->tracked = true;
  }
  n->parents = std::move(parents);
  n->ensure_grad();
  return n;
}

template <typename S>
void acc(Tensor<S>& dst, const Tensor<S>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

template <typename S>
NodePtr<S> matmul(const NodePtr<S>& a, const NodePtr<S>& b) {
  auto out = detail::make_op(matmul(a->value, b->value), {a, b});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  Node<S>* pb = b.get();
  out->pull = [o, pa, pb] {
    if (pa->tracked) matmul_nt_acc(o->grad, pb->value, pa->grad);  // dA += dC B^T
    if (pb->tracked) matmul_tn_acc(pa->value, o->grad, pb->grad);  // dB += A^T dC
  };
  return out;
}

// a * b^T; used by the decoder so the item matrix can stay (items x latent).
template <typename S>
NodePtr<S> matmul_nt(const NodePtr<S>& a, const NodePtr<S>& b) {
  auto out = detail::make_op(matmul_nt(a->value, b->value), {a, b});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  Node<S>* pb = b.get();
  out->pull = [o, pa, pb] {
    if (pa->tracked) matmul_nn_acc(o->grad, pb->value, pa->grad);  // dA += dC B
    if (pb->tracked) matmul_tn_acc(o->grad, pa->value, pb->grad);  // dB += dC^T A
  };
  return out;
}

// Same-shape addition, or matrix + row vector broadcast (bias).
template <typename S>
NodePtr<S> add(const NodePtr<S>& a, const NodePtr<S>& b) {
  const Tensor<S>&av = a->value, &bv = b->value;
  Tensor<S> v(av.shape());
  if (av.same_shape(bv)) {
    for (std::size_t i = 0; i < av.size(); ++i) v[i] = av[i] + bv[i];
  } else if (av.rank() == 2 && bv.rank() == 1 && bv.size() == av.cols()) {
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < av.cols(); ++j) v(i, j) = av(i, j) + bv[j];
  } else {
    detail::require(false, "add shapes incompatible", av, bv);
  }
  auto out = detail::make_op(std::move(v), {a, b});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  Node<S>* pb = b.get();
  out->pull = [o, pa, pb] {
    if (pa->tracked) detail::acc(pa->grad, o->grad);
    if (pb->tracked) {
      if (pb->value.same_shape(o->value)) {
        detail::acc(pb->grad, o->grad);
      } else {
        for (std::size_t i = 0; i < o->value.rows(); ++i)
          for (std::size_t j = 0; j < o->value.cols(); ++j) pb->grad[j] += o->grad(i, j);
      }
    }
  };
  return out;
}

template <typename S>
NodePtr<S> sub(const NodePtr<S>& a, const NodePtr<S>& b) {
  detail::require(a->value.same_shape(b->value), "sub shapes differ", a->value, b->value);
  Tensor<S> v(a->value.shape());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->value[i] - b->value[i];
  auto out = detail::make_op(std::move(v), {a, b});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  Node<S>* pb = b.get();
  out->pull = [o, pa, pb] {
    if (pa->tracked) detail::acc(pa->grad, o->grad);
    if (pb->tracked)
      for (std::size_t i = 0; i < o->grad.size(); ++i) pb->grad[i] -= o->grad[i];
  };
  return out;
}

// Elementwise product.
template <typename S>
NodePtr<S> mul(const NodePtr<S>& a, const NodePtr<S>& b) {
  detail::require(a->value.same_shape(b->value), "mul shapes differ", a->value, b->value);
  Tensor<S> v(a->value.shape());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->value[i] * b->value[i];
  auto out = detail::make_op(std::move(v), {a, b});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  Node<S>* pb = b.get();
  out->pull = [o, pa, pb] {
    if (pa->tracked)
      for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i] * pb->value[i];
    if (pb->tracked)
      for (std::size_t i = 0; i < o->grad.size(); ++i) pb->grad[i] += o->grad[i] * pa->value[i];
  };
  return out;
}

template <typename S>
NodePtr<S> scale(const NodePtr<S>& a, S c) {
  Tensor<S> v(a->value.shape());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * a->value[i];
  auto out = detail::make_op(std::move(v), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  out->pull = [o, pa, c] {
    if (pa->tracked)
      for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += c * o->grad[i];
  };
  return out;
}

template <typename S>
NodePtr<S> add_scalar(const NodePtr<S>& a, S c) {
  Tensor<S> v(a->value.shape());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->value[i] + c;
  auto out = detail::make_op(std::move(v), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  out->pull = [o, pa] {
    if (pa->tracked) detail::acc(pa->grad, o->grad);
  };
  return out;
}

template <typename S>
NodePtr<S> exp_node(const NodePtr<S>& a) {
  Tensor<S> v(a->value.shape());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(a->value[i]);
  auto out = detail::make_op(std::move(v), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  out->pull = [o, pa] {
    if (pa->tracked)
      for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i] * o->value[i];
  };
  return out;
}

// x * sigmoid(x)
template <typename S>
NodePtr<S> swish(const NodePtr<S>& a) {
  Tensor<S> v(a->value.shape());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->value[i] * sigmoid(a->value[i]);
  auto out = detail::make_op(std::move(v), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  out->pull = [o, pa] {
    if (!pa->tracked) return;
    for (std::size_t i = 0; i < o->grad.size(); ++i) {
      const S s = sigmoid(pa->value[i]);
      pa->grad[i] += o->grad[i] * (s + pa->value[i] * s * (S(1) - s));
    }
  };
  return out;
}

template <typename S>
NodePtr<S> tanh_node(const NodePtr<S>& a) {
  Tensor<S> v(a->value.shape());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(a->value[i]);
  auto out = detail::make_op(std::move(v), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  out->pull = [o, pa] {
    if (!pa->tracked) return;
    for (std::size_t i = 0; i < o->grad.size(); ++i)
      pa->grad[i] += o->grad[i] * (S(1) - o->value[i] * o->value[i]);
  };
  return out;
}

// Row-wise layer normalization with affine transform. gain/shift span the
// normalized (last) dimension.
template <typename S>
NodePtr<S> layer_norm(const NodePtr<S>& x, const NodePtr<S>& gain, const NodePtr<S>& shift,
                      S eps) {
  const std::size_t n = x->value.rows(), m = x->value.cols();
  detail::require(gain->value.size() == m && shift->value.size() == m,
                  "layer_norm affine shape", gain->value, shift->value);
  Tensor<S> normalized({n, m});
  Tensor<S> inv_std({n});
  Tensor<S> v({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    S mean = S(0);
    for (std::size_t j = 0; j < m; ++j) mean += x->value(i, j);
    mean /= S(m);
    S var = S(0);
    for (std::size_t j = 0; j < m; ++j) {
      const S d = x->value(i, j) - mean;
      var += d * d;
    }
    var /= S(m);
    inv_std[i] = S(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      normalized(i, j) = (x->value(i, j) - mean) * inv_std[i];
      v(i, j) = gain->value[j] * normalized(i, j) + shift->value[j];
    }
  }
  auto out = detail::make_op(std::move(v), {x, gain, shift});
  Node<S>* o = out.get();
  Node<S>* px = x.get();
  Node<S>* pg = gain.get();
  Node<S>* ps = shift.get();
  auto cache_norm = std::make_shared<Tensor<S>>(std::move(normalized));
  auto cache_inv = std::make_shared<Tensor<S>>(std::move(inv_std));
  out->pull = [o, px, pg, ps, cache_norm, cache_inv, n, m] {
    const Tensor<S>& xhat = *cache_norm;
    const Tensor<S>& inv = *cache_inv;
    for (std::size_t i = 0; i < n; ++i) {
      // dxhat_j = dy_j * g_j; dx derived from mean/variance chain.
      S sum_dxhat = S(0), sum_dxhat_xhat = S(0);
      for (std::size_t j = 0; j < m; ++j) {
        const S dxhat = o->grad(i, j) * pg->value[j];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat(i, j);
      }
      if (px->tracked) {
        for (std::size_t j = 0; j < m; ++j) {
          const S dxhat = o->grad(i, j) * pg->value[j];
          px->grad(i, j) +=
              inv[i] * (dxhat - sum_dxhat / S(m) - xhat(i, j) * sum_dxhat_xhat / S(m));
        }
      }
      if (pg->tracked)
        for (std::size_t j = 0; j < m; ++j) pg->grad[j] += o->grad(i, j) * xhat(i, j);
      if (ps->tracked)
        for (std::size_t j = 0; j < m; ++j) ps->grad[j] += o->grad(i, j);
    }
  };
  return out;
}

// Row-wise log softmax (max-subtracted).
template <typename S>
NodePtr<S> log_softmax(const NodePtr<S>& a) {
  auto out = detail::make_op(log_softmax_rows(a->value), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  out->pull = [o, pa] {
    if (!pa->tracked) return;
    const std::size_t n = o->value.rows(), m = o->value.cols();
    for (std::size_t i = 0; i < n; ++i) {
      S gsum = S(0);
      for (std::size_t j = 0; j < m; ++j) gsum += o->grad(i, j);
      for (std::size_t j = 0; j < m; ++j)
        pa->grad(i, j) += o->grad(i, j) - std::exp(o->value(i, j)) * gsum;
    }
  };
  return out;
}

// Column-wise concatenation of row-aligned matrices (densely connected blocks).
template <typename S>
NodePtr<S> concat_cols(const std::vector<NodePtr<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0]->value.rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require(p->value.rows() == n, "concat_cols row mismatch", parts[0]->value, p->value);
    total += p->value.cols();
  }
  Tensor<S> v({n, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t m = p->value.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) v(i, off + j) = p->value(i, j);
    off += m;
  }
  auto out = detail::make_op(std::move(v), parts);
  Node<S>* o = out.get();
  std::vector<Node<S>*> raw;
  raw.reserve(parts.size());
  for (const auto& p : parts) raw.push_back(p.get());
  out->pull = [o, raw, n] {
    std::size_t off = 0;
    for (Node<S>* p : raw) {
      const std::size_t m = p->value.cols();
      if (p->tracked)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) p->grad(i, j) += o->grad(i, off + j);
      off += m;
    }
  };
  return out;
}

// (n x m) -> (n): sum across each row.
template <typename S>
NodePtr<S> row_sum(const NodePtr<S>& a) {
  const std::size_t n = a->value.rows(), m = a->value.cols();
  Tensor<S> v({n});
  for (std::size_t i = 0; i < n; ++i) {
    S s = S(0);
    for (std::size_t j = 0; j < m; ++j) s += a->value(i, j);
    v[i] = s;
  }
  auto out = detail::make_op(std::move(v), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  out->pull = [o, pa, n, m] {
    if (!pa->tracked) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) pa->grad(i, j) += o->grad[i];
  };
  return out;
}

// Per-row inner product with a constant tensor of the same shape. Used for
// the multinomial log likelihood where the feedback vector carries no grad.
template <typename S>
NodePtr<S> row_dot_const(const NodePtr<S>& a, const Tensor<S>& w) {
  detail::require(a->value.same_shape(w), "row_dot_const shapes differ", a->value, w);
  const std::size_t n = a->value.rows(), m = a->value.cols();
  Tensor<S> v({n});
  for (std::size_t i = 0; i < n; ++i) {
    S s = S(0);
    for (std::size_t j = 0; j < m; ++j) s += a->value(i, j) * w(i, j);
    v[i] = s;
  }
  auto out = detail::make_op(std::move(v), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  auto wc = std::make_shared<Tensor<S>>(w);
  out->pull = [o, pa, wc, n, m] {
    if (!pa->tracked) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) pa->grad(i, j) += o->grad[i] * (*wc)(i, j);
  };
  return out;
}

// Elementwise product with a constant (per-user KL weights and the like).
template <typename S>
NodePtr<S> mul_const(const NodePtr<S>& a, const Tensor<S>& w) {
  detail::require(a->value.same_shape(w), "mul_const shapes differ", a->value, w);
  Tensor<S> v(a->value.shape());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->value[i] * w[i];
  auto out = detail::make_op(std::move(v), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  auto wc = std::make_shared<Tensor<S>>(w);
  out->pull = [o, pa, wc] {
    if (!pa->tracked) return;
    for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i] * (*wc)[i];
  };
  return out;
}

// Elementwise log(sum_c exp(term_c)) over same-shape inputs (mixture priors).
template <typename S>
NodePtr<S> log_sum_exp(const std::vector<NodePtr<S>>& terms) {
  if (terms.empty()) throw ShapeError("log_sum_exp: no inputs");
  const auto& shape = terms[0]->value.shape();
  for (const auto& t : terms)
    detail::require(t->value.shape() == shape, "log_sum_exp shapes differ", terms[0]->value,
                    t->value);
  const std::size_t size = terms[0]->value.size();
  Tensor<S> v(shape);
  for (std::size_t i = 0; i < size; ++i) {
    S mx = terms[0]->value[i];
    for (const auto& t : terms) mx = std::max(mx, t->value[i]);
    S s = S(0);
    for (const auto& t : terms) s += std::exp(t->value[i] - mx);
    v[i] = mx + std::log(s);
  }
  auto out = detail::make_op(std::move(v), terms);
  Node<S>* o = out.get();
  std::vector<Node<S>*> raw;
  for (const auto& t : terms) raw.push_back(t.get());
  out->pull = [o, raw, size] {
    for (Node<S>* p : raw) {
      if (!p->tracked) continue;
      for (std::size_t i = 0; i < size; ++i)
        p->grad[i] += o->grad[i] * std::exp(p->value[i] - o->value[i]);
    }
  };
  return out;
}

template <typename S>
NodePtr<S> sum_all(const NodePtr<S>& a) {
  S s = S(0);
  for (std::size_t i = 0; i < a->value.size(); ++i) s += a->value[i];
  auto out = detail::make_op(Tensor<S>::scalar(s), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  out->pull = [o, pa] {
    if (!pa->tracked) return;
    for (std::size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += o->grad[0];
  };
  return out;
}

template <typename S>
NodePtr<S> mean_all(const NodePtr<S>& a) {
  const std::size_t n = a->value.size();
  S s = S(0);
  for (std::size_t i = 0; i < n; ++i) s += a->value[i];
  auto out = detail::make_op(Tensor<S>::scalar(s / S(n)), {a});
  Node<S>* o = out.get();
  Node<S>* pa = a.get();
  out->pull = [o, pa, n] {
    if (!pa->tracked) return;
    for (std::size_t i = 0; i < n; ++i) pa->grad[i] += o->grad[0] / S(n);
  };
  return out;
}

// Populates gradients of every tracked node reachable from `loss` by reverse
// topological traversal. `loss` must be scalar.
template <typename S>
void backward(const NodePtr<S>& loss) {
  if (loss->value.size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + loss->value.shape_string());
  if (!loss->tracked) return;  // nothing reachable requires gradients

  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  std::vector<std::pair<Node<S>*, std::size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<S>* p = node->parents[next++].get();
      if (p->tracked && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->grad[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->pull) (*it)->pull();
}

}  // namespace recvae
