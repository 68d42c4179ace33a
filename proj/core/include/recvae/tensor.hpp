#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "recvae/errors.hpp"

namespace recvae {

// Dense row-major tensor of rank 0..2. The scalar type is a construction-time
// choice: double where gradients are checked against finite differences,
// float for training.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    values_.assign(count(shape_), S(0));
  }

  Tensor(std::vector<std::size_t> shape, std::vector<S> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != count(shape_))
      throw ShapeError("tensor value count does not match shape");
  }

  static Tensor scalar(S v) { return Tensor({}, {v}); }

  static Tensor zeros(std::size_t n) { return Tensor({n}); }
  static Tensor zeros(std::size_t r, std::size_t c) { return Tensor({r, c}); }

  static Tensor full(std::vector<std::size_t> shape, S v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  // Rank-2 accessors; rank-0/1 tensors behave as 1xN for row purposes.
  std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const {
    if (rank() == 2) return shape_[1];
    return rank() == 1 ? shape_[0] : 1;
  }

  S& operator[](std::size_t i) { return values_[i]; }
  S operator[](std::size_t i) const { return values_[i]; }
  S& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  S operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  S* row_ptr(std::size_t r) { return values_.data() + r * cols(); }
  const S* row_ptr(std::size_t r) const { return values_.data() + r * cols(); }

  std::span<S> data() { return values_; }
  std::span<const S> data() const { return values_; }

  void fill(S v) { values_.assign(values_.size(), v); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (S v : values_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + ")";
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }

  std::vector<std::size_t> shape_;
  std::vector<S> values_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

namespace detail {

template <typename S>
void require(bool ok, const char* what, const Tensor<S>& a, const Tensor<S>& b) {
  if (!ok)
    throw ShapeError(std::string(what) + ": " + a.shape_string() + " vs " + b.shape_string());
}

}  // namespace detail

// C += A * B. Loop order keeps B and C accesses contiguous.
template <typename S>
void matmul_nn_acc(const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& c) {
  detail::require(a.rank() == 2 && b.rank() == 2 && a.cols() == b.rows(),
                  "matmul inner dimensions disagree", a, b);
  detail::require(c.rows() == a.rows() && c.cols() == b.cols(), "matmul output shape", a, c);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    S* crow = c.row_ptr(i);
    const S* arow = a.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const S aip = arow[p];
      if (aip == S(0)) continue;
      const S* brow = b.row_ptr(p);
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C += A * B^T.
template <typename S>
void matmul_nt_acc(const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& c) {
  detail::require(a.rank() == 2 && b.rank() == 2 && a.cols() == b.cols(),
                  "matmul_nt inner dimensions disagree", a, b);
  detail::require(c.rows() == a.rows() && c.cols() == b.rows(), "matmul_nt output shape", a, c);
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const S* arow = a.row_ptr(i);
    S* crow = c.row_ptr(i);
    for (std::size_t j = 0; j < m; ++j) {
      const S* brow = b.row_ptr(j);
      S acc = S(0);
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C += A^T * B.
template <typename S>
void matmul_tn_acc(const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& c) {
  detail::require(a.rank() == 2 && b.rank() == 2 && a.rows() == b.rows(),
                  "matmul_tn inner dimensions disagree", a, b);
  detail::require(c.rows() == a.cols() && c.cols() == b.cols(), "matmul_tn output shape", a, c);
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    const S* arow = a.row_ptr(p);
    const S* brow = b.row_ptr(p);
    for (std::size_t i = 0; i < n; ++i) {
      const S api = arow[i];
      if (api == S(0)) continue;
      S* crow = c.row_ptr(i);
      for (std::size_t j = 0; j < m; ++j) crow[j] += api * brow[j];
    }
  }
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  Tensor<S> c({a.rows(), b.cols()});
  matmul_nn_acc(a, b, c);
  return c;
}

template <typename S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b) {
  Tensor<S> c({a.rows(), b.rows()});
  matmul_nt_acc(a, b, c);
  return c;
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  Tensor<S> t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <typename S>
S sigmoid(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

template <typename S>
Tensor<S> swish(const Tensor<S>& x) {
  Tensor<S> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoid(x[i]);
  return y;
}

// Row-wise log softmax with max subtraction.
template <typename S>
Tensor<S> log_softmax_rows(const Tensor<S>& x) {
  Tensor<S> y(x.shape());
  const std::size_t n = x.rows(), m = x.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const S* in = x.row_ptr(i);
    S* out = y.row_ptr(i);
    S mx = in[0];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, in[j]);
    S sum = S(0);
    for (std::size_t j = 0; j < m; ++j) sum += std::exp(in[j] - mx);
    const S lse = mx + std::log(sum);
    for (std::size_t j = 0; j < m; ++j) out[j] = in[j] - lse;
  }
  return y;
}

// Row-wise layer normalization followed by the affine transform.
template <typename S>
Tensor<S> layer_norm_rows(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& shift,
                          S eps) {
  const std::size_t m = x.cols();
  detail::require(gain.size() == m && shift.size() == m, "layer_norm affine shape", gain, shift);
  Tensor<S> y(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const S* in = x.row_ptr(i);
    S* out = y.row_ptr(i);
    S mean = S(0);
    for (std::size_t j = 0; j < m; ++j) mean += in[j];
    mean /= S(m);
    S var = S(0);
    for (std::size_t j = 0; j < m; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= S(m);
    const S inv = S(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) out[j] = gain[j] * ((in[j] - mean) * inv) + shift[j];
  }
  return y;
}

}  // namespace recvae
