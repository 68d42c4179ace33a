#include "recvae/ease.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "recvae/errors.hpp"

namespace recvae {

namespace {

// In-place Cholesky factorization A = L L^T (lower triangle).
void cholesky(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (d <= 0) throw NumericalError("cholesky: matrix not positive definite");
    const double ljj = std::sqrt(d);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
  }
}

// Solves L L^T x = b in place.
void cholesky_solve(const std::vector<double>& l, std::size_t n, std::vector<double>& b) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
    b[i] = s / l[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * b[k];
    b[ii] = s / l[ii * n + ii];
  }
}

}  // namespace

EaseModel ease_fit(const InteractionMatrix& matrix, double lambda,
                   std::span<const std::uint32_t> users, std::size_t max_items) {
  if (!(lambda > 0)) throw ShapeError("ease_fit: lambda must be positive");
  const std::size_t n = matrix.num_items();
  if (n == 0) throw DataError("ease_fit: no items");
  if (n > max_items)
    throw CapabilityError("ease_fit: " + std::to_string(n) +
                          " items exceeds the dense-inversion limit of " +
                          std::to_string(max_items));

  // Gram matrix from the sparse rows, plus the ridge.
  std::vector<double> gram(n * n, 0.0);
  auto add_row = [&](const std::vector<std::uint32_t>& row) {
    for (std::size_t a = 0; a < row.size(); ++a)
      for (std::size_t b = 0; b < row.size(); ++b) gram[row[a] * n + row[b]] += 1.0;
  };
  if (users.empty()) {
    for (const auto& row : matrix.rows) add_row(row);
  } else {
    for (std::uint32_t u : users) add_row(matrix.rows[u]);
  }
  for (std::size_t i = 0; i < n; ++i) gram[i * n + i] += lambda;

  cholesky(gram, n);  // gram now holds L

  // P = (X^T X + lambda I)^{-1}, one solve per unit column.
  std::vector<double> p(n * n, 0.0);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    cholesky_solve(gram, n, col);
    for (std::size_t i = 0; i < n; ++i) p[i * n + j] = col[i];
  }

  EaseModel model;
  model.items = n;
  model.lambda = lambda;
  model.weights.assign(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double pjj = p[j * n + j];
    if (pjj == 0) throw NumericalError("ease_fit: zero diagonal in the inverse Gram matrix");
    for (std::size_t i = 0; i < n; ++i)
      model.weights[i * n + j] = (i == j ? 1.0 : 0.0) - p[i * n + j] / pjj;
    model.weights[j * n + j] = 0.0;
  }
  return model;
}

std::vector<double> ease_scores(const EaseModel& model, std::span<const std::uint32_t> fold_in) {
  std::vector<double> scores(model.items, 0.0);
  for (std::uint32_t i : fold_in) {
    const double* row = &model.weights[static_cast<std::size_t>(i) * model.items];
    for (std::size_t j = 0; j < model.items; ++j) scores[j] += row[j];
  }
  for (std::uint32_t i : fold_in) scores[i] = -std::numeric_limits<double>::infinity();
  return scores;
}

std::vector<double> popularity_scores(const InteractionMatrix& matrix,
                                      std::span<const std::uint32_t> users) {
  std::vector<double> counts(matrix.num_items(), 0.0);
  auto add_row = [&](const std::vector<std::uint32_t>& row) {
    for (std::uint32_t i : row) counts[i] += 1.0;
  };
  if (users.empty()) {
    for (const auto& row : matrix.rows) add_row(row);
  } else {
    for (std::uint32_t u : users) add_row(matrix.rows[u]);
  }
  return counts;
}

}  // namespace recvae
