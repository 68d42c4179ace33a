#include <doctest.h>

#include <cmath>

#include "recvae/ease.hpp"
#include "recvae/rng.hpp"
#include "support/oracles.hpp"

using namespace recvae;

namespace {

InteractionMatrix matrix_from_rows(std::size_t items,
                                   std::vector<std::vector<std::uint32_t>> rows) {
  InteractionMatrix m;
  for (std::size_t i = 0; i < items; ++i) m.item_ids.push_back("i" + std::to_string(i));
  for (std::size_t u = 0; u < rows.size(); ++u) m.user_ids.push_back("u" + std::to_string(u));
  m.rows = std::move(rows);
  return m;
}

InteractionMatrix random_matrix(std::size_t users, std::size_t items, Rng& rng) {
  std::vector<std::vector<std::uint32_t>> rows(users);
  for (auto& row : rows) {
    for (std::uint32_t i = 0; i < items; ++i)
      if (rng.uniform() < 0.45) row.push_back(i);
    if (row.empty()) row.push_back(static_cast<std::uint32_t>(rng.below(items)));
  }
  return matrix_from_rows(items, std::move(rows));
}

}  // namespace

TEST_CASE("identity interactions with unit ridge collapse to zero weights") {
  // X = I2, lambda = 1: P = I/2, B = I - P * diag(2) = 0.
  const auto m = matrix_from_rows(2, {{0}, {1}});
  const EaseModel model = ease_fit(m, 1.0);
  for (double w : model.weights) CHECK(w == 0.0);
}

TEST_CASE("the diagonal is exactly zero") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = random_matrix(8, 6, rng);
    const EaseModel model = ease_fit(m, 0.5 + rng.uniform() * 10.0);
    for (std::size_t i = 0; i < model.items; ++i) CHECK(model.at(i, i) == 0.0);
  }
}

TEST_CASE("closed form matches the constrained least-squares oracle") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t users = 4 + rng.below(5);  // up to 8
    const std::size_t items = 3 + rng.below(4);  // up to 6
    const auto m = random_matrix(users, items, rng);
    const double lambda = 0.2 + 4.0 * rng.uniform();
    const EaseModel model = ease_fit(m, lambda);
    const auto ref = oracles::ease_reference(m.rows, items, lambda);
    for (std::size_t i = 0; i < items * items; ++i)
      CHECK(std::abs(model.weights[i] - ref[i]) < 1e-6);
  }
}

TEST_CASE("permuting items conjugates the weight matrix") {
  Rng rng(9);
  const std::size_t items = 5;
  const auto m = random_matrix(10, items, rng);
  const EaseModel base = ease_fit(m, 2.0);

  // Reverse the item indexing.
  auto permuted_rows = m.rows;
  for (auto& row : permuted_rows) {
    for (auto& i : row) i = static_cast<std::uint32_t>(items - 1 - i);
    std::sort(row.begin(), row.end());
  }
  const EaseModel permuted = ease_fit(matrix_from_rows(items, permuted_rows), 2.0);
  for (std::size_t i = 0; i < items; ++i)
    for (std::size_t j = 0; j < items; ++j)
      CHECK(permuted.at(items - 1 - i, items - 1 - j) ==
            doctest::Approx(base.at(i, j)).epsilon(1e-9));
}

TEST_CASE("ease_fit is deterministic and validates inputs") {
  Rng rng(4);
  const auto m = random_matrix(6, 4, rng);
  const EaseModel a = ease_fit(m, 1.5);
  const EaseModel b = ease_fit(m, 1.5);
  CHECK(a.weights == b.weights);
  CHECK_THROWS_AS(ease_fit(m, 0.0), ShapeError);
  CHECK_THROWS_AS(ease_fit(m, 1.0, {}, 3), CapabilityError);
}

TEST_CASE("ease scores sum the rows of selected items and mask fold-in") {
  const auto m = matrix_from_rows(3, {{0, 1}, {1, 2}, {0, 2}, {0, 1, 2}});
  const EaseModel model = ease_fit(m, 1.0);
  const std::vector<std::uint32_t> fold_in{0, 2};
  const auto scores = ease_scores(model, fold_in);
  CHECK(scores[1] == doctest::Approx(model.at(0, 1) + model.at(2, 1)));
  CHECK(scores[0] == -std::numeric_limits<double>::infinity());
  CHECK(scores[2] == -std::numeric_limits<double>::infinity());
}

TEST_CASE("training-user restriction changes the fit") {
  Rng rng(31);
  const auto m = random_matrix(12, 5, rng);
  std::vector<std::uint32_t> first_half{0, 1, 2, 3, 4, 5};
  const EaseModel all = ease_fit(m, 1.0);
  const EaseModel half = ease_fit(m, 1.0, first_half);
  bool any_different = false;
  for (std::size_t i = 0; i < all.weights.size(); ++i)
    if (std::abs(all.weights[i] - half.weights[i]) > 1e-12) any_different = true;
  CHECK(any_different);
}

TEST_CASE("popularity scores count interactions") {
  const auto m = matrix_from_rows(4, {{0, 1}, {1, 2}, {1}, {0}});
  const auto counts = popularity_scores(m);
  CHECK(counts[0] == 2.0);
  CHECK(counts[1] == 3.0);
  CHECK(counts[2] == 1.0);
  CHECK(counts[3] == 0.0);

  const std::vector<std::uint32_t> subset{0, 1};
  const auto sub = popularity_scores(m, subset);
  CHECK(sub[1] == 2.0);
  CHECK(sub[0] == 1.0);
}
