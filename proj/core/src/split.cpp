#include "recvae/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace recvae {

DatasetSplit split_users(const InteractionMatrix& matrix, std::size_t n_heldout,
                         std::uint64_t seed) {
  const std::size_t n_users = matrix.num_users();
  if (2 * n_heldout >= n_users)
    throw DataError("not enough users to hold out " + std::to_string(n_heldout) +
                    " for validation and test each (have " + std::to_string(n_users) + ")");

  std::vector<std::uint32_t> order(n_users);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  DatasetSplit split;
  split.validation.resize(n_heldout);
  split.test.resize(n_heldout);
  for (std::size_t i = 0; i < n_heldout; ++i) split.validation[i].user = order[i];
  for (std::size_t i = 0; i < n_heldout; ++i) split.test[i].user = order[n_heldout + i];
  split.train_users.assign(order.begin() + 2 * n_heldout, order.end());
  std::sort(split.train_users.begin(), split.train_users.end());
  auto by_user = [](const HeldOutUser& a, const HeldOutUser& b) { return a.user < b.user; };
  std::sort(split.validation.begin(), split.validation.end(), by_user);
  std::sort(split.test.begin(), split.test.end(), by_user);
  return split;
}

std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> fold_in_split(
    const std::vector<std::uint32_t>& row, double fraction, Rng& rng) {
  if (row.empty()) throw DataError("fold_in_split: empty feedback row");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ShapeError("fold_in_split: fraction must lie in (0, 1)");

  const std::size_t n = row.size();
  if (n == 1) return {row, {}};

  std::vector<std::uint32_t> shuffled = row;
  rng.shuffle(shuffled.begin(), shuffled.end());
  std::size_t keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  keep = std::max<std::size_t>(1, std::min(keep, n - 1));

  std::vector<std::uint32_t> fold_in(shuffled.begin(), shuffled.begin() + keep);
  std::vector<std::uint32_t> holdout(shuffled.begin() + keep, shuffled.end());
  std::sort(fold_in.begin(), fold_in.end());
  std::sort(holdout.begin(), holdout.end());
  return {std::move(fold_in), std::move(holdout)};
}

void assign_fold_in(const InteractionMatrix& matrix, DatasetSplit& split, double fraction,
                    std::uint64_t seed) {
  auto assign = [&](HeldOutUser& hu) {
    // Per-user stream keyed on (seed, user id): independent of iteration order.
    Rng user_rng(seed ^ (0x9e3779b97f4a7c15ULL * (hu.user + 1)));
    auto [fold_in, holdout] = fold_in_split(matrix.rows[hu.user], fraction, user_rng);
    hu.fold_in = std::move(fold_in);
    hu.holdout = std::move(holdout);
  };
  for (auto& hu : split.validation) assign(hu);
  for (auto& hu : split.test) assign(hu);
}

}  // namespace recvae
