#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "recvae/interactions.hpp"
#include "recvae/rng.hpp"

namespace recvae {

// A held-out user's feedback partitioned into the fold-in part (used to
// compute the embedding at evaluation time) and the holdout part (the
// scoring target). A user with a single interaction gets an empty holdout
// and is excluded from metric averages.
struct HeldOutUser {
  std::uint32_t user = 0;
  std::vector<std::uint32_t> fold_in;  // sorted
  std::vector<std::uint32_t> holdout;  // sorted
  bool usable() const { return !holdout.empty(); }
};

// Strong-generalization split: validation/test users never appear in the
// training set.
struct DatasetSplit {
  std::vector<std::uint32_t> train_users;
  std::vector<HeldOutUser> validation;
  std::vector<HeldOutUser> test;
};

// Partitions users into train / validation / test with n_heldout users in
// each held-out set. Deterministic in (matrix, n_heldout, seed).
DatasetSplit split_users(const InteractionMatrix& matrix, std::size_t n_heldout,
                         std::uint64_t seed);

// Uniformly random partition of one user's feedback row.
// |fold_in| = max(1, floor(fraction * n)) for n >= 2, capped so the holdout
// keeps at least one item; a single-interaction row goes entirely to fold-in.
std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> fold_in_split(
    const std::vector<std::uint32_t>& row, double fraction, Rng& rng);

// Fills fold-in/holdout sets for every held-out user. Deterministic in
// (matrix, split, fraction, seed); each user draws from a forked stream so
// the assignment does not depend on evaluation order.
void assign_fold_in(const InteractionMatrix& matrix, DatasetSplit& split, double fraction,
                    std::uint64_t seed);

}  // namespace recvae
