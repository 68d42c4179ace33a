#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "recvae/interactions.hpp"

namespace recvae {

// Item-item weights of the closed-form shallow autoencoder. The diagonal is
// exactly zero.
struct EaseModel {
  std::size_t items = 0;
  double lambda = 0;
  std::vector<double> weights;  // row-major (items x items)

  double at(std::size_t i, std::size_t j) const { return weights[i * items + j]; }
};

// Closed form B = I - P diagMat(1/diag(P)) with P = (X^T X + lambda I)^{-1}.
// Dense SPD inversion; refuses matrices beyond max_items with an explicit
// capability error. Users outside `users` are ignored (pass the training
// set); an empty span uses every row.
EaseModel ease_fit(const InteractionMatrix& matrix, double lambda,
                   std::span<const std::uint32_t> users = {}, std::size_t max_items = 20000);

// Prediction scores x_u B with fold-in items masked to -inf.
std::vector<double> ease_scores(const EaseModel& model, std::span<const std::uint32_t> fold_in);

// Global item interaction counts over the given users (the popularity
// ranking baseline). Empty span uses every row.
std::vector<double> popularity_scores(const InteractionMatrix& matrix,
                                      std::span<const std::uint32_t> users = {});

}  // namespace recvae
