#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "recvae/split.hpp"

namespace recvae {

// Top-k ranked item indices by descending score (ties broken by item index).
// Entries at -inf (excluded fold-in items) never enter the ranking.
std::vector<std::uint32_t> rank_items(std::span<const double> scores, std::size_t k);

// Recall@k with the min(k, |holdout|) normalizer. holdout must be sorted.
double recall_at_k(std::span<const std::uint32_t> ranked,
                   std::span<const std::uint32_t> holdout, std::size_t k);

// NDCG@k: DCG with gain (2^hit - 1)/log(n+1) normalized by the ideal DCG
// truncated at min(k, |holdout|). holdout must be sorted.
double ndcg_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> holdout,
                 std::size_t k);

struct MetricEntry {
  std::string name;
  double mean = 0;
  double ci_half = 0;  // 95% bootstrap half-width
  std::size_t users = 0;
};

struct MetricsReport {
  std::vector<MetricEntry> entries;
  std::size_t evaluated_users = 0;
  std::size_t skipped_users = 0;  // held-out users without a holdout set

  const MetricEntry* find(const std::string& name) const;
  std::string to_table() const;
  std::string to_json() const;
};

struct MetricSpec {
  enum class Kind { recall, ndcg } kind;
  std::size_t k;
  std::string name() const;
};

// Scores every item for one user given their fold-in items.
using Scorer = std::function<std::vector<double>(std::span<const std::uint32_t> fold_in)>;

struct EvaluateOptions {
  std::vector<MetricSpec> metrics{{MetricSpec::Kind::recall, 20},
                                  {MetricSpec::Kind::recall, 50},
                                  {MetricSpec::Kind::ndcg, 100}};
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t bootstrap_seed = 2024;
};

// Per-user metrics from the scorer on fold-in rows, averaged over usable
// users, with user-level bootstrap confidence intervals.
MetricsReport evaluate(const Scorer& scorer, std::span<const HeldOutUser> users,
                       const EvaluateOptions& options = {});

// Mean of a single metric without bootstrap (epoch-level validation).
double mean_metric(const Scorer& scorer, std::span<const HeldOutUser> users,
                   const MetricSpec& spec);

// Percentile-bootstrap 95% half-width of the mean.
double bootstrap_ci_half(std::span<const double> values, std::size_t resamples,
                         std::uint64_t seed);

}  // namespace recvae
