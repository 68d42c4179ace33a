#include "recvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "recvae/errors.hpp"
#include "recvae/rng.hpp"

namespace recvae {

std::vector<std::uint32_t> rank_items(std::span<const double> scores, std::size_t k) {
  std::vector<std::uint32_t> idx;
  idx.reserve(scores.size());
  for (std::uint32_t i = 0; i < scores.size(); ++i)
    if (scores[i] != -std::numeric_limits<double>::infinity()) idx.push_back(i);
  const std::size_t take = std::min(k, idx.size());
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                    better);
  idx.resize(take);
  return idx;
}

namespace {

bool contains(std::span<const std::uint32_t> sorted, std::uint32_t v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

}  // namespace

double recall_at_k(std::span<const std::uint32_t> ranked,
                   std::span<const std::uint32_t> holdout, std::size_t k) {
  if (k == 0) throw ShapeError("recall_at_k: k must be positive");
  if (holdout.empty()) throw ShapeError("recall_at_k: empty holdout set");
  const std::size_t depth = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t n = 0; n < depth; ++n)
    if (contains(holdout, ranked[n])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(std::min(k, holdout.size()));
}

double ndcg_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> holdout,
                 std::size_t k) {
  if (k == 0) throw ShapeError("ndcg_at_k: k must be positive");
  if (holdout.empty()) throw ShapeError("ndcg_at_k: empty holdout set");
  const std::size_t depth = std::min(k, ranked.size());
  double dcg = 0;
  for (std::size_t n = 0; n < depth; ++n)
    if (contains(holdout, ranked[n])) dcg += 1.0 / std::log(static_cast<double>(n) + 2.0);
  double ideal = 0;
  const std::size_t ideal_depth = std::min(k, holdout.size());
  for (std::size_t n = 0; n < ideal_depth; ++n)
    ideal += 1.0 / std::log(static_cast<double>(n) + 2.0);
  return dcg / ideal;
}

std::string MetricSpec::name() const {
  return (kind == Kind::recall ? "recall@" : "ndcg@") + std::to_string(k);
}

const MetricEntry* MetricsReport::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::string MetricsReport::to_table() const {
  std::ostringstream out;
  out << "metric        mean      ci95      users\n";
  for (const auto& e : entries) {
    out << e.name;
    for (std::size_t pad = e.name.size(); pad < 14; ++pad) out << ' ';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f    %.4f    %zu\n", e.mean, e.ci_half, e.users);
    out << buf;
  }
  out << "skipped users (no holdout): " << skipped_users << "\n";
  return out.str();
}

std::string MetricsReport::to_json() const {
  std::ostringstream out;
  out << "{\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  \"%s\": {\"mean\": %.6f, \"ci\": %.6f, \"n\": %zu},\n",
                  e.name.c_str(), e.mean, e.ci_half, e.users);
    out << buf;
  }
  out << "  \"skipped_users\": " << skipped_users << "\n}\n";
  return out.str();
}

double bootstrap_ci_half(std::span<const double> values, std::size_t resamples,
                         std::uint64_t seed) {
  if (values.size() < 2 || resamples == 0) return 0;
  Rng rng(seed);
  std::vector<double> means(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    double sum = 0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += values[rng.below(values.size())];
    means[b] = sum / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  auto percentile = [&](double p) {
    const double pos = p * static_cast<double>(means.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  return (percentile(0.975) - percentile(0.025)) / 2.0;
}

MetricsReport evaluate(const Scorer& scorer, std::span<const HeldOutUser> users,
                       const EvaluateOptions& options) {
  std::size_t max_k = 0;
  for (const auto& spec : options.metrics) max_k = std::max(max_k, spec.k);

  MetricsReport report;
  std::vector<std::vector<double>> per_user(options.metrics.size());
  for (const auto& hu : users) {
    if (!hu.usable()) {
      ++report.skipped_users;
      continue;
    }
    std::vector<double> scores = scorer(hu.fold_in);
    // Fold-in items never enter a ranked list, whatever the scorer did.
    for (std::uint32_t idx : hu.fold_in)
      scores[idx] = -std::numeric_limits<double>::infinity();
    const auto ranked = rank_items(scores, max_k);
    for (std::size_t m = 0; m < options.metrics.size(); ++m) {
      const auto& spec = options.metrics[m];
      const double v = spec.kind == MetricSpec::Kind::recall
                           ? recall_at_k(ranked, hu.holdout, spec.k)
                           : ndcg_at_k(ranked, hu.holdout, spec.k);
      per_user[m].push_back(v);
    }
    ++report.evaluated_users;
  }
  if (report.evaluated_users == 0) throw DataError("evaluate: no usable held-out users");

  for (std::size_t m = 0; m < options.metrics.size(); ++m) {
    MetricEntry e;
    e.name = options.metrics[m].name();
    e.users = per_user[m].size();
    e.mean = std::accumulate(per_user[m].begin(), per_user[m].end(), 0.0) /
             static_cast<double>(per_user[m].size());
    e.ci_half = bootstrap_ci_half(per_user[m], options.bootstrap_resamples,
                                  options.bootstrap_seed + m);
    report.entries.push_back(std::move(e));
  }
  return report;
}

double mean_metric(const Scorer& scorer, std::span<const HeldOutUser> users,
                   const MetricSpec& spec) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& hu : users) {
    if (!hu.usable()) continue;
    std::vector<double> scores = scorer(hu.fold_in);
    for (std::uint32_t idx : hu.fold_in)
      scores[idx] = -std::numeric_limits<double>::infinity();
    const auto ranked = rank_items(scores, spec.k);
    sum += spec.kind == MetricSpec::Kind::recall ? recall_at_k(ranked, hu.holdout, spec.k)
                                                 : ndcg_at_k(ranked, hu.holdout, spec.k);
    ++n;
  }
  if (n == 0) throw DataError("mean_metric: no usable held-out users");
  return sum / static_cast<double>(n);
}

}  // namespace recvae
