// Microbenchmarks for the hot paths: dense kernels, the training step and
// ranking. Run with --benchmark_filter=... to narrow.

#include <benchmark/benchmark.h>

#include "recvae/ease.hpp"
#include "recvae/metrics.hpp"
#include "recvae/model.hpp"
#include "recvae/trainer.hpp"

namespace {

using namespace recvae;

TensorF random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  TensorF t({r, c});
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const TensorF a = random_tensor(n, n, rng);
  const TensorF b = random_tensor(n, n, rng);
  for (auto _ : state) {
    TensorF c = matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_log_softmax(benchmark::State& state) {
  const auto items = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const TensorF logits = random_tensor(128, items, rng);
  for (auto _ : state) {
    TensorF out = log_softmax_rows(logits);
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_log_softmax)->Arg(300)->Arg(2000);

InteractionMatrix bench_matrix(std::size_t users, std::size_t items) {
  InteractionMatrix m;
  Rng rng(3);
  for (std::size_t i = 0; i < items; ++i) m.item_ids.push_back("i" + std::to_string(i));
  for (std::size_t u = 0; u < users; ++u) {
    m.user_ids.push_back("u" + std::to_string(u));
    std::vector<std::uint32_t> row;
    for (std::uint32_t i = 0; i < items; ++i)
      if (rng.uniform() < 0.12) row.push_back(i);
    if (row.empty()) row.push_back(static_cast<std::uint32_t>(rng.below(items)));
    m.rows.push_back(std::move(row));
  }
  return m;
}

void BM_training_epoch(benchmark::State& state) {
  const InteractionMatrix matrix = bench_matrix(600, 300);
  DatasetSplit split = split_users(matrix, 50, 1);
  assign_fold_in(matrix, split, 0.8, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 200;
  cfg.seed = 1;
  cfg.hyper.latent_dim = 16;
  cfg.hyper.hidden_dim = 64;
  cfg.hyper.hidden_layers = 2;
  for (auto _ : state) {
    state.PauseTiming();
    TrainSession session(matrix, split, cfg);
    state.ResumeTiming();
    benchmark::DoNotOptimize(session.run_epoch());
  }
}
BENCHMARK(BM_training_epoch)->Unit(benchmark::kMillisecond);

void BM_predict_and_rank(benchmark::State& state) {
  Rng rng(4);
  const std::size_t items = 2000, latent = 64;
  auto enc = EncoderParams<float>::init(EncoderArch::dense_swish, items, 128, latent, 3, rng);
  auto dec = DecoderParams<float>::init(items, latent, rng);
  std::vector<std::uint32_t> fold_in;
  for (std::uint32_t i = 0; i < items; i += 40) fold_in.push_back(i);
  for (auto _ : state) {
    const auto scores = predict_scores(fold_in, enc, dec);
    auto ranked = rank_items(scores, 100);
    benchmark::DoNotOptimize(ranked.data());
  }
  state.SetItemsProcessed(state.iterations() * items);
}
BENCHMARK(BM_predict_and_rank);

void BM_ease_fit(benchmark::State& state) {
  const auto items = static_cast<std::size_t>(state.range(0));
  const InteractionMatrix matrix = bench_matrix(400, items);
  for (auto _ : state) {
    EaseModel model = ease_fit(matrix, 100.0);
    benchmark::DoNotOptimize(model.weights.data());
  }
}
BENCHMARK(BM_ease_fit)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
