#include "recvae/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "recvae/metrics.hpp"

namespace recvae {

void TrainConfig::validate() const {
  hyper.validate();
  if (epochs == 0 || batch_size == 0) throw ShapeError("epochs and batch size must be positive");
  if (enc_dec_ratio == 0) throw ShapeError("encoder/decoder step ratio must be positive");
  if (!(learning_rate > 0)) throw ShapeError("learning rate must be positive");
  if (!(fixed_beta > 0)) throw ShapeError("fixed beta must be positive");
}

TrainSession::TrainSession(const InteractionMatrix& matrix, const DatasetSplit& split,
                           TrainConfig cfg)
    : matrix_(matrix),
      split_(split),
      cfg_(cfg),
      resolved_(configure_ablation(cfg.flags, cfg.hyper, cfg.fixed_beta)),
      kl_(resolved_.kl),
      rng_(cfg.seed) {
  cfg_.validate();
  if (split_.train_users.empty()) throw DataError("training requires a non-empty user set");

  enc_ = EncoderParams<float>::init(resolved_.arch, matrix_.num_items(), cfg_.hyper.hidden_dim,
                                    cfg_.hyper.latent_dim, cfg_.hyper.hidden_layers, rng_);
  dec_ = DecoderParams<float>::init(matrix_.num_items(), cfg_.hyper.latent_dim, rng_);
  prior_ = CompositePrior<float>(resolved_.prior_weights, cfg_.hyper.wide_logvar, enc_);
  best_enc_ = enc_.detached_copy();
  best_dec_ = dec_.detached_copy();

  for (const auto& p : enc_.parameters())
    enc_adam_.emplace_back(p->value, static_cast<float>(cfg_.learning_rate));
  for (const auto& p : dec_.parameters())
    dec_adam_.emplace_back(p->value, static_cast<float>(cfg_.learning_rate));

  const std::size_t n_train = split_.train_users.size();
  dec_steps_ = cfg_.dec_steps ? cfg_.dec_steps
                              : (n_train + cfg_.batch_size - 1) / cfg_.batch_size;
  enc_steps_ = cfg_.enc_dec_ratio * dec_steps_;
  pool_ = split_.train_users;
  pool_pos_ = pool_.size();  // force a shuffle before the first batch
}

void TrainSession::load_parameters(const Checkpoint& ckpt) {
  HyperParams loaded;
  from_checkpoint(ckpt, enc_, dec_, loaded);
  if (enc_.input_dim != matrix_.num_items())
    throw DataError("checkpoint item count does not match the dataset");
  prior_.refresh(enc_);
  best_enc_ = enc_.detached_copy();
  best_dec_ = dec_.detached_copy();
}

std::vector<std::uint32_t> TrainSession::next_batch() {
  // Without replacement until the pool is exhausted, then reshuffle.
  if (pool_pos_ >= pool_.size()) {
    rng_.shuffle(pool_.begin(), pool_.end());
    pool_pos_ = 0;
  }
  const std::size_t take = std::min(cfg_.batch_size, pool_.size() - pool_pos_);
  std::vector<std::uint32_t> batch(pool_.begin() + static_cast<std::ptrdiff_t>(pool_pos_),
                                   pool_.begin() + static_cast<std::ptrdiff_t>(pool_pos_ + take));
  pool_pos_ += take;
  return batch;
}

Tensor<float> TrainSession::dense_batch(const std::vector<std::uint32_t>& users) const {
  Tensor<float> x({users.size(), matrix_.num_items()});
  for (std::size_t r = 0; r < users.size(); ++r)
    for (std::uint32_t item : matrix_.rows[users[r]]) x(r, item) = 1.0f;
  return x;
}

Tensor<float> TrainSession::draw_eps(std::size_t n) {
  Tensor<float> eps({n, cfg_.hyper.latent_dim});
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = static_cast<float>(rng_.normal());
  return eps;
}

void TrainSession::zero_all_grads() {
  for (const auto& p : enc_.parameters()) p->zero_grad();
  for (const auto& p : dec_.parameters()) p->zero_grad();
}

void TrainSession::apply_updates(const std::vector<NodePtr<float>>& params,
                                 std::vector<AdamState<float>>& states) {
  for (std::size_t i = 0; i < params.size(); ++i)
    adam_step(params[i]->value, params[i]->grad, states[i]);
}

void TrainSession::check_finite(double objective, const char* phase, std::size_t step) const {
  if (std::isfinite(objective)) return;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "non-finite training objective (epoch %zu, %s step %zu, seed %llu)", epoch_ + 1,
                phase, step, static_cast<unsigned long long>(cfg_.seed));
  throw NumericalError(buf);
}

double TrainSession::step_encoder() {
  const auto batch = next_batch();
  const Tensor<float> x = dense_batch(batch);
  const Tensor<float> noisy = corrupt(x, cfg_.hyper.noise_keep, rng_, cfg_.noise_rescale);
  const Tensor<float> eps = draw_eps(batch.size());
  auto terms = elbo_estimate(x, noisy, enc_, dec_, prior_, kl_, eps);
  const double objective = terms.objective->value[0];
  backward(scale(terms.objective, -1.0f));
  apply_updates(enc_.parameters(), enc_adam_);
  zero_all_grads();
  return objective;
}

double TrainSession::step_decoder() {
  const auto batch = next_batch();
  const Tensor<float> x = dense_batch(batch);
  const Tensor<float> eps = draw_eps(batch.size());
  double objective;
  if (resolved_.decoder_clean_input) {
    auto terms = decoder_objective(x, enc_, dec_, eps);
    objective = terms.objective->value[0];
    backward(scale(terms.objective, -1.0f));
  } else {
    const Tensor<float> noisy = corrupt(x, cfg_.hyper.noise_keep, rng_, cfg_.noise_rescale);
    auto terms = elbo_estimate(x, noisy, enc_, dec_, prior_, kl_, eps);
    objective = terms.objective->value[0];
    backward(scale(terms.objective, -1.0f));
  }
  apply_updates(dec_.parameters(), dec_adam_);
  zero_all_grads();
  return objective;
}

double TrainSession::step_joint() {
  const auto batch = next_batch();
  const Tensor<float> x = dense_batch(batch);
  const Tensor<float> noisy = corrupt(x, cfg_.hyper.noise_keep, rng_, cfg_.noise_rescale);
  const Tensor<float> eps = draw_eps(batch.size());
  auto terms = elbo_estimate(x, noisy, enc_, dec_, prior_, kl_, eps);
  const double objective = terms.objective->value[0];
  backward(scale(terms.objective, -1.0f));
  if (resolved_.decoder_clean_input) {
    // The decoder trains on the uncorrupted input even in joint mode; run a
    // second pass for theta and keep the first pass for phi only.
    apply_updates(enc_.parameters(), enc_adam_);
    zero_all_grads();
    auto dec_terms = decoder_objective(x, enc_, dec_, draw_eps(batch.size()));
    backward(scale(dec_terms.objective, -1.0f));
    apply_updates(dec_.parameters(), dec_adam_);
  } else {
    apply_updates(enc_.parameters(), enc_adam_);
    apply_updates(dec_.parameters(), dec_adam_);
  }
  zero_all_grads();
  return objective;
}

double TrainSession::encoder_phase() {
  double sum = 0;
  for (std::size_t s = 0; s < enc_steps_; ++s) {
    const double objective = step_encoder();
    check_finite(objective, "encoder", s + 1);
    sum += objective;
  }
  return sum / static_cast<double>(enc_steps_);
}

double TrainSession::decoder_phase() {
  double sum = 0;
  for (std::size_t s = 0; s < dec_steps_; ++s) {
    const double objective = step_decoder();
    check_finite(objective, "decoder", s + 1);
    sum += objective;
  }
  return sum / static_cast<double>(dec_steps_);
}

double TrainSession::joint_phase() {
  double sum = 0;
  for (std::size_t s = 0; s < dec_steps_; ++s) {
    const double objective = step_joint();
    check_finite(objective, "joint", s + 1);
    sum += objective;
  }
  return sum / static_cast<double>(dec_steps_);
}

void TrainSession::refresh_prior() { prior_.refresh(enc_); }

double TrainSession::run_epoch() {
  double mean_objective;
  if (resolved_.joint_updates) {
    mean_objective = joint_phase();
    refresh_prior();
  } else {
    const double enc_obj = encoder_phase();
    refresh_prior();
    const double dec_obj = decoder_phase();
    const double total = enc_obj * static_cast<double>(enc_steps_) +
                         dec_obj * static_cast<double>(dec_steps_);
    mean_objective = total / static_cast<double>(enc_steps_ + dec_steps_);
  }
  ++epoch_;
  return mean_objective;
}

double TrainSession::validate() const {
  std::size_t usable = 0;
  double sum = 0;
  // Batched evaluation: per-row arithmetic matches the single-user path
  // exactly, so scores are identical either way.
  const std::size_t items = matrix_.num_items();
  std::vector<const HeldOutUser*> users;
  for (const auto& hu : split_.validation)
    if (hu.usable()) users.push_back(&hu);
  if (users.empty()) throw DataError("validate: no usable validation users");

  const std::size_t chunk = std::max<std::size_t>(1, cfg_.batch_size);
  for (std::size_t begin = 0; begin < users.size(); begin += chunk) {
    const std::size_t end = std::min(users.size(), begin + chunk);
    Tensor<float> x({end - begin, items});
    for (std::size_t r = begin; r < end; ++r)
      for (std::uint32_t item : users[r]->fold_in) x(r - begin, item) = 1.0f;
    auto [mu, logvar] = encode_eval(x, enc_);
    (void)logvar;
    const Tensor<float> logits = matmul_nt(mu, dec_.weight->value);
    for (std::size_t r = begin; r < end; ++r) {
      std::vector<double> scores(items);
      for (std::size_t j = 0; j < items; ++j)
        scores[j] = static_cast<double>(logits(r - begin, j)) +
                    static_cast<double>(dec_.bias->value[j]);
      for (std::uint32_t item : users[r]->fold_in)
        scores[item] = -std::numeric_limits<double>::infinity();
      const auto ranked = rank_items(scores, 100);
      sum += ndcg_at_k(ranked, users[r]->holdout, 100);
      ++usable;
    }
  }
  return sum / static_cast<double>(usable);
}

Checkpoint TrainSession::best_checkpoint() const {
  return to_checkpoint(best_enc_, best_dec_, cfg_.hyper);
}

TrainResult TrainSession::run(const std::string& checkpoint_path, std::ostream* progress,
                              std::ostream* log_file) {
  TrainResult result;
  result.checkpoint_path = checkpoint_path;
  for (std::size_t e = 0; e < cfg_.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const double objective = run_epoch();
    const double ndcg = validate();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ndcg > best_ndcg_) {
      best_ndcg_ = ndcg;
      best_epoch_ = epoch_;
      best_enc_ = enc_.detached_copy();
      best_dec_ = dec_.detached_copy();
      if (!checkpoint_path.empty()) write_checkpoint(checkpoint_path, best_checkpoint());
    }
    char line[160];
    std::snprintf(line, sizeof(line), "%zu\t%.6f\t%.6f\t%.2f\n", epoch_, objective, ndcg,
                  seconds);
    if (progress) (*progress) << line << std::flush;
    if (log_file) (*log_file) << line << std::flush;
  }
  result.best_ndcg100 = best_ndcg_;
  result.best_epoch = best_epoch_;
  result.epochs_run = epoch_;
  return result;
}

TrainResult train(const InteractionMatrix& matrix, const DatasetSplit& split,
                  const TrainConfig& cfg, const std::string& checkpoint_path,
                  std::ostream* progress, std::ostream* log_file) {
  TrainSession session(matrix, split, cfg);
  return session.run(checkpoint_path, progress, log_file);
}

}  // namespace recvae
