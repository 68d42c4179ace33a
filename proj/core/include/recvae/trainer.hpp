#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "recvae/ablation.hpp"
#include "recvae/adam.hpp"
#include "recvae/checkpoint.hpp"
#include "recvae/model.hpp"
#include "recvae/split.hpp"

namespace recvae {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 500;
  double learning_rate = 5e-4;
  std::size_t enc_dec_ratio = 3;    // encoder steps per decoder step
  std::size_t dec_steps = 0;        // 0: one pass over the training users
  std::uint64_t seed = 1;
  HyperParams hyper;
  AblationFlags flags;              // all on = full model
  double fixed_beta = 0.2;          // used when beta rescaling is off
  bool noise_rescale = true;        // kept entries scaled by 1/keep_prob

  void validate() const;
};

struct TrainResult {
  double best_ndcg100 = -1;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::string checkpoint_path;  // empty if no checkpoint was requested
};

// Alternating encoder/decoder training with a per-epoch prior-snapshot
// refresh. Single-threaded and bit-reproducible for a fixed seed.
class TrainSession {
 public:
  TrainSession(const InteractionMatrix& matrix, const DatasetSplit& split, TrainConfig cfg);

  // Warm start from a previously saved model (fine-tuning).
  void load_parameters(const Checkpoint& ckpt);

  // One full epoch; returns the mean step objective.
  double run_epoch();

  // Phase-level entry points, exposed for tests of the update schedule.
  double encoder_phase();
  double decoder_phase();
  double joint_phase();
  void refresh_prior();

  // Mean NDCG@100 over usable validation users with the current parameters.
  double validate() const;

  // Full run: epochs, per-epoch progress lines (epoch, mean objective,
  // validation NDCG@100, seconds), best-checkpoint retention.
  TrainResult run(const std::string& checkpoint_path, std::ostream* progress,
                  std::ostream* log_file);

  const EncoderParams<float>& encoder() const { return enc_; }
  const DecoderParams<float>& decoder() const { return dec_; }
  const CompositePrior<float>& prior() const { return prior_; }
  const EncoderParams<float>& best_encoder() const { return best_enc_; }
  const DecoderParams<float>& best_decoder() const { return best_dec_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t dec_steps() const { return dec_steps_; }
  std::size_t enc_steps() const { return enc_steps_; }

  Checkpoint best_checkpoint() const;

 private:
  std::vector<std::uint32_t> next_batch();
  Tensor<float> dense_batch(const std::vector<std::uint32_t>& users) const;
  Tensor<float> draw_eps(std::size_t n);
  double step_encoder();
  double step_decoder();
  double step_joint();
  void apply_updates(const std::vector<NodePtr<float>>& params,
                     std::vector<AdamState<float>>& states);
  void zero_all_grads();
  void check_finite(double objective, const char* phase, std::size_t step) const;

  const InteractionMatrix& matrix_;
  const DatasetSplit& split_;
  TrainConfig cfg_;
  ResolvedAblation resolved_;
  KlWeight kl_;
  EncoderParams<float> enc_;
  DecoderParams<float> dec_;
  CompositePrior<float> prior_;
  EncoderParams<float> best_enc_;
  DecoderParams<float> best_dec_;
  std::vector<AdamState<float>> enc_adam_, dec_adam_;
  Rng rng_;
  std::vector<std::uint32_t> pool_;  // shuffled training users
  std::size_t pool_pos_ = 0;
  std::size_t enc_steps_ = 0, dec_steps_ = 0;
  std::size_t epoch_ = 0;
  double best_ndcg_ = -1;
  std::size_t best_epoch_ = 0;
};

// Convenience wrapper over TrainSession::run.
TrainResult train(const InteractionMatrix& matrix, const DatasetSplit& split,
                  const TrainConfig& cfg, const std::string& checkpoint_path,
                  std::ostream* progress = nullptr, std::ostream* log_file = nullptr);

}  // namespace recvae
