#pragma once

#include <array>
#include <string>
#include <vector>

#include "recvae/model.hpp"

namespace recvae {

// Feature toggles for the ablation study. All off reproduces Mult-VAE;
// all on is the full model.
struct AblationFlags {
  bool new_architecture = true;
  bool composite_prior = true;
  bool beta_rescaling = true;
  bool alternating_training = true;
  bool decoder_without_denoising = true;

  static AblationFlags all_off() { return {false, false, false, false, false}; }
  static AblationFlags all_on() { return {}; }

  bool operator==(const AblationFlags&) const = default;
};

// Concrete model/training settings implied by a flag subset.
struct ResolvedAblation {
  EncoderArch arch = EncoderArch::dense_swish;
  std::array<double, 3> prior_weights{};  // (1,0,0) when the composite prior is off
  KlWeight kl;
  bool joint_updates = false;       // true when alternating training is off
  bool decoder_clean_input = true;  // false when the decoder also sees noise
};

ResolvedAblation configure_ablation(const AblationFlags& flags, const HyperParams& hyper,
                                    double fixed_beta);

// The standard feature-subset rows evaluated by the ablation command, from
// all-off through the full model.
std::vector<AblationFlags> ablation_table_rows();

// Tab-separated table <arch prior rescale alt dec_clean ndcg@100>; parses
// back losslessly.
std::string format_ablation_table(const std::vector<AblationFlags>& rows,
                                  const std::vector<double>& ndcg);
std::vector<std::pair<AblationFlags, double>> parse_ablation_table(const std::string& text);

}  // namespace recvae
