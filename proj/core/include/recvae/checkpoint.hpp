#pragma once

#include <string>
#include <utility>
#include <vector>

#include "recvae/ease.hpp"
#include "recvae/model.hpp"

namespace recvae {

// Persisted model container, little-endian:
//   magic "RVAE", format version u16, model-kind tag (length-prefixed string),
//   hyperparameter block (u32 count of key/f64-value pairs),
//   u32 tensor count, then named tensors:
//     u32 name length + UTF-8 name, u32 rank, u32 dims, 32-bit float data.
// Writing preserves insertion order, so save -> load -> save is bit-exact.
struct Checkpoint {
  std::string kind;
  std::vector<std::pair<std::string, double>> hyper;
  std::vector<std::pair<std::string, TensorF>> tensors;

  double hyper_value(const std::string& key) const;
  bool has_hyper(const std::string& key) const;
  const TensorF& tensor(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

inline constexpr const char* kKindRecVae = "recvae";
inline constexpr const char* kKindEase = "ease";

Checkpoint to_checkpoint(const EncoderParams<float>& enc, const DecoderParams<float>& dec,
                         const HyperParams& hyper);
void from_checkpoint(const Checkpoint& ckpt, EncoderParams<float>& enc,
                     DecoderParams<float>& dec, HyperParams& hyper);

Checkpoint to_checkpoint(const EaseModel& model);
EaseModel ease_from_checkpoint(const Checkpoint& ckpt);

}  // namespace recvae
