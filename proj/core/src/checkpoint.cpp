#include "recvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace recvae {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'A', 'E'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u16(std::ostream& out, std::uint16_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint16_t get_u16(std::istream& in) {
  std::uint16_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint truncated");
  return v;
}
std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint truncated");
  return v;
}
double get_f64(std::istream& in) {
  double v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint truncated");
  return v;
}
std::string get_string(std::istream& in) {
  const std::uint32_t len = get_u32(in);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw FormatError("checkpoint truncated");
  return s;
}

}  // namespace

double Checkpoint::hyper_value(const std::string& key) const {
  for (const auto& [k, v] : hyper)
    if (k == key) return v;
  throw FormatError("checkpoint is missing hyperparameter '" + key + "'");
}

bool Checkpoint::has_hyper(const std::string& key) const {
  for (const auto& [k, v] : hyper)
    if (k == key) return true;
  return false;
}

const TensorF& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw FormatError("checkpoint is missing tensor '" + name + "'");
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  put_u16(out, kVersion);
  put_string(out, ckpt.kind);
  put_u32(out, static_cast<std::uint32_t>(ckpt.hyper.size()));
  for (const auto& [key, value] : ckpt.hyper) {
    put_string(out, key);
    put_f64(out, value);
  }
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    put_string(out, name);
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(tensor.data().data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("not a checkpoint file (bad magic): " + path);
  const std::uint16_t version = get_u16(in);
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.kind = get_string(in);
  const std::uint32_t n_hyper = get_u32(in);
  for (std::uint32_t i = 0; i < n_hyper; ++i) {
    std::string key = get_string(in);
    const double value = get_f64(in);
    ckpt.hyper.emplace_back(std::move(key), value);
  }
  const std::uint32_t n_tensors = get_u32(in);
  for (std::uint32_t t = 0; t < n_tensors; ++t) {
    std::string name = get_string(in);
    const std::uint32_t rank = get_u32(in);
    if (rank > 2) throw FormatError("checkpoint tensor rank > 2");
    std::vector<std::size_t> shape;
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(get_u32(in));
      count *= shape.back();
    }
    std::vector<float> values(count);
    if (count &&
        !in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(count * sizeof(float))))
      throw FormatError("checkpoint truncated");
    ckpt.tensors.emplace_back(std::move(name), TensorF(std::move(shape), std::move(values)));
  }
  return ckpt;
}

namespace {

std::string layer_name(std::size_t l, const char* part) {
  return "enc.layer" + std::to_string(l) + "." + part;
}

}  // namespace

Checkpoint to_checkpoint(const EncoderParams<float>& enc, const DecoderParams<float>& dec,
                         const HyperParams& hyper) {
  Checkpoint ckpt;
  ckpt.kind = kKindRecVae;
  ckpt.hyper = {
      {"arch", static_cast<double>(static_cast<int>(enc.arch))},
      {"items", static_cast<double>(dec.num_items())},
      {"hidden_dim", static_cast<double>(hyper.hidden_dim)},
      {"latent_dim", static_cast<double>(hyper.latent_dim)},
      {"hidden_layers", static_cast<double>(hyper.hidden_layers)},
      {"gamma", hyper.gamma},
      {"noise_keep", hyper.noise_keep},
      {"prior_w0", hyper.prior_weights[0]},
      {"prior_w1", hyper.prior_weights[1]},
      {"prior_w2", hyper.prior_weights[2]},
      {"wide_logvar", hyper.wide_logvar},
  };
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    ckpt.tensors.emplace_back(layer_name(l, "w"), enc.layers[l].weight->value);
    ckpt.tensors.emplace_back(layer_name(l, "b"), enc.layers[l].bias->value);
  }
  for (std::size_t l = 0; l < enc.ln_gain.size(); ++l) {
    ckpt.tensors.emplace_back("enc.ln" + std::to_string(l) + ".g", enc.ln_gain[l]->value);
    ckpt.tensors.emplace_back("enc.ln" + std::to_string(l) + ".s", enc.ln_shift[l]->value);
  }
  ckpt.tensors.emplace_back("enc.mu.w", enc.mu_head.weight->value);
  ckpt.tensors.emplace_back("enc.mu.b", enc.mu_head.bias->value);
  ckpt.tensors.emplace_back("enc.logvar.w", enc.logvar_head.weight->value);
  ckpt.tensors.emplace_back("enc.logvar.b", enc.logvar_head.bias->value);
  ckpt.tensors.emplace_back("dec.w", dec.weight->value);
  ckpt.tensors.emplace_back("dec.b", dec.bias->value);
  return ckpt;
}

void from_checkpoint(const Checkpoint& ckpt, EncoderParams<float>& enc,
                     DecoderParams<float>& dec, HyperParams& hyper) {
  if (ckpt.kind != kKindRecVae)
    throw FormatError("checkpoint holds a '" + ckpt.kind + "' model, expected recvae");
  hyper.hidden_dim = static_cast<std::size_t>(ckpt.hyper_value("hidden_dim"));
  hyper.latent_dim = static_cast<std::size_t>(ckpt.hyper_value("latent_dim"));
  hyper.hidden_layers = static_cast<std::size_t>(ckpt.hyper_value("hidden_layers"));
  hyper.gamma = ckpt.hyper_value("gamma");
  hyper.noise_keep = ckpt.hyper_value("noise_keep");
  hyper.prior_weights = {ckpt.hyper_value("prior_w0"), ckpt.hyper_value("prior_w1"),
                         ckpt.hyper_value("prior_w2")};
  hyper.wide_logvar = ckpt.hyper_value("wide_logvar");
  const auto arch = static_cast<EncoderArch>(static_cast<int>(ckpt.hyper_value("arch")));
  const auto items = static_cast<std::size_t>(ckpt.hyper_value("items"));

  Rng rng(0);  // shapes come from the checkpoint; values are overwritten
  enc = EncoderParams<float>::init(arch, items, hyper.hidden_dim, hyper.latent_dim,
                                   hyper.hidden_layers, rng);
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    enc.layers[l].weight->value = ckpt.tensor(layer_name(l, "w"));
    enc.layers[l].bias->value = ckpt.tensor(layer_name(l, "b"));
  }
  for (std::size_t l = 0; l < enc.ln_gain.size(); ++l) {
    enc.ln_gain[l]->value = ckpt.tensor("enc.ln" + std::to_string(l) + ".g");
    enc.ln_shift[l]->value = ckpt.tensor("enc.ln" + std::to_string(l) + ".s");
  }
  enc.mu_head.weight->value = ckpt.tensor("enc.mu.w");
  enc.mu_head.bias->value = ckpt.tensor("enc.mu.b");
  enc.logvar_head.weight->value = ckpt.tensor("enc.logvar.w");
  enc.logvar_head.bias->value = ckpt.tensor("enc.logvar.b");

  dec.weight = parameter(ckpt.tensor("dec.w"));
  dec.bias = parameter(ckpt.tensor("dec.b"));
}

Checkpoint to_checkpoint(const EaseModel& model) {
  Checkpoint ckpt;
  ckpt.kind = kKindEase;
  ckpt.hyper = {{"items", static_cast<double>(model.items)}, {"lambda", model.lambda}};
  TensorF weights({model.items, model.items});
  for (std::size_t i = 0; i < model.weights.size(); ++i)
    weights[i] = static_cast<float>(model.weights[i]);
  ckpt.tensors.emplace_back("ease.weights", std::move(weights));
  return ckpt;
}

EaseModel ease_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != kKindEase)
    throw FormatError("checkpoint holds a '" + ckpt.kind + "' model, expected ease");
  EaseModel model;
  model.items = static_cast<std::size_t>(ckpt.hyper_value("items"));
  model.lambda = ckpt.hyper_value("lambda");
  const TensorF& weights = ckpt.tensor("ease.weights");
  model.weights.assign(weights.data().begin(), weights.data().end());
  return model;
}

}  // namespace recvae
