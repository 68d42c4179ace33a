#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "recvae/autodiff.hpp"
#include "recvae/rng.hpp"
#include "recvae/tensor.hpp"

namespace recvae {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

// Model-level knobs shared by training, checkpointing and the CLI.
struct HyperParams {
  std::size_t latent_dim = 200;
  std::size_t hidden_dim = 600;
  std::size_t hidden_layers = 5;
  double gamma = 0.005;
  double noise_keep = 0.5;
  std::array<double, 3> prior_weights{3.0 / 20.0, 3.0 / 4.0, 1.0 / 10.0};
  double wide_logvar = 10.0;

  void validate() const {
    if (!(gamma > 0)) throw ShapeError("gamma must be positive");
    if (!(noise_keep > 0 && noise_keep <= 1))
      throw ShapeError("noise keep probability must lie in (0, 1]");
    if (latent_dim == 0 || hidden_dim == 0 || hidden_layers == 0)
      throw ShapeError("model dimensions must be positive");
  }
};

enum class EncoderArch : std::uint8_t {
  dense_swish = 0,  // densely connected blocks, swish + layer norm
  single_tanh = 1,  // one hidden tanh layer
};

template <typename S>
struct Dense {
  NodePtr<S> weight;  // (in x out)
  NodePtr<S> bias;    // (out)
};

namespace detail {

// Fan-scaled uniform weights, zero biases.
template <typename S>
Dense<S> init_dense(std::size_t in, std::size_t out, Rng& rng) {
  Tensor<S> w({in, out});
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = static_cast<S>((2.0 * rng.uniform() - 1.0) * limit);
  return {parameter(std::move(w)), parameter(Tensor<S>({out}))};
}

}  // namespace detail

// Inference network psi_phi. The dense architecture projects the input and
// stacks blocks whose input is the concatenation of the projection and all
// previous hidden outputs; each block is dense -> swish -> layer norm. Both
// output heads read the final hidden state.
template <typename S>
struct EncoderParams {
  EncoderArch arch = EncoderArch::dense_swish;
  std::size_t input_dim = 0, hidden_dim = 0, latent_dim = 0;
  std::vector<Dense<S>> layers;        // layer 0 projects the input
  std::vector<NodePtr<S>> ln_gain, ln_shift;  // per layer, dense arch only
  Dense<S> mu_head, logvar_head;
  S ln_eps = S(1e-5);

  static EncoderParams init(EncoderArch arch, std::size_t input_dim, std::size_t hidden_dim,
                            std::size_t latent_dim, std::size_t hidden_layers, Rng& rng) {
    if (hidden_layers == 0) throw ShapeError("encoder needs at least one hidden layer");
    EncoderParams p;
    p.arch = arch;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.latent_dim = latent_dim;
    const std::size_t n_layers = arch == EncoderArch::single_tanh ? 1 : hidden_layers;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const std::size_t in = l == 0 ? input_dim : l * hidden_dim;
      p.layers.push_back(detail::init_dense<S>(in, hidden_dim, rng));
      if (arch == EncoderArch::dense_swish) {
        p.ln_gain.push_back(parameter(Tensor<S>::full({hidden_dim}, S(1))));
        p.ln_shift.push_back(parameter(Tensor<S>({hidden_dim})));
      }
    }
    p.mu_head = detail::init_dense<S>(hidden_dim, latent_dim, rng);
    p.logvar_head = detail::init_dense<S>(hidden_dim, latent_dim, rng);
    return p;
  }

  std::vector<NodePtr<S>> parameters() const {
    std::vector<NodePtr<S>> out;
    for (const auto& l : layers) {
      out.push_back(l.weight);
      out.push_back(l.bias);
    }
    for (const auto& g : ln_gain) out.push_back(g);
    for (const auto& s : ln_shift) out.push_back(s);
    out.push_back(mu_head.weight);
    out.push_back(mu_head.bias);
    out.push_back(logvar_head.weight);
    out.push_back(logvar_head.bias);
    return out;
  }

  // Frozen copy for the composite prior: same values, no gradient tracking.
  EncoderParams detached_copy() const {
    EncoderParams p;
    p.arch = arch;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.latent_dim = latent_dim;
    p.ln_eps = ln_eps;
    for (const auto& l : layers)
      p.layers.push_back({constant(l.weight->value), constant(l.bias->value)});
    for (const auto& g : ln_gain) p.ln_gain.push_back(constant(g->value));
    for (const auto& s : ln_shift) p.ln_shift.push_back(constant(s->value));
    p.mu_head = {constant(mu_head.weight->value), constant(mu_head.bias->value)};
    p.logvar_head = {constant(logvar_head.weight->value), constant(logvar_head.bias->value)};
    return p;
  }
};

// Linear decoder f_theta(z) = W z + b with W the item-embedding matrix.
template <typename S>
struct DecoderParams {
  NodePtr<S> weight;  // (items x latent)
  NodePtr<S> bias;    // (items)

  static DecoderParams init(std::size_t items, std::size_t latent, Rng& rng) {
    Tensor<S> w({items, latent});
    const double limit = std::sqrt(6.0 / static_cast<double>(items + latent));
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = static_cast<S>((2.0 * rng.uniform() - 1.0) * limit);
    DecoderParams p;
    p.weight = parameter(std::move(w));
    p.bias = parameter(Tensor<S>({items}));
    return p;
  }

  std::size_t num_items() const { return weight->value.rows(); }
  std::size_t latent_dim() const { return weight->value.cols(); }

  std::vector<NodePtr<S>> parameters() const { return {weight, bias}; }

  DecoderParams detached_copy() const {
    return {constant(weight->value), constant(bias->value)};
  }
};

// (mu, logvar) = psi_phi(x). x is (batch x items); in training the caller
// passes the corrupted input, in evaluation the raw one.
template <typename S>
std::pair<NodePtr<S>, NodePtr<S>> encode(const NodePtr<S>& x, const EncoderParams<S>& p) {
  if (x->value.cols() != p.input_dim)
    throw ShapeError("encode: input has " + std::to_string(x->value.cols()) +
                     " columns, expected " + std::to_string(p.input_dim));
  NodePtr<S> last;
  if (p.arch == EncoderArch::single_tanh) {
    last = tanh_node(add(matmul(x, p.layers[0].weight), p.layers[0].bias));
  } else {
    std::vector<NodePtr<S>> hidden;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      NodePtr<S> in = l == 0 ? x : (hidden.size() == 1 ? hidden[0] : concat_cols(hidden));
      NodePtr<S> h = swish(add(matmul(in, p.layers[l].weight), p.layers[l].bias));
      h = layer_norm(h, p.ln_gain[l], p.ln_shift[l], p.ln_eps);
      hidden.push_back(std::move(h));
    }
    last = hidden.back();
  }
  NodePtr<S> mu = add(matmul(last, p.mu_head.weight), p.mu_head.bias);
  NodePtr<S> logvar = add(matmul(last, p.logvar_head.weight), p.logvar_head.bias);
  return {std::move(mu), std::move(logvar)};
}

// Tensor-level convenience for evaluation paths; no gradient buffers.
template <typename S>
std::pair<Tensor<S>, Tensor<S>> encode_eval(const Tensor<S>& x, const EncoderParams<S>& p) {
  NoGradGuard guard;
  auto [mu, logvar] = encode(constant(x), p);
  return {mu->value, logvar->value};
}

// Bernoulli input corruption (the model's dropout layer). Each entry is kept
// with probability keep_prob; kept entries are rescaled by 1/keep_prob unless
// `rescale` is off, which reproduces the bare x (*) m form.
template <typename S>
Tensor<S> corrupt(const Tensor<S>& x, double keep_prob, Rng& rng, bool rescale = true) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw ShapeError("corrupt: keep probability must lie in (0, 1]");
  if (keep_prob == 1.0) return x;
  Tensor<S> out(x.shape());
  const S factor = rescale ? static_cast<S>(1.0 / keep_prob) : S(1);
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = rng.bernoulli(keep_prob) ? x[i] * factor : S(0);
  return out;
}

// z = mu + sigma (*) eps with sigma = exp(logvar / 2).
template <typename S>
NodePtr<S> reparameterize(const NodePtr<S>& mu, const NodePtr<S>& logvar, const Tensor<S>& eps) {
  auto sigma = exp_node(scale(logvar, S(0.5)));
  return add(mu, mul(sigma, constant(eps)));
}

// log softmax(W z + b): per-row log item probabilities.
template <typename S>
NodePtr<S> decode(const NodePtr<S>& z, const DecoderParams<S>& dec) {
  return log_softmax(add(matmul_nt(z, dec.weight), dec.bias));
}

// sum_i x_ui log p_ui, the multinomial log likelihood without its constant.
template <typename S>
NodePtr<S> multinomial_log_likelihood(const Tensor<S>& x, const NodePtr<S>& log_probs) {
  return row_dot_const(log_probs, x);
}

// Per-row log N(z | mu, diag(exp(logvar))).
template <typename S>
NodePtr<S> gaussian_log_density(const NodePtr<S>& z, const NodePtr<S>& mu,
                                const NodePtr<S>& logvar) {
  auto diff = sub(z, mu);
  auto quad = mul(mul(diff, diff), exp_node(scale(logvar, S(-1))));
  auto inner = add_scalar(add(quad, logvar), static_cast<S>(kLog2Pi));
  return scale(row_sum(inner), S(-0.5));
}

// Mixture weights and the frozen encoder snapshot phi_old.
// Components: standard normal, old approximate posterior, wide normal.
template <typename S>
struct CompositePrior {
  std::array<double, 3> weights{3.0 / 20.0, 3.0 / 4.0, 1.0 / 10.0};
  double wide_logvar = 10.0;
  EncoderParams<S> old_params;

  CompositePrior() = default;
  CompositePrior(std::array<double, 3> w, double wide_lv, const EncoderParams<S>& live)
      : weights(w), wide_logvar(wide_lv), old_params(live.detached_copy()) {
    validate();
  }

  void validate() const {
    double sum = 0;
    for (double w : weights) {
      if (w < 0) throw ShapeError("composite prior weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ShapeError("composite prior weights must sum to 1");
  }

  void refresh(const EncoderParams<S>& live) { old_params = live.detached_copy(); }
};

// log p(z | phi_old, x): log-sum-exp over the weighted mixture components.
// The old-posterior component encodes the uncorrupted x (its noising is off
// outside encoder training); zero-weight components are dropped so the
// degenerate mixtures stay exact.
template <typename S>
NodePtr<S> composite_prior_log_density(const NodePtr<S>& z, const Tensor<S>& x,
                                       const CompositePrior<S>& prior) {
  prior.validate();
  const std::size_t n = z->value.rows(), d = z->value.cols();
  std::vector<NodePtr<S>> comps;
  if (prior.weights[0] > 0) {
    auto zeros = constant(Tensor<S>({n, d}));
    auto lp = gaussian_log_density(z, zeros, zeros);
    comps.push_back(add_scalar(lp, static_cast<S>(std::log(prior.weights[0]))));
  }
  if (prior.weights[1] > 0) {
    auto [mu_old, logvar_old] = encode(constant(x), prior.old_params);
    auto lp = gaussian_log_density(z, mu_old, logvar_old);
    comps.push_back(add_scalar(lp, static_cast<S>(std::log(prior.weights[1]))));
  }
  if (prior.weights[2] > 0) {
    auto zeros = constant(Tensor<S>({n, d}));
    auto wide = constant(Tensor<S>::full({n, d}, static_cast<S>(prior.wide_logvar)));
    auto lp = gaussian_log_density(z, zeros, wide);
    comps.push_back(add_scalar(lp, static_cast<S>(std::log(prior.weights[2]))));
  }
  return comps.size() == 1 ? comps[0] : log_sum_exp(comps);
}

// Per-user KL scale. When rescaling is on this is beta'(x_u) = gamma * n_u
// computed on the uncorrupted row; otherwise the fixed Mult-VAE beta.
struct KlWeight {
  bool rescale = true;
  double gamma = 0.005;
  double fixed_beta = 0.2;

  template <typename S>
  Tensor<S> row_weights(const Tensor<S>& x_clean) const {
    const std::size_t n = x_clean.rows(), m = x_clean.cols();
    Tensor<S> w({n});
    for (std::size_t i = 0; i < n; ++i) {
      if (rescale) {
        double count = 0;
        for (std::size_t j = 0; j < m; ++j)
          if (x_clean(i, j) > S(0)) count += 1;
        w[i] = static_cast<S>(gamma * count);
      } else {
        w[i] = static_cast<S>(fixed_beta);
      }
    }
    return w;
  }
};

// beta'(x_u) for a single row.
template <typename S>
double beta_prime(const Tensor<S>& x_row, double gamma) {
  if (!(gamma > 0)) throw ShapeError("beta_prime: gamma must be positive");
  double count = 0;
  for (std::size_t i = 0; i < x_row.size(); ++i)
    if (x_row[i] > S(0)) count += 1;
  return gamma * count;
}

template <typename S>
struct ElboTerms {
  NodePtr<S> mu, logvar, z;
  NodePtr<S> log_likelihood;  // (batch)
  NodePtr<S> kl_sample;       // (batch): log q - log prior at the sampled z
  NodePtr<S> per_user;        // (batch): ll - weight * kl
  NodePtr<S> objective;       // scalar: batch mean
};

// Single-sample empirical bound: the encoder sees the corrupted input, the
// reconstruction always targets the uncorrupted x, and the KL weight is
// computed from the uncorrupted row. eps is supplied by the caller so runs
// are reproducible.
template <typename S>
ElboTerms<S> elbo_estimate(const Tensor<S>& x_clean, const Tensor<S>& x_noisy,
                           const EncoderParams<S>& enc, const DecoderParams<S>& dec,
                           const CompositePrior<S>& prior, const KlWeight& kl_weight,
                           const Tensor<S>& eps) {
  ElboTerms<S> t;
  auto [mu, logvar] = encode(constant(x_noisy), enc);
  t.mu = mu;
  t.logvar = logvar;
  t.z = reparameterize(mu, logvar, eps);
  t.log_likelihood = multinomial_log_likelihood(x_clean, decode(t.z, dec));
  auto log_q = gaussian_log_density(t.z, t.mu, t.logvar);
  auto log_prior = composite_prior_log_density(t.z, x_clean, prior);
  t.kl_sample = sub(log_q, log_prior);
  t.per_user = sub(t.log_likelihood, mul_const(t.kl_sample, kl_weight.row_weights(x_clean)));
  t.objective = mean_all(t.per_user);
  return t;
}

template <typename S>
struct DecoderObjective {
  NodePtr<S> z;
  NodePtr<S> log_likelihood;  // (batch)
  NodePtr<S> objective;       // scalar
};

// L_dec: single-sample log p_theta(x | z) with z encoded from the
// uncorrupted input. The KL term is dropped entirely.
template <typename S>
DecoderObjective<S> decoder_objective(const Tensor<S>& x_clean, const EncoderParams<S>& enc,
                                      const DecoderParams<S>& dec, const Tensor<S>& eps) {
  DecoderObjective<S> t;
  auto [mu, logvar] = encode(constant(x_clean), enc);
  t.z = reparameterize(mu, logvar, eps);
  t.log_likelihood = multinomial_log_likelihood(x_clean, decode(t.z, dec));
  t.objective = mean_all(t.log_likelihood);
  return t;
}

// Scores for ranking: f_theta applied to the posterior mean, no sampling.
// Items already present in the fold-in row are pushed to -inf.
template <typename S>
std::vector<double> predict_scores(std::span<const std::uint32_t> fold_in,
                                   const EncoderParams<S>& enc, const DecoderParams<S>& dec) {
  const std::size_t items = dec.num_items();
  Tensor<S> x({1, items});
  for (std::uint32_t idx : fold_in) x(0, idx) = S(1);
  auto [mu, logvar] = encode_eval(x, enc);
  (void)logvar;
  Tensor<S> logits = matmul_nt(mu, dec.weight->value);
  std::vector<double> scores(items);
  for (std::size_t j = 0; j < items; ++j)
    scores[j] = static_cast<double>(logits(0, j)) + static_cast<double>(dec.bias->value[j]);
  for (std::uint32_t idx : fold_in) scores[idx] = -std::numeric_limits<double>::infinity();
  return scores;
}

}  // namespace recvae
