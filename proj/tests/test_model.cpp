#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "recvae/model.hpp"
#include "support/oracles.hpp"

using namespace recvae;

namespace {

struct Fixture {
  std::size_t items = 10, hidden = 8, latent = 4;
  EncoderParams<double> enc;
  DecoderParams<double> dec;
  Rng rng{12345};

  Fixture() {
    enc = EncoderParams<double>::init(EncoderArch::dense_swish, items, hidden, latent, 2, rng);
    dec = DecoderParams<double>::init(items, latent, rng);
  }

  TensorD random_batch(std::size_t n, double density = 0.4) {
    TensorD x({n, items});
    for (auto& v : x.data()) v = rng.uniform() < density ? 1.0 : 0.0;
    return x;
  }
};

std::vector<std::size_t> order_of(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

}  // namespace

TEST_CASE("encode shape contract and purity") {
  Fixture f;
  TensorD x = f.random_batch(3);
  auto [mu1, logvar1] = encode_eval(x, f.enc);
  CHECK(mu1.rows() == 3);
  CHECK(mu1.cols() == f.latent);
  CHECK(logvar1.cols() == f.latent);
  CHECK(mu1.all_finite());
  CHECK(logvar1.all_finite());

  auto [mu2, logvar2] = encode_eval(x, f.enc);
  for (std::size_t i = 0; i < mu1.size(); ++i) CHECK(mu1[i] == mu2[i]);
  for (std::size_t i = 0; i < logvar1.size(); ++i) CHECK(logvar1[i] == logvar2[i]);

  TensorD bad({2, f.items + 1});
  CHECK_THROWS_AS(encode(constant(bad), f.enc), ShapeError);
}

TEST_CASE("identical rows embed identically") {
  Fixture f;
  TensorD x({2, f.items});
  for (std::size_t j : {1, 4, 7}) {
    x(0, j) = 1.0;
    x(1, j) = 1.0;
  }
  auto [mu, logvar] = encode_eval(x, f.enc);
  for (std::size_t j = 0; j < f.latent; ++j) {
    CHECK(mu(0, j) == mu(1, j));
    CHECK(logvar(0, j) == logvar(1, j));
  }
}

TEST_CASE("single tanh architecture also runs") {
  Rng rng(5);
  auto enc = EncoderParams<double>::init(EncoderArch::single_tanh, 10, 8, 4, 3, rng);
  CHECK(enc.layers.size() == 1);  // depth is fixed for the plain architecture
  TensorD x({1, 10});
  x(0, 2) = 1.0;
  auto [mu, logvar] = encode_eval(x, enc);
  CHECK(mu.all_finite());
  CHECK(logvar.all_finite());
}

TEST_CASE("corrupt") {
  Rng rng(77);
  SUBCASE("keep probability one is the identity") {
    TensorD x({1, 5}, {1, 0, 1, 1, 0});
    const TensorD out = corrupt(x, 1.0, rng);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == x[i]);
  }
  SUBCASE("zero input stays zero") {
    TensorD x({2, 4});
    const TensorD out = corrupt(x, 0.5, rng);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == 0.0);
  }
  SUBCASE("kept entries are rescaled by the inverse keep probability") {
    TensorD x({1, 2000});
    x.fill(1.0);
    const TensorD out = corrupt(x, 0.25, rng);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK((out[i] == 0.0 || out[i] == 4.0));
    const TensorD bare = corrupt(x, 0.25, rng, /*rescale=*/false);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK((bare[i] == 0.0 || bare[i] == 1.0));
  }
  SUBCASE("kept count concentrates around keep * n") {
    // 10,000 Bernoulli(0.3) draws; allow 3 standard deviations.
    const std::size_t n = 10000;
    const double keep = 0.3;
    TensorD x({1, n});
    x.fill(1.0);
    const TensorD out = corrupt(x, keep, rng);
    double kept = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (out[i] != 0.0) kept += 1;
    const double sigma = std::sqrt(n * keep * (1 - keep));
    CHECK(std::abs(kept - keep * n) < 3 * sigma);
  }
  SUBCASE("invalid keep probability") {
    TensorD x({1, 2});
    CHECK_THROWS_AS(corrupt(x, 0.0, rng), ShapeError);
  }
}

TEST_CASE("decode") {
  Fixture f;
  SUBCASE("zero weights give the uniform distribution") {
    DecoderParams<double> zero_dec{parameter(TensorD({f.items, f.latent})),
                                   parameter(TensorD({f.items}))};
    auto z = constant(TensorD({1, f.latent}, {0.3, -0.2, 0.9, 0.0}));
    auto lp = decode(z, zero_dec);
    for (std::size_t j = 0; j < f.items; ++j)
      CHECK(lp->value(0, j) == doctest::Approx(std::log(1.0 / f.items)).epsilon(1e-12));
  }
  SUBCASE("probabilities sum to one and order matches the logits") {
    TensorD zt({1, f.latent});
    for (auto& v : zt.data()) v = f.rng.normal();
    auto z = constant(zt);
    auto lp = decode(z, f.dec);
    double sum = 0;
    for (std::size_t j = 0; j < f.items; ++j) sum += std::exp(lp->value(0, j));
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

    TensorD logits = matmul_nt(zt, f.dec.weight->value);
    for (std::size_t j = 0; j < f.items; ++j) logits[j] += f.dec.bias->value[j];
    CHECK(order_of(lp->value.data()) == order_of(logits.data()));
  }
  SUBCASE("matches the log softmax reference") {
    TensorD zt({1, f.latent});
    for (auto& v : zt.data()) v = f.rng.normal();
    auto lp = decode(constant(zt), f.dec);
    TensorD logits = matmul_nt(zt, f.dec.weight->value);
    std::vector<double> raw(f.items);
    for (std::size_t j = 0; j < f.items; ++j) raw[j] = logits[j] + f.dec.bias->value[j];
    const auto ref = oracles::log_softmax_reference(raw);
    for (std::size_t j = 0; j < f.items; ++j) CHECK(std::abs(lp->value(0, j) - ref[j]) < 1e-6);
  }
}

TEST_CASE("multinomial log likelihood") {
  Fixture f;
  SUBCASE("zero feedback scores zero") {
    TensorD x({1, f.items});
    auto lp = decode(constant(TensorD({1, f.latent})), f.dec);
    auto ll = multinomial_log_likelihood(x, lp);
    CHECK(ll->value[0] == 0.0);
  }
  SUBCASE("single positive item picks its log probability") {
    TensorD x({1, f.items});
    x(0, 3) = 1.0;
    TensorD zt({1, f.latent}, {0.1, 0.2, -0.4, 0.8});
    auto lp = decode(constant(zt), f.dec);
    auto ll = multinomial_log_likelihood(x, lp);
    CHECK(ll->value[0] == doctest::Approx(lp->value(0, 3)).epsilon(1e-14));
  }
  SUBCASE("uniform probabilities give count * log(1/n)") {
    DecoderParams<double> zero_dec{parameter(TensorD({f.items, f.latent})),
                                   parameter(TensorD({f.items}))};
    TensorD x = f.random_batch(4);
    auto lp = decode(constant(TensorD({4, f.latent})), zero_dec);
    auto ll = multinomial_log_likelihood(x, lp);
    for (std::size_t r = 0; r < 4; ++r) {
      double count = 0;
      for (std::size_t j = 0; j < f.items; ++j) count += x(r, j);
      CHECK(ll->value[r] == doctest::Approx(count * std::log(1.0 / f.items)).epsilon(1e-12));
    }
  }
}

TEST_CASE("gaussian log density") {
  SUBCASE("standard normal at the mode, two dimensions") {
    auto z = constant(TensorD({1, 2}));
    auto mu = constant(TensorD({1, 2}));
    auto logvar = constant(TensorD({1, 2}));
    auto lp = gaussian_log_density(z, mu, logvar);
    CHECK(lp->value[0] == doctest::Approx(-kLog2Pi).epsilon(1e-12));
  }
  SUBCASE("maximized at the mean") {
    auto mu = constant(TensorD({1, 3}, {0.5, -1.0, 2.0}));
    auto logvar = constant(TensorD({1, 3}, {0.1, -0.3, 0.4}));
    auto at_mean = gaussian_log_density(constant(mu->value), mu, logvar);
    Rng rng(9);
    for (int t = 0; t < 50; ++t) {
      TensorD zt({1, 3});
      for (std::size_t j = 0; j < 3; ++j) zt(0, j) = mu->value[j] + rng.normal();
      auto lp = gaussian_log_density(constant(zt), mu, logvar);
      CHECK(lp->value[0] <= at_mean->value[0] + 1e-12);
    }
  }
  SUBCASE("matches the extended-precision reference") {
    Rng rng(31);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> z(5), mu(5), logvar(5);
      for (std::size_t j = 0; j < 5; ++j) {
        z[j] = 2.0 * rng.normal();
        mu[j] = rng.normal();
        logvar[j] = rng.normal();
      }
      auto lp = gaussian_log_density(constant(TensorD({1, 5}, z)),
                                     constant(TensorD({1, 5}, mu)),
                                     constant(TensorD({1, 5}, logvar)));
      CHECK(std::abs(lp->value[0] - oracles::gaussian_logpdf_reference(z, mu, logvar)) < 1e-10);
    }
  }
}

TEST_CASE("composite prior") {
  Fixture f;
  TensorD x = f.random_batch(3);
  TensorD zt({3, f.latent});
  for (auto& v : zt.data()) v = f.rng.normal();
  auto z = constant(zt);

  SUBCASE("degenerate standard-normal mixture") {
    CompositePrior<double> prior({1, 0, 0}, 10.0, f.enc);
    auto lp = composite_prior_log_density(z, x, prior);
    auto ref = gaussian_log_density(z, constant(TensorD({3, f.latent})),
                                    constant(TensorD({3, f.latent})));
    for (std::size_t r = 0; r < 3; ++r) CHECK(lp->value[r] == ref->value[r]);
  }
  SUBCASE("degenerate old-posterior mixture") {
    CompositePrior<double> prior({0, 1, 0}, 10.0, f.enc);
    auto lp = composite_prior_log_density(z, x, prior);
    auto [mu_old, logvar_old] = encode_eval(x, prior.old_params);
    auto ref = gaussian_log_density(z, constant(mu_old), constant(logvar_old));
    for (std::size_t r = 0; r < 3; ++r) CHECK(lp->value[r] == ref->value[r]);
  }
  SUBCASE("mixture dominates its weighted standard-normal component") {
    CompositePrior<double> prior({0.15, 0.75, 0.10}, 10.0, f.enc);
    auto lp = composite_prior_log_density(z, x, prior);
    auto stdn = gaussian_log_density(z, constant(TensorD({3, f.latent})),
                                     constant(TensorD({3, f.latent})));
    for (std::size_t r = 0; r < 3; ++r)
      CHECK(lp->value[r] >= std::log(0.15) + stdn->value[r] - 1e-12);
  }
  SUBCASE("invalid weights are rejected") {
    CHECK_THROWS_AS(CompositePrior<double>({0.5, 0.2, 0.1}, 10.0, f.enc), ShapeError);
  }
}

TEST_CASE("beta prime") {
  TensorD x({1, 300});
  for (std::size_t j = 0; j < 200; ++j) x(0, j) = 1.0;
  CHECK(beta_prime(x, 0.005) == doctest::Approx(1.0).epsilon(1e-12));

  TensorD zero({1, 300});
  CHECK(beta_prime(zero, 0.005) == 0.0);

  TensorD twice({1, 300});
  for (std::size_t j = 0; j < 80; ++j) twice(0, j) = 1.0;
  TensorD once({1, 300});
  for (std::size_t j = 0; j < 40; ++j) once(0, j) = 1.0;
  CHECK(beta_prime(twice, 0.01) == doctest::Approx(2.0 * beta_prime(once, 0.01)));

  CHECK_THROWS_AS(beta_prime(x, 0.0), ShapeError);
}

TEST_CASE("kl weight rows use the uncorrupted feedback") {
  KlWeight w{true, 0.01, 0.2};
  TensorD x({2, 6}, {1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0});
  const TensorD rows = w.row_weights(x);
  CHECK(rows[0] == doctest::Approx(0.03));
  CHECK(rows[1] == doctest::Approx(0.01));

  KlWeight fixed{false, 0.01, 0.2};
  const TensorD frows = fixed.row_weights(x);
  CHECK(frows[0] == doctest::Approx(0.2));
  CHECK(frows[1] == doctest::Approx(0.2));
}

TEST_CASE("elbo estimate") {
  Fixture f;
  TensorD x = f.random_batch(3);
  Rng noise(5);
  TensorD eps({3, f.latent});
  for (auto& v : eps.data()) v = noise.normal();

  SUBCASE("vanishing KL weight reduces to the log likelihood") {
    CompositePrior<double> prior({1, 0, 0}, 10.0, f.enc);
    KlWeight kl{true, 0.0, 0.2};  // gamma -> 0
    auto t = elbo_estimate(x, x, f.enc, f.dec, prior, kl, eps);
    for (std::size_t r = 0; r < 3; ++r)
      CHECK(t.per_user->value[r] == doctest::Approx(t.log_likelihood->value[r]).epsilon(1e-14));
  }
  SUBCASE("self prior cancels the KL sample exactly") {
    // Old posterior only, snapshot equal to the live encoder, no noising:
    // log q and log prior run the same arithmetic, so the difference is 0.
    CompositePrior<double> prior({0, 1, 0}, 10.0, f.enc);
    KlWeight kl{true, 0.005, 0.2};
    auto t = elbo_estimate(x, x, f.enc, f.dec, prior, kl, eps);
    for (std::size_t r = 0; r < 3; ++r) CHECK(t.kl_sample->value[r] == 0.0);
  }
  SUBCASE("Monte-Carlo KL matches the analytic value under the standard prior") {
    CompositePrior<double> prior({1, 0, 0}, 10.0, f.enc);
    KlWeight kl{true, 0.005, 0.2};
    auto [mu, logvar] = encode_eval(x, f.enc);

    double analytic = 0;
    for (std::size_t r = 0; r < 3; ++r) {
      std::vector<double> mu_r(f.latent), lv_r(f.latent);
      for (std::size_t j = 0; j < f.latent; ++j) {
        mu_r[j] = mu(r, j);
        lv_r[j] = logvar(r, j);
      }
      analytic += oracles::gaussian_kl_reference(mu_r, lv_r);
    }
    analytic /= 3.0;

    Rng mc(99);
    const int draws = 20000;
    double acc = 0, acc_sq = 0;
    for (int d = 0; d < draws; ++d) {
      TensorD e({3, f.latent});
      for (auto& v : e.data()) v = mc.normal();
      auto t = elbo_estimate(x, x, f.enc, f.dec, prior, kl, e);
      double mean_kl = 0;
      for (std::size_t r = 0; r < 3; ++r) mean_kl += t.kl_sample->value[r];
      acc += mean_kl / 3.0;
      acc_sq += (mean_kl / 3.0) * (mean_kl / 3.0);
    }
    acc /= draws;
    acc_sq /= draws;
    CHECK(std::abs(acc - analytic) / std::abs(analytic) < 0.03);

    // KL against the standard normal is non-negative up to sampling noise.
    const double stderr_mean = std::sqrt((acc_sq - acc * acc) / draws);
    CHECK(acc > -3.0 * stderr_mean);
  }
}

TEST_CASE("decoder objective") {
  Fixture f;
  TensorD x = f.random_batch(2);
  Rng noise(8);
  TensorD eps({2, f.latent});
  for (auto& v : eps.data()) v = noise.normal();

  SUBCASE("matches the elbo reconstruction term on clean input") {
    CompositePrior<double> prior({1, 0, 0}, 10.0, f.enc);
    KlWeight kl{true, 0.005, 0.2};
    auto dec_t = decoder_objective(x, f.enc, f.dec, eps);
    auto elbo_t = elbo_estimate(x, x, f.enc, f.dec, prior, kl, eps);
    for (std::size_t r = 0; r < 2; ++r)
      CHECK(dec_t.log_likelihood->value[r] == elbo_t.log_likelihood->value[r]);
  }
  SUBCASE("no gradient reaches the prior snapshot") {
    CompositePrior<double> prior({0.15, 0.75, 0.10}, 10.0, f.enc);
    KlWeight kl{true, 0.005, 0.2};
    auto t = elbo_estimate(x, x, f.enc, f.dec, prior, kl, eps);
    backward(scale(t.objective, -1.0));
    for (const auto& p : prior.old_params.parameters()) {
      CHECK_FALSE(p->tracked);
      CHECK(p->grad.size() == 0);
    }
    for (const auto& p : f.enc.parameters()) p->zero_grad();
    for (const auto& p : f.dec.parameters()) p->zero_grad();
  }
  SUBCASE("theta gradients pass finite differences") {
    auto build = [&] { return decoder_objective(x, f.enc, f.dec, eps).objective; };
    CHECK(oracles::fd_max_rel_error({f.dec.weight, f.dec.bias}, build) < 1e-4);
  }
}

TEST_CASE("predict scores") {
  Fixture f;
  const std::vector<std::uint32_t> fold_in{1, 4, 7};
  const auto s1 = predict_scores<double>(fold_in, f.enc, f.dec);
  const auto s2 = predict_scores<double>(fold_in, f.enc, f.dec);
  CHECK(s1 == s2);
  for (std::uint32_t idx : fold_in)
    CHECK(s1[idx] == -std::numeric_limits<double>::infinity());

  // Order of the remaining items equals the decode order for the same mean.
  TensorD x({1, f.items});
  for (std::uint32_t idx : fold_in) x(0, idx) = 1.0;
  auto [mu, logvar] = encode_eval(x, f.enc);
  auto lp = decode(constant(mu), f.dec);
  std::vector<double> masked(f.items);
  for (std::size_t j = 0; j < f.items; ++j) masked[j] = lp->value(0, j);
  for (std::uint32_t idx : fold_in) masked[idx] = -std::numeric_limits<double>::infinity();
  CHECK(order_of(s1) == order_of(masked));
}
