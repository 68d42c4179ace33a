#include <doctest.h>

#include <cmath>

#include "recvae/autodiff.hpp"
#include "recvae/rng.hpp"
#include "support/oracles.hpp"

using namespace recvae;

namespace {

NodePtr<double> random_param(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return parameter(std::move(t));
}

}  // namespace

TEST_CASE("backward on sum of squares") {
  auto x = parameter(TensorD({2}, {1.0, 2.0}));
  auto loss = sum_all(mul(x, x));
  backward(loss);
  CHECK(x->grad[0] == doctest::Approx(2.0));
  CHECK(x->grad[1] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar losses") {
  auto x = parameter(TensorD({3}, {1, 2, 3}));
  auto y = mul(x, x);
  CHECK_THROWS_AS(backward(y), ShapeError);
}

TEST_CASE("shared subexpressions accumulate path contributions") {
  // loss = sum(s) + sum(s*s) with s = x + x; d/dx = 2 + 8x per entry.
  auto x = parameter(TensorD({2}, {0.5, -1.0}));
  auto s = add(x, x);
  auto loss = add(sum_all(s), sum_all(mul(s, s)));
  backward(loss);
  CHECK(x->grad[0] == doctest::Approx(2.0 + 8.0 * 0.5));
  CHECK(x->grad[1] == doctest::Approx(2.0 + 8.0 * -1.0));
}

TEST_CASE("constants receive no gradient buffers") {
  auto c = constant(TensorD({2}, {1.0, 2.0}));
  auto x = parameter(TensorD({2}, {3.0, 4.0}));
  auto loss = sum_all(mul(c, x));
  backward(loss);
  CHECK(c->grad.size() == 0);
  CHECK(x->grad[0] == doctest::Approx(1.0));
  CHECK(x->grad[1] == doctest::Approx(2.0));
}

TEST_CASE("no-grad scope suppresses tracking") {
  auto x = parameter(TensorD({2}, {1.0, 2.0}));
  NodePtr<double> y;
  {
    NoGradGuard guard;
    y = mul(x, x);
  }
  CHECK_FALSE(y->tracked);
}

// Finite-difference sweep over every differentiable op, composed into a
// scalar via mean_all so gradients stay O(1).
TEST_CASE("finite differences across the op set") {
  Rng rng(42);
  const double tol = 1e-4;

  SUBCASE("matmul") {
    auto a = random_param({3, 4}, rng);
    auto b = random_param({4, 2}, rng);
    auto build = [&] { return mean_all(mul(matmul(a, b), matmul(a, b))); };
    CHECK(oracles::fd_max_rel_error({a, b}, build) < tol);
  }
  SUBCASE("matmul_nt") {
    auto a = random_param({3, 4}, rng);
    auto b = random_param({5, 4}, rng);
    auto build = [&] { return mean_all(mul(matmul_nt(a, b), matmul_nt(a, b))); };
    CHECK(oracles::fd_max_rel_error({a, b}, build) < tol);
  }
  SUBCASE("add with bias broadcast") {
    auto a = random_param({3, 4}, rng);
    auto b = random_param({4}, rng);
    auto build = [&] { return mean_all(mul(add(a, b), add(a, b))); };
    CHECK(oracles::fd_max_rel_error({a, b}, build) < tol);
  }
  SUBCASE("sub, scale, add_scalar") {
    auto a = random_param({2, 3}, rng);
    auto b = random_param({2, 3}, rng);
    auto build = [&] {
      auto y = add_scalar(scale(sub(a, b), 1.7), 0.3);
      return mean_all(mul(y, y));
    };
    CHECK(oracles::fd_max_rel_error({a, b}, build) < tol);
  }
  SUBCASE("exp swish tanh") {
    auto a = random_param({2, 5}, rng, 0.8);
    auto build = [&] { return mean_all(exp_node(scale(swish(tanh_node(a)), 0.5))); };
    CHECK(oracles::fd_max_rel_error({a}, build) < tol);
  }
  SUBCASE("layer_norm") {
    auto a = random_param({3, 6}, rng, 2.0);
    auto g = random_param({6}, rng, 0.5);
    auto s = random_param({6}, rng, 0.5);
    auto build = [&] {
      auto y = layer_norm(a, g, s, 1e-5);
      return mean_all(mul(y, y));
    };
    CHECK(oracles::fd_max_rel_error({a, g, s}, build) < tol);
  }
  SUBCASE("log_softmax") {
    auto a = random_param({3, 5}, rng, 1.5);
    TensorD w({3, 5});
    for (auto& v : w.data()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    auto build = [&] { return mean_all(row_dot_const(log_softmax(a), w)); };
    CHECK(oracles::fd_max_rel_error({a}, build) < tol);
  }
  SUBCASE("concat_cols and row_sum") {
    auto a = random_param({2, 3}, rng);
    auto b = random_param({2, 2}, rng);
    auto build = [&] {
      auto cat = concat_cols<double>({a, b});
      return mean_all(mul(row_sum(cat), row_sum(cat)));
    };
    CHECK(oracles::fd_max_rel_error({a, b}, build) < tol);
  }
  SUBCASE("mul_const and log_sum_exp") {
    auto a = random_param({4}, rng);
    auto b = random_param({4}, rng);
    TensorD w({4}, {0.3, 1.4, -0.8, 2.0});
    auto build = [&] { return mean_all(log_sum_exp<double>({a, mul_const(b, w)})); };
    CHECK(oracles::fd_max_rel_error({a, b}, build) < tol);
  }
}

TEST_CASE("log_sum_exp matches direct evaluation") {
  auto a = constant(TensorD({3}, {-1.0, 0.0, 2.0}));
  auto b = constant(TensorD({3}, {0.5, -2.0, 1.0}));
  auto out = log_sum_exp<double>({a, b});
  for (std::size_t i = 0; i < 3; ++i) {
    const double expect = std::log(std::exp(a->value[i]) + std::exp(b->value[i]));
    CHECK(out->value[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}
