#pragma once

#include <cmath>
#include <cstddef>

#include "recvae/tensor.hpp"

namespace recvae {

// Bias-corrected Adam. One state per parameter tensor; the step count
// increases by exactly one per update.
template <typename S>
struct AdamState {
  std::size_t step = 0;
  Tensor<S> m, v;
  S learning_rate;
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S epsilon = S(1e-8);

  AdamState(const Tensor<S>& param, S lr)
      : m(param.shape()), v(param.shape()), learning_rate(lr) {}
};

template <typename S>
void adam_step(Tensor<S>& param, const Tensor<S>& grad, AdamState<S>& state) {
  if (!param.same_shape(grad) || !param.same_shape(state.m))
    throw ShapeError("adam_step: parameter/gradient/state shapes differ");
  state.step += 1;
  const S b1 = state.beta1, b2 = state.beta2;
  const S corr1 = S(1) - static_cast<S>(std::pow(static_cast<double>(b1), state.step));
  const S corr2 = S(1) - static_cast<S>(std::pow(static_cast<double>(b2), state.step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const S g = grad[i];
    state.m[i] = b1 * state.m[i] + (S(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (S(1) - b2) * g * g;
    const S mhat = state.m[i] / corr1;
    const S vhat = state.v[i] / corr2;
    param[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

}  // namespace recvae
