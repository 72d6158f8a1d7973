#include "pinn/optim.hpp"

#include <cmath>
#include <string>

namespace pinn::optim {

NonFiniteGradientError::NonFiniteGradientError(std::size_t index, double value)
    : Error("non-finite gradient component " + std::to_string(index) + " (" +
            std::to_string(value) + ")"),
      index_(index) {}

void check_finite(std::span<const double> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) throw NonFiniteGradientError(i, grad[i]);
  }
}

namespace {

void check_sizes(std::size_t params, std::size_t grad) {
  if (params != grad) {
    throw Error("parameter and gradient lengths differ (" + std::to_string(params) + " vs " +
                std::to_string(grad) + ")");
  }
}

}  // namespace

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad) {
  check_sizes(params.size(), grad.size());
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error("Adam state sized for " + std::to_string(state.m.size()) +
                " parameters, got " + std::to_string(params.size()));
  }
  check_finite(grad);

  const AdamConfig& c = state.config;
  const auto t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
  ++state.step;
}

void sgd_step(std::span<double> params, std::span<const double> grad, double lr) {
  check_sizes(params.size(), grad.size());
  check_finite(grad);
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

}  // namespace pinn::optim
