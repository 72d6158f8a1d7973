#pragma once

// First-order optimizers. Each step is a pure function of its inputs.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pinn/error.hpp"

namespace pinn::optim {

class NonFiniteGradientError : public Error {
 public:
  NonFiniteGradientError(std::size_t index, double value);
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : config(cfg), m(n, 0.0), v(n, 0.0) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// params -= lr * m_hat / (sqrt(v_hat) + eps), with bias-corrected moments.
/// Throws NonFiniteGradientError (state and params untouched) on NaN/inf.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

/// params -= lr * grad.
void sgd_step(std::span<double> params, std::span<const double> grad, double lr);

/// Throws NonFiniteGradientError at the first non-finite entry.
void check_finite(std::span<const double> grad);

}  // namespace pinn::optim
