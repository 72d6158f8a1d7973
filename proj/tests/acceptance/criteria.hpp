#pragma once

#include <string>

namespace pinn::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome gradient_oracle();
Outcome nested_derivatives();
Outcome heat_forward();
Outcome burgers_forward();
Outcome inverse_recovery();
Outcome self_adaptive_sign();
Outcome worker_invariance();
Outcome dsl_conformance();
Outcome persistence();

}  // namespace pinn::acceptance
