#pragma once

// Independent reference solutions used as test oracles.

#include <cstddef>
#include <vector>

namespace pinn::testing {

/// e^{-D pi^2 t} sin(pi x): heat equation u_t = D u_xx on x in [0,1] with
/// u(x,0) = sin(pi x) and homogeneous Dirichlet boundaries.
double heat_exact(double x, double t, double diffusivity = 1.0);

/// Viscous Burgers u_t + u u_x = nu u_xx on x in [-1,1], t in [0,1],
/// u(x,0) = -sin(pi x), u(+-1,t) = 0.
///
/// Finite volumes: MUSCL reconstruction with an MC limiter, Godunov flux for
/// the convection, central differences for the diffusion, SSP-RK2 in time.
/// Every time level is stored; values in between are bilinear.
class BurgersReference {
 public:
  BurgersReference(double nu, std::size_t cells, std::size_t steps);

  double operator()(double x, double t) const;
  std::size_t cells() const noexcept { return cells_; }
  std::size_t steps() const noexcept { return steps_; }

 private:
  double at_level(std::size_t level, double x) const;

  double nu_;
  std::size_t cells_;
  std::size_t steps_;
  double dx_;
  double dt_;
  std::vector<double> levels_;  // (steps + 1) x cells
};

/// Cole-Hopf closed form of the same Burgers problem, by quadrature.
double burgers_cole_hopf(double nu, double x, double t);

}  // namespace pinn::testing
