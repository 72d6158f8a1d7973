#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pinn::testing {

namespace {

constexpr double kPi = std::numbers::pi;

double mc_limiter(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  const double s = a > 0.0 ? 1.0 : -1.0;
  return s * std::min({2.0 * std::abs(a), 2.0 * std::abs(b), 0.5 * std::abs(a + b)});
}

// Exact Riemann flux for f(u) = u^2 / 2.
double godunov(double left, double right) {
  if (left <= right) {
    if (left > 0.0) return 0.5 * left * left;
    if (right < 0.0) return 0.5 * right * right;
    return 0.0;
  }
  return 0.5 * std::max(left * left, right * right);
}

}  // namespace

double heat_exact(double x, double t, double diffusivity) {
  return std::exp(-diffusivity * kPi * kPi * t) * std::sin(kPi * x);
}

BurgersReference::BurgersReference(double nu, std::size_t cells, std::size_t steps)
    : nu_(nu),
      cells_(cells),
      steps_(steps),
      dx_(2.0 / static_cast<double>(cells)),
      dt_(1.0 / static_cast<double>(steps)),
      levels_((steps + 1) * cells) {
  const std::size_t m = cells_;
  std::vector<double> u(m), stage(m), rate(m), padded(m + 4), flux(m + 1);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = -1.0 + (static_cast<double>(i) + 0.5) * dx_;
    u[i] = -std::sin(kPi * x);
  }

  // du/dt for the cell averages in `v`. Ghost cells mirror with a sign flip,
  // which pins u = 0 on both walls.
  auto evaluate = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < m; ++i) padded[i + 2] = v[i];
    padded[1] = -v[0];
    padded[0] = -v[1];
    padded[m + 2] = -v[m - 1];
    padded[m + 3] = -v[m - 2];
    auto slope = [&](std::size_t j) {
      return mc_limiter(padded[j] - padded[j - 1], padded[j + 1] - padded[j]);
    };
    for (std::size_t f = 0; f <= m; ++f) {
      const std::size_t l = f + 1;  // padded index of the cell left of face f
      const double left = padded[l] + 0.5 * slope(l);
      const double right = padded[l + 1] - 0.5 * slope(l + 1);
      flux[f] = godunov(left, right) - nu_ * (padded[l + 1] - padded[l]) / dx_;
    }
    for (std::size_t i = 0; i < m; ++i) rate[i] = -(flux[i + 1] - flux[i]) / dx_;
  };

  std::copy(u.begin(), u.end(), levels_.begin());
  for (std::size_t n = 1; n <= steps_; ++n) {
    evaluate(u);
    for (std::size_t i = 0; i < m; ++i) stage[i] = u[i] + dt_ * rate[i];
    evaluate(stage);
    for (std::size_t i = 0; i < m; ++i) u[i] = 0.5 * (u[i] + stage[i] + dt_ * rate[i]);
    std::copy(u.begin(), u.end(), levels_.begin() + static_cast<std::ptrdiff_t>(n * m));
  }
}

double BurgersReference::at_level(std::size_t level, double x) const {
  const double* row = levels_.data() + level * cells_;
  // Cell centers plus the walls, where u = 0.
  const double s = (x + 1.0) / dx_ - 0.5;
  if (s <= 0.0) {
    const double w = std::clamp(s + 0.5, 0.0, 0.5) / 0.5;
    return w * row[0];
  }
  const double last = static_cast<double>(cells_ - 1);
  if (s >= last) {
    const double w = std::clamp(s - last, 0.0, 0.5) / 0.5;
    return (1.0 - w) * row[cells_ - 1];
  }
  const auto i = static_cast<std::size_t>(s);
  const double w = s - static_cast<double>(i);
  return (1.0 - w) * row[i] + w * row[i + 1];
}

double BurgersReference::operator()(double x, double t) const {
  const double s = std::clamp(t, 0.0, 1.0) / dt_;
  const auto n = std::min(static_cast<std::size_t>(s), steps_);
  if (n == steps_) return at_level(n, x);
  const double w = s - static_cast<double>(n);
  return (1.0 - w) * at_level(n, x) + w * at_level(n + 1, x);
}

double burgers_cole_hopf(double nu, double x, double t) {
  if (t <= 0.0) return -std::sin(kPi * x);
  // eta = 2 sqrt(nu t) z turns the heat kernel into exp(-z^2).
  constexpr int kNodes = 8001;
  constexpr double kRange = 10.0;
  const double scale = 2.0 * std::sqrt(nu * t);
  const double dz = 2.0 * kRange / (kNodes - 1);
  std::vector<double> exponent(kNodes), sine(kNodes);
  double peak = -INFINITY;
  for (int k = 0; k < kNodes; ++k) {
    const double z = -kRange + k * dz;
    const double y = x - scale * z;
    exponent[k] = -std::cos(kPi * y) / (2.0 * kPi * nu) - z * z;
    sine[k] = std::sin(kPi * y);
    peak = std::max(peak, exponent[k]);
  }
  double num = 0.0, den = 0.0;
  for (int k = 0; k < kNodes; ++k) {
    const double w = std::exp(exponent[k] - peak);
    num += sine[k] * w;
    den += w;
  }
  return -num / den;
}

}  // namespace pinn::testing
