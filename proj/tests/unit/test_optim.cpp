#include <doctest.h>

#include <cmath>
#include <limits>

#include "pinn/optim.hpp"

using namespace pinn::optim;
using doctest::Approx;

TEST_CASE("Adam matches a hand-computed two-step trajectory") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState s(2, cfg);
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g1{0.5, -4.0};
  adam_step(s, p, g1);
  // Step 1: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  CHECK(p[0] == Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));
  CHECK(p[1] == Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-15));

  const std::vector<double> g2{-1.0, 2.0};
  const double before0 = p[0];
  adam_step(s, p, g2);
  const double m = 0.9 * (0.1 * 0.5) + 0.1 * -1.0;
  const double v = 0.999 * (0.001 * 0.25) + 0.001 * 1.0;
  const double m_hat = m / (1.0 - 0.81);
  const double v_hat = v / (1.0 - 0.999 * 0.999);
  CHECK(p[0] == Approx(before0 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-14));
  CHECK(s.step == 2);
}

TEST_CASE("Adam descends a quadratic bowl") {
  AdamConfig cfg;
  cfg.lr = 0.05;
  AdamState s(3, cfg);
  std::vector<double> p{3.0, -1.0, 0.5};
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> g(3);
    for (int k = 0; k < 3; ++k) g[k] = 2.0 * (k + 1) * (p[k] - k);
    adam_step(s, p, g);
  }
  for (int k = 0; k < 3; ++k) CHECK(p[k] == Approx(k).epsilon(1e-3));
}

TEST_CASE("non-finite gradients leave state untouched") {
  AdamState s(2, AdamConfig{});
  std::vector<double> p{1.0, 2.0};
  const std::vector<double> bad{0.1, std::numeric_limits<double>::quiet_NaN()};
  const AdamState before = s;
  try {
    adam_step(s, p, bad);
    FAIL("expected NonFiniteGradientError");
  } catch (const NonFiniteGradientError& e) {
    CHECK(e.index() == 1);
  }
  CHECK(s == before);
  CHECK(p == std::vector<double>{1.0, 2.0});
  CHECK_THROWS_AS(sgd_step(p, bad, 0.1), NonFiniteGradientError);
  CHECK_THROWS_AS(check_finite(std::vector<double>{std::numeric_limits<double>::infinity()}),
                  NonFiniteGradientError);
}

TEST_CASE("SGD") {
  std::vector<double> p{1.0, 2.0};
  sgd_step(p, std::vector<double>{1.0, -1.0}, 0.5);
  CHECK(p == std::vector<double>{0.5, 2.5});
}

TEST_CASE("size mismatch is rejected") {
  AdamState s(2, AdamConfig{});
  std::vector<double> p{1.0};
  CHECK_THROWS(adam_step(s, p, std::vector<double>{1.0}));
}
