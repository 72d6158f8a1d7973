#include <doctest.h>

#include <cmath>
#include <random>

#include "pinn/program.hpp"

using namespace pinn::ad;
using doctest::Approx;

namespace {

constexpr std::size_t L = Program::kLanes;

struct Fixture {
  Graph g;
  Expr x = g.new_var("x", 0.0);
  Expr y = g.new_var("y", 0.0);
  Expr a = g.new_var("a", 0.5);
  Expr b = g.new_var("b", -0.25);
  Expr frozen = g.new_var("c", 1.5);
  // Mixes fused linear chains with every primitive.
  Expr f = tanh(a * x + b * y + frozen) * sin(x) - square(a - y) + exp(b * x) / (2.0 + cos(y)) +
           g.pow_const(x * x + 1.0, 1.5);
  Expr f_x = g.derive(f, x);
};

}  // namespace

TEST_CASE("forward agrees with graph evaluation lane by lane") {
  Fixture fx;
  const std::vector<Expr> outputs{fx.f, fx.f_x};
  const std::vector<Expr> lanes{fx.x, fx.y};
  const std::vector<Expr> shared{fx.a, fx.b};
  const Program program(fx.g, outputs, lanes, shared);
  ProgramRunner runner(program);
  std::vector<double> in(2 * L);
  for (std::size_t l = 0; l < L; ++l) {
    in[l] = -1.0 + 0.25 * static_cast<double>(l);
    in[L + l] = 0.1 * static_cast<double>(l);
  }
  const std::vector<double> sv{0.5, -0.25};
  runner.forward(in, sv);
  for (std::size_t l = 0; l < L; ++l) {
    const std::map<std::string, double> bind{{"x", in[l]}, {"y", in[L + l]}};
    CHECK(runner.output(0, l) == Approx(fx.g.eval(fx.f, bind)).epsilon(1e-14));
    CHECK(runner.output(1, l) == Approx(fx.g.eval(fx.f_x, bind)).epsilon(1e-14));
  }
}

TEST_CASE("backward gives shared and lane adjoints") {
  Fixture fx;
  const std::vector<Expr> outputs{fx.f, fx.f_x};
  const std::vector<Expr> lanes{fx.x, fx.y};
  const std::vector<Expr> shared{fx.a, fx.b};
  const Program program(fx.g, outputs, lanes, shared);
  ProgramRunner runner(program);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> in(2 * L), seeds(2 * L);
  for (double& v : in) v = u(rng);
  for (double& v : seeds) v = u(rng);
  const std::vector<double> sv{0.5, -0.25};

  // Twice, so the second sweep also checks that scratch state is reset.
  for (int round = 0; round < 2; ++round) {
    runner.forward(in, sv);
    std::vector<double> shared_grad(2, 0.0), lane_grad(2 * L, 0.0);
    runner.backward(seeds, shared_grad, lane_grad);

    std::vector<double> expected_shared(2, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
      fx.g.bind(fx.x, in[l]);
      fx.g.bind(fx.y, in[L + l]);
      const Expr weighted = seeds[l] * fx.f + seeds[L + l] * fx.f_x;
      const auto gs = fx.g.derive_many(weighted, shared);
      const auto gl = fx.g.derive_many(weighted, lanes);
      expected_shared[0] += gs[0];
      expected_shared[1] += gs[1];
      CHECK(lane_grad[l] == Approx(gl[0]).epsilon(1e-12));
      CHECK(lane_grad[L + l] == Approx(gl[1]).epsilon(1e-12));
    }
    CHECK(shared_grad[0] == Approx(expected_shared[0]).epsilon(1e-12));
    CHECK(shared_grad[1] == Approx(expected_shared[1]).epsilon(1e-12));
  }
}

TEST_CASE("frozen variables take their binding at construction") {
  Graph g;
  const Expr x = g.new_var("x");
  const Expr c = g.new_var("c", 2.0);
  const Expr f = c * x;
  const std::vector<Expr> out{f}, lanes{x};
  const Program program(g, out, lanes, {});
  g.bind(c, 100.0);
  ProgramRunner runner(program);
  std::vector<double> in(L, 3.0);
  runner.forward(in, {});
  CHECK(runner.output(0, 0) == 6.0);
}

TEST_CASE("construction errors") {
  Graph g, other;
  const Expr x = g.new_var("x");
  const Expr unbound = g.new_var("k");
  const std::vector<Expr> out{x * unbound}, lanes{x};
  CHECK_THROWS_AS(Program(g, out, lanes, {}), UnboundVariableError);
  const std::vector<Expr> not_var{x + 1.0};
  CHECK_THROWS_AS(Program(g, out, not_var, {}), NotAVariableError);
  const std::vector<Expr> foreign{other.new_var("z", 1.0)};
  CHECK_THROWS_AS(Program(g, foreign, {}, {}), ForeignNodeError);
}

TEST_CASE("unreachable inputs contribute zero gradient") {
  Graph g;
  const Expr x = g.new_var("x");
  const Expr w = g.new_var("w", 1.0);
  const Expr unused = g.new_var("unused", 1.0);
  const std::vector<Expr> out{w * x}, lanes{x}, shared{w, unused};
  const Program program(g, out, lanes, shared);
  ProgramRunner runner(program);
  std::vector<double> in(L, 2.0), seeds(L, 1.0), grad(2, 0.0);
  const std::vector<double> sv{1.0, 1.0};
  runner.forward(in, sv);
  runner.backward(seeds, grad);
  CHECK(grad[0] == Approx(2.0 * L));
  CHECK(grad[1] == 0.0);
}
