// Microbenchmarks for the hot paths of training.

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "pinn/dsl.hpp"
#include "pinn/optim.hpp"
#include "pinn/solver.hpp"

namespace {

using namespace pinn;

solver::Problem burgers(std::vector<std::size_t> hidden) {
  solver::Problem p;
  p.domain.add("x", -1.0, 1.0).add("t", 0.0, 1.0, domain::DimensionKind::kTemporal);
  p.residual = dsl::parse("u_t + u*u_x - (0.01/pi)*u_xx", p.domain);
  p.conditions.push_back(
      conditions::InitialCondition{conditions::ConditionFn::parse("-sin(pi*x)", p.domain), {}, {}});
  p.conditions.push_back(conditions::DirichletBC{"x", domain::Side::kLower, 0.0, {}, {}});
  p.conditions.push_back(conditions::DirichletBC{"x", domain::Side::kUpper, 0.0, {}, {}});
  p.net.input_width = 2;
  p.net.hidden_layers = std::move(hidden);
  return p;
}

solver::CompiledProblem compiled(std::size_t n_r, std::size_t depth) {
  solver::SolverConfig c;
  c.n_r = n_r;
  c.seed = 3;
  return solver::compile(burgers(std::vector<std::size_t>(depth, 20)), c);
}

// Args: collocation points, hidden layers of width 20.
void BM_LossForward(benchmark::State& state) {
  const auto cp = compiled(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(solver::compute_loss(cp, false));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossForward)->Args({1000, 2})->Args({1000, 4})->Args({5000, 4})->Unit(benchmark::kMillisecond);

void BM_LossGradient(benchmark::State& state) {
  const auto cp = compiled(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(solver::compute_loss(cp, true));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossGradient)->Args({1000, 2})->Args({1000, 4})->Args({5000, 4})->Unit(benchmark::kMillisecond);

void BM_FitIteration(benchmark::State& state) {
  auto cp = compiled(2000, 4);
  for (auto _ : state) solver::fit(cp, 1);
}
BENCHMARK(BM_FitIteration)->Unit(benchmark::kMillisecond);

void BM_Compile(benchmark::State& state) {
  const auto p = burgers(std::vector<std::size_t>(static_cast<std::size_t>(state.range(0)), 20));
  solver::SolverConfig c;
  c.n_r = 100;
  for (auto _ : state) benchmark::DoNotOptimize(solver::compile(p, c));
}
BENCHMARK(BM_Compile)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<double> params(n), grad(n);
  for (std::size_t i = 0; i < n; ++i) {
    params[i] = normal(rng);
    grad[i] = normal(rng);
  }
  optim::AdamState s(n, {});
  for (auto _ : state) {
    optim::adam_step(s, params, grad);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AdamStep)->Arg(1341)->Arg(100000);

void BM_ParseResidual(benchmark::State& state) {
  domain::Domain d;
  d.add("x", -1.0, 1.0).add("t", 0.0, 1.0, domain::DimensionKind::kTemporal);
  const std::string text = "u_t + u*u_x - (0.01/pi)*u_xx + exp(-(x^2 + t^2)/4)*sin(pi*x)";
  for (auto _ : state) benchmark::DoNotOptimize(dsl::parse(text, d));
}
BENCHMARK(BM_ParseResidual);

}  // namespace

BENCHMARK_MAIN();
