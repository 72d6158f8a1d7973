#include "problems.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace pinn::testing {

domain::Domain heat_domain(double t_end) {
  domain::Domain d;
  d.add("x", 0.0, 1.0).add("t", 0.0, t_end, domain::DimensionKind::kTemporal);
  return d;
}

solver::Problem heat_problem(std::vector<std::size_t> hidden, double diffusivity,
                             bool learn_diffusivity, double initial_guess) {
  solver::Problem p;
  p.domain = heat_domain();
  if (learn_diffusivity) {
    p.params.add("D", initial_guess);
    const std::vector<std::string> names{"D"};
    p.residual = dsl::parse("u_t - D*u_xx", p.domain, names);
  } else {
    std::ostringstream text;
    text.precision(17);
    text << "u_t - " << diffusivity << "*u_xx";
    p.residual = dsl::parse(text.str(), p.domain);
  }
  p.conditions.push_back(
      conditions::InitialCondition{conditions::ConditionFn::parse("sin(pi*x)", p.domain), {}, {}});
  p.conditions.push_back(conditions::DirichletBC{"x", domain::Side::kLower, 0.0, {}, {}});
  p.conditions.push_back(conditions::DirichletBC{"x", domain::Side::kUpper, 0.0, {}, {}});
  p.net.input_width = 2;
  p.net.hidden_layers = std::move(hidden);
  return p;
}

domain::Domain burgers_domain() {
  domain::Domain d;
  d.add("x", -1.0, 1.0).add("t", 0.0, 1.0, domain::DimensionKind::kTemporal);
  return d;
}

solver::Problem burgers_problem(std::vector<std::size_t> hidden, double nu) {
  solver::Problem p;
  p.domain = burgers_domain();
  std::ostringstream text;
  text.precision(17);
  text << "u_t + u*u_x - " << nu << "*u_xx";
  p.residual = dsl::parse(text.str(), p.domain);
  p.conditions.push_back(
      conditions::InitialCondition{conditions::ConditionFn::parse("-sin(pi*x)", p.domain), {}, {}});
  p.conditions.push_back(conditions::DirichletBC{"x", domain::Side::kLower, 0.0, {}, {}});
  p.conditions.push_back(conditions::DirichletBC{"x", domain::Side::kUpper, 0.0, {}, {}});
  p.net.input_width = 2;
  p.net.hidden_layers = std::move(hidden);
  return p;
}

double relative_l2(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace pinn::testing
