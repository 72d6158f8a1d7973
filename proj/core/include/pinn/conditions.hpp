#pragma once

// Initial and boundary conditions. Each condition samples its own points and
// reduces to a list of squared-mismatch terms for the composite loss.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pinn/autodiff.hpp"
#include "pinn/domain.hpp"
#include "pinn/dsl.hpp"

namespace pinn::conditions {

/// Scalar function of the domain coordinates, written in the residual
/// language without u, derivatives or parameters.
class ConditionFn {
 public:
  static ConditionFn parse(std::string_view text, const domain::Domain& domain);

  double operator()(std::span<const double> point) const;
  ad::Expr compile(ad::Graph& graph, std::span<const ad::Expr> point) const;
  const std::string& text() const noexcept { return expr_.source(); }
  const dsl::ResidualExpr& expr() const noexcept { return expr_; }

  friend bool operator==(const ConditionFn& a, const ConditionFn& b) {
    return a.expr_ == b.expr_ && a.expr_.dimension_names() == b.expr_.dimension_names();
  }

 private:
  explicit ConditionFn(dsl::ResidualExpr expr) : expr_(std::move(expr)) {}
  dsl::ResidualExpr expr_;
};

/// u(x, t_lower) = h(x). Unset counts and seeds are filled in by the solver.
struct InitialCondition {
  ConditionFn fn;
  std::optional<std::size_t> n_points;
  std::optional<std::uint64_t> seed;
};

/// u = g on the face {dim = lower|upper}; g is a constant or a function.
struct DirichletBC {
  std::string dim;
  domain::Side side = domain::Side::kLower;
  std::variant<double, ConditionFn> value = 0.0;
  std::optional<std::size_t> n_points;
  std::optional<std::uint64_t> seed;

  double target(std::span<const double> point) const;
};

/// u (order 0) and optionally du/d(dim) (order 1) agree on opposite faces.
struct PeriodicBC {
  std::string dim;
  bool match_value = true;
  bool match_derivative = true;
  std::optional<std::size_t> n_points;
  std::optional<std::uint64_t> seed;

  std::size_t orders() const noexcept { return (match_value ? 1 : 0) + (match_derivative ? 1 : 0); }
};

using Condition = std::variant<InitialCondition, DirichletBC, PeriodicBC>;

class ConditionError : public Error {
 public:
  using Error::Error;
};

/// Throws ConditionError (or domain::DomainError) when the condition does not
/// fit the domain.
void validate(const Condition& condition, const domain::Domain& domain);

/// Number of loss terms produced for the given point count.
std::size_t terms_per_point(const Condition& condition) noexcept;

domain::PointSet sample_points(const InitialCondition& ic, const domain::Domain& domain,
                               std::size_t n, std::uint64_t seed);
domain::PointSet sample_points(const DirichletBC& bc, const domain::Domain& domain, std::size_t n,
                               std::uint64_t seed);
/// Lower-face points and their upper-face partners (identical elsewhere).
std::pair<domain::PointSet, domain::PointSet> sample_pairs(const PeriodicBC& bc,
                                                           const domain::Domain& domain,
                                                           std::size_t n, std::uint64_t seed);

using UForward = dsl::UForward;

/// Terms (u(p) - h(p))^2 at n_points initial points (seed from the condition).
std::vector<ad::Expr> ic_terms(const InitialCondition& ic, const domain::Domain& domain,
                               ad::Graph& graph, const UForward& u_forward);
/// Terms (u(p) - g(p))^2 at n_points face points.
std::vector<ad::Expr> dirichlet_terms(const DirichletBC& bc, const domain::Domain& domain,
                                      ad::Graph& graph, const UForward& u_forward);
/// Per point pair: (u(p-) - u(p+))^2 and/or (du(p-) - du(p+))^2, in that order.
std::vector<ad::Expr> periodic_terms(const PeriodicBC& bc, const domain::Domain& domain,
                                     ad::Graph& graph, const UForward& u_forward);

/// Terms for one symbolic point pair. `lower` and `upper` hold one node per
/// dimension; the entries at `dim` must be variables when the derivative is
/// matched.
std::vector<ad::Expr> periodic_pair_terms(const PeriodicBC& bc, std::size_t dim, ad::Graph& graph,
                                          const UForward& u_forward,
                                          std::span<const ad::Expr> lower,
                                          std::span<const ad::Expr> upper);

}  // namespace pinn::conditions
