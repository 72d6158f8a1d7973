#include "pinn/conditions.hpp"

namespace pinn::conditions {

namespace {

constexpr std::size_t kDefaultPoints = 100;

std::vector<ad::Expr> constant_point(ad::Graph& graph, std::span<const double> point) {
  std::vector<ad::Expr> out;
  out.reserve(point.size());
  for (double v : point) out.push_back(graph.constant(v));
  return out;
}

std::size_t spatial_index(const domain::Domain& domain, const std::string& dim) {
  const auto index = domain.index_of(dim);
  if (!index) {
    throw domain::DomainError(domain::DomainError::Kind::kUnknownDimension,
                              "unknown dimension \"" + dim + "\"");
  }
  if (domain.dim(*index).kind == domain::DimensionKind::kTemporal) {
    throw domain::DomainError(domain::DomainError::Kind::kTemporalFace,
                              "dimension \"" + dim + "\" is temporal; boundary conditions need "
                                                     "a spatial dimension");
  }
  return *index;
}

void check_fn(const ConditionFn& fn, const domain::Domain& domain) {
  if (fn.expr().dimension_names() != domain.names()) {
    throw ConditionError("condition function \"" + fn.text() +
                         "\" was parsed against a different domain");
  }
}

}  // namespace

ConditionFn ConditionFn::parse(std::string_view text, const domain::Domain& domain) {
  return ConditionFn(dsl::parse_condition(text, domain));
}

double ConditionFn::operator()(std::span<const double> point) const {
  return dsl::evaluate(expr_, point);
}

ad::Expr ConditionFn::compile(ad::Graph& graph, std::span<const ad::Expr> point) const {
  static const std::map<std::string, ad::Expr> kNoParams;
  return dsl::compile(expr_, kNoParams, {}, graph, point);
}

double DirichletBC::target(std::span<const double> point) const {
  if (const double* c = std::get_if<double>(&value)) return *c;
  return std::get<ConditionFn>(value)(point);
}

void validate(const Condition& condition, const domain::Domain& domain) {
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, InitialCondition>) {
          if (!domain.temporal_index()) {
            throw domain::DomainError(domain::DomainError::Kind::kNoTemporal,
                                      "initial condition given but the domain has no temporal "
                                      "dimension");
          }
          check_fn(c.fn, domain);
        } else if constexpr (std::is_same_v<T, DirichletBC>) {
          spatial_index(domain, c.dim);
          if (const auto* fn = std::get_if<ConditionFn>(&c.value)) check_fn(*fn, domain);
        } else {
          spatial_index(domain, c.dim);
          if (c.orders() == 0) {
            throw ConditionError("periodic condition on \"" + c.dim +
                                 "\" must match the value, the derivative, or both");
          }
        }
      },
      condition);
}

std::size_t terms_per_point(const Condition& condition) noexcept {
  if (const auto* p = std::get_if<PeriodicBC>(&condition)) return p->orders();
  return 1;
}

domain::PointSet sample_points(const InitialCondition&, const domain::Domain& domain,
                               std::size_t n, std::uint64_t seed) {
  return domain::sample_initial(domain, n, seed);
}

domain::PointSet sample_points(const DirichletBC& bc, const domain::Domain& domain, std::size_t n,
                               std::uint64_t seed) {
  return domain::sample_boundary(domain, bc.dim, bc.side, n, seed);
}

std::pair<domain::PointSet, domain::PointSet> sample_pairs(const PeriodicBC& bc,
                                                           const domain::Domain& domain,
                                                           std::size_t n, std::uint64_t seed) {
  const std::size_t dim = spatial_index(domain, bc.dim);
  domain::PointSet lower = domain::sample_boundary(domain, bc.dim, domain::Side::kLower, n, seed);
  domain::PointSet upper = lower;
  upper.face = domain::Face{dim, domain::Side::kUpper};
  for (std::size_t i = 0; i < upper.size(); ++i) {
    upper.coords[i * upper.dims + dim] = domain.dim(dim).upper;
  }
  return {std::move(lower), std::move(upper)};
}

std::vector<ad::Expr> ic_terms(const InitialCondition& ic, const domain::Domain& domain,
                               ad::Graph& graph, const UForward& u_forward) {
  validate(ic, domain);
  const auto points =
      sample_points(ic, domain, ic.n_points.value_or(kDefaultPoints), ic.seed.value_or(0));
  std::vector<ad::Expr> terms;
  terms.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = constant_point(graph, points.point(i));
    terms.push_back(ad::square(u_forward(p) - ic.fn.compile(graph, p)));
  }
  return terms;
}

std::vector<ad::Expr> dirichlet_terms(const DirichletBC& bc, const domain::Domain& domain,
                                      ad::Graph& graph, const UForward& u_forward) {
  validate(bc, domain);
  const auto points =
      sample_points(bc, domain, bc.n_points.value_or(kDefaultPoints), bc.seed.value_or(0));
  std::vector<ad::Expr> terms;
  terms.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = constant_point(graph, points.point(i));
    const ad::Expr g = std::holds_alternative<double>(bc.value)
                           ? graph.constant(std::get<double>(bc.value))
                           : std::get<ConditionFn>(bc.value).compile(graph, p);
    terms.push_back(ad::square(u_forward(p) - g));
  }
  return terms;
}

std::vector<ad::Expr> periodic_pair_terms(const PeriodicBC& bc, std::size_t dim, ad::Graph& graph,
                                          const UForward& u_forward,
                                          std::span<const ad::Expr> lower,
                                          std::span<const ad::Expr> upper) {
  const ad::Expr u_lower = u_forward(lower);
  const ad::Expr u_upper = u_forward(upper);
  std::vector<ad::Expr> terms;
  if (bc.match_value) terms.push_back(ad::square(u_lower - u_upper));
  if (bc.match_derivative) {
    const ad::Expr du_lower = graph.derive(u_lower, lower[dim]);
    const ad::Expr du_upper = graph.derive(u_upper, upper[dim]);
    terms.push_back(ad::square(du_lower - du_upper));
  }
  return terms;
}

std::vector<ad::Expr> periodic_terms(const PeriodicBC& bc, const domain::Domain& domain,
                                     ad::Graph& graph, const UForward& u_forward) {
  validate(bc, domain);
  const std::size_t dim = spatial_index(domain, bc.dim);
  const auto [lower_pts, upper_pts] =
      sample_pairs(bc, domain, bc.n_points.value_or(kDefaultPoints), bc.seed.value_or(0));
  std::vector<ad::Expr> terms;
  for (std::size_t i = 0; i < lower_pts.size(); ++i) {
    auto lower = constant_point(graph, lower_pts.point(i));
    auto upper = constant_point(graph, upper_pts.point(i));
    lower[dim] = graph.new_var(graph.fresh_key("periodic:" + bc.dim + ":lower"),
                               lower_pts.at(i, dim));
    upper[dim] = graph.new_var(graph.fresh_key("periodic:" + bc.dim + ":upper"),
                               upper_pts.at(i, dim));
    for (const ad::Expr& t : periodic_pair_terms(bc, dim, graph, u_forward, lower, upper)) {
      terms.push_back(t);
    }
  }
  return terms;
}

}  // namespace pinn::conditions
