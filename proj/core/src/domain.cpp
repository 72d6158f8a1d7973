#include "pinn/domain.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace pinn::domain {

namespace {

// (0, 1) with 53 random bits; never returns exactly 0 or 1.
double open_unit(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double strictly_inside(double value, double lower, double upper) {
  if (value <= lower) return std::nextafter(lower, upper);
  if (value >= upper) return std::nextafter(upper, lower);
  return value;
}

// Fills column `col` of `coords` (row stride `stride`) with an n-point Latin
// hypercube marginal over [lower, upper].
void lhs_column(std::vector<double>& coords, std::size_t stride, std::size_t col, std::size_t n,
                double lower, double upper, std::mt19937_64& rng) {
  std::vector<std::size_t> strata(n);
  std::iota(strata.begin(), strata.end(), std::size_t{0});
  std::shuffle(strata.begin(), strata.end(), rng);
  const double width = upper - lower;
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = (static_cast<double>(strata[i]) + open_unit(rng)) / static_cast<double>(n);
    coords[i * stride + col] = strictly_inside(lower + width * frac, lower, upper);
  }
}

const Dimension& require_spatial(const Domain& domain, std::string_view name, std::size_t& index) {
  const auto found = domain.index_of(name);
  if (!found) {
    throw DomainError(DomainError::Kind::kUnknownDimension,
                      "unknown dimension \"" + std::string(name) + "\"");
  }
  index = *found;
  const Dimension& d = domain.dim(index);
  if (d.kind == DimensionKind::kTemporal) {
    throw DomainError(DomainError::Kind::kTemporalFace,
                      "dimension \"" + d.name + "\" is temporal; boundary faces must be spatial");
  }
  return d;
}

}  // namespace

std::string_view side_name(Side s) noexcept { return s == Side::kLower ? "lower" : "upper"; }

std::string_view kind_name(DimensionKind k) noexcept {
  return k == DimensionKind::kTemporal ? "temporal" : "spatial";
}

std::string_view strategy_name(SamplingStrategy s) noexcept {
  return s == SamplingStrategy::kUniform ? "uniform" : "lhs";
}

bool is_identifier(std::string_view name) noexcept {
  if (name.empty() || !std::isalpha(static_cast<unsigned char>(name.front()))) return false;
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return true;
}

Domain& Domain::add(Dimension dimension) {
  if (!is_identifier(dimension.name)) {
    throw DomainError(DomainError::Kind::kInvalidDimension,
                      "dimension name \"" + dimension.name + "\" is not a valid identifier");
  }
  if (!(dimension.lower < dimension.upper) || !std::isfinite(dimension.lower) ||
      !std::isfinite(dimension.upper)) {
    throw DomainError(DomainError::Kind::kInvalidDimension,
                      "dimension \"" + dimension.name + "\" needs finite lower < upper");
  }
  if (index_of(dimension.name)) {
    throw DomainError(DomainError::Kind::kDuplicateName,
                      "dimension \"" + dimension.name + "\" is already defined");
  }
  if (dimension.kind == DimensionKind::kTemporal && temporal_index()) {
    throw DomainError(DomainError::Kind::kMultipleTemporal,
                      "domain already has temporal dimension \"" + dims_[*temporal_index()].name +
                          "\"; cannot add \"" + dimension.name + "\"");
  }
  dims_.push_back(std::move(dimension));
  return *this;
}

Domain& Domain::add(std::string name, double lower, double upper, DimensionKind kind) {
  return add(Dimension{std::move(name), lower, upper, kind});
}

std::optional<std::size_t> Domain::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (dims_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Domain::temporal_index() const {
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (dims_[i].kind == DimensionKind::kTemporal) return i;
  }
  return std::nullopt;
}

std::vector<std::string> Domain::names() const {
  std::vector<std::string> out;
  for (const auto& d : dims_) out.push_back(d.name);
  return out;
}

bool Domain::contains(std::span<const double> point) const {
  if (point.size() != dims_.size()) return false;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (!(point[i] >= dims_[i].lower && point[i] <= dims_[i].upper)) return false;
  }
  return true;
}

PointSet sample_collocation(const Domain& domain, std::size_t n, SamplingStrategy strategy,
                            std::uint64_t seed) {
  const std::size_t d = domain.size();
  PointSet out{d, std::vector<double>(n * d), PointRole::kCollocation, std::nullopt};
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j < d; ++j) {
    const Dimension& dim = domain.dim(j);
    if (strategy == SamplingStrategy::kLatinHypercube) {
      lhs_column(out.coords, d, j, n, dim.lower, dim.upper, rng);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = dim.lower + (dim.upper - dim.lower) * open_unit(rng);
        out.coords[i * d + j] = strictly_inside(v, dim.lower, dim.upper);
      }
    }
  }
  return out;
}

PointSet sample_boundary(const Domain& domain, std::string_view dim_name, Side side, std::size_t n,
                         std::uint64_t seed) {
  std::size_t pinned = 0;
  const Dimension& face_dim = require_spatial(domain, dim_name, pinned);
  const std::size_t d = domain.size();
  PointSet out{d, std::vector<double>(n * d), PointRole::kBoundary, Face{pinned, side}};
  std::mt19937_64 rng(seed);
  const double bound = side == Side::kLower ? face_dim.lower : face_dim.upper;
  for (std::size_t j = 0; j < d; ++j) {
    if (j == pinned) {
      for (std::size_t i = 0; i < n; ++i) out.coords[i * d + j] = bound;
    } else {
      lhs_column(out.coords, d, j, n, domain.dim(j).lower, domain.dim(j).upper, rng);
    }
  }
  return out;
}

PointSet sample_initial(const Domain& domain, std::size_t n, std::uint64_t seed) {
  const auto t = domain.temporal_index();
  if (!t) {
    throw DomainError(DomainError::Kind::kNoTemporal,
                      "initial points need a temporal dimension; the domain has none");
  }
  const std::size_t d = domain.size();
  PointSet out{d, std::vector<double>(n * d), PointRole::kInitial, std::nullopt};
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j < d; ++j) {
    if (j == *t) {
      for (std::size_t i = 0; i < n; ++i) out.coords[i * d + j] = domain.dim(j).lower;
    } else {
      lhs_column(out.coords, d, j, n, domain.dim(j).lower, domain.dim(j).upper, rng);
    }
  }
  return out;
}

PointSet cartesian_grid(const Domain& domain, std::span<const std::size_t> resolution) {
  const std::size_t d = domain.size();
  if (resolution.size() != d) {
    throw DomainError(DomainError::Kind::kInvalidDimension,
                      "grid resolution needs one entry per dimension");
  }
  std::size_t total = 1;
  for (std::size_t r : resolution) {
    if (r == 0) throw DomainError(DomainError::Kind::kInvalidDimension, "grid resolution of 0");
    total *= r;
  }
  PointSet out{d, std::vector<double>(total * d), PointRole::kGrid, std::nullopt};
  std::vector<std::size_t> index(d, 0);
  for (std::size_t p = 0; p < total; ++p) {
    for (std::size_t j = 0; j < d; ++j) {
      const Dimension& dim = domain.dim(j);
      const std::size_t r = resolution[j];
      double v = dim.lower;
      if (r > 1) {
        v = index[j] + 1 == r ? dim.upper
                              : dim.lower + (dim.upper - dim.lower) * static_cast<double>(index[j]) /
                                                static_cast<double>(r - 1);
      }
      out.coords[p * d + j] = v;
    }
    for (std::size_t j = d; j-- > 0;) {
      if (++index[j] < resolution[j]) break;
      index[j] = 0;
    }
  }
  return out;
}

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

void write_csv(std::ostream& out, const Domain& domain, const PointSet& points) {
  const auto names = domain.names();
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.dims; ++j) {
      out << (j ? "," : "") << format_double(points.at(i, j));
    }
    out << '\n';
  }
}

}  // namespace pinn::domain
