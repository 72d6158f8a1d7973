#pragma once

// Box-shaped problem domains and the point sets sampled from them.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pinn/error.hpp"

namespace pinn::domain {

enum class DimensionKind { kSpatial, kTemporal };
enum class Side { kLower, kUpper };
enum class SamplingStrategy { kLatinHypercube, kUniform };

std::string_view side_name(Side s) noexcept;
std::string_view kind_name(DimensionKind k) noexcept;
std::string_view strategy_name(SamplingStrategy s) noexcept;

/// True for [a-zA-Z][a-zA-Z0-9_]*.
bool is_identifier(std::string_view name) noexcept;

struct Dimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  DimensionKind kind = DimensionKind::kSpatial;

  friend bool operator==(const Dimension&, const Dimension&) = default;
};

class DomainError : public Error {
 public:
  enum class Kind {
    kDuplicateName,
    kMultipleTemporal,
    kInvalidDimension,
    kUnknownDimension,
    kTemporalFace,
    kNoTemporal,
  };
  DomainError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class PointRole { kCollocation, kBoundary, kInitial, kSample, kGrid };

struct Face {
  std::size_t dim = 0;
  Side side = Side::kLower;

  friend bool operator==(const Face&, const Face&) = default;
};

/// N x d coordinates, row-major, columns in domain dimension order.
struct PointSet {
  std::size_t dims = 0;
  std::vector<double> coords;
  PointRole role = PointRole::kCollocation;
  std::optional<Face> face;

  std::size_t size() const noexcept { return dims == 0 ? 0 : coords.size() / dims; }
  bool empty() const noexcept { return size() == 0; }
  std::span<const double> point(std::size_t i) const { return {coords.data() + i * dims, dims}; }
  double at(std::size_t i, std::size_t d) const { return coords[i * dims + d]; }

  friend bool operator==(const PointSet&, const PointSet&) = default;
};

class Domain {
 public:
  Domain() = default;

  /// Appends a dimension; the domain grows one `add` at a time.
  Domain& add(Dimension dimension);
  Domain& add(std::string name, double lower, double upper,
              DimensionKind kind = DimensionKind::kSpatial);

  std::size_t size() const noexcept { return dims_.size(); }
  const std::vector<Dimension>& dims() const noexcept { return dims_; }
  const Dimension& dim(std::size_t i) const { return dims_.at(i); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::optional<std::size_t> temporal_index() const;
  std::vector<std::string> names() const;

  bool contains(std::span<const double> point) const;

  friend bool operator==(const Domain&, const Domain&) = default;

 private:
  std::vector<Dimension> dims_;
};

/// n points strictly inside the box. Latin hypercube: each dimension's
/// marginal hits each of the n equal-width strata exactly once.
PointSet sample_collocation(const Domain& domain, std::size_t n, SamplingStrategy strategy,
                            std::uint64_t seed);

/// n points on the face {dim = bound}; the other coordinates are LHS-sampled.
PointSet sample_boundary(const Domain& domain, std::string_view dim, Side side, std::size_t n,
                         std::uint64_t seed);

/// n points at the temporal lower bound; spatial coordinates LHS-sampled.
PointSet sample_initial(const Domain& domain, std::size_t n, std::uint64_t seed);

/// Dense Cartesian grid with `resolution[d]` evenly spaced values per
/// dimension including both bounds; the first dimension varies slowest.
PointSet cartesian_grid(const Domain& domain, std::span<const std::size_t> resolution);

/// CSV with a header of dimension names and one row per point.
void write_csv(std::ostream& out, const Domain& domain, const PointSet& points);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace pinn::domain
