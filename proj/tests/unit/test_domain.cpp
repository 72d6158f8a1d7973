#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>

#include "pinn/domain.hpp"

using namespace pinn::domain;

namespace {

Domain box() {
  Domain d;
  d.add("x", -1.0, 1.0).add("y", 0.0, 2.0).add("t", 0.0, 0.5, DimensionKind::kTemporal);
  return d;
}

DomainError::Kind kind_of(auto&& f) {
  try {
    f();
  } catch (const DomainError& e) {
    return e.kind();
  }
  FAIL("expected DomainError");
  return DomainError::Kind::kInvalidDimension;
}

}  // namespace

TEST_CASE("dimension validation") {
  Domain d;
  d.add("x", 0.0, 1.0);
  CHECK(kind_of([&] { d.add("x", 0.0, 2.0); }) == DomainError::Kind::kDuplicateName);
  CHECK(kind_of([&] { d.add("y", 1.0, 1.0); }) == DomainError::Kind::kInvalidDimension);
  CHECK(kind_of([&] { d.add("9z", 0.0, 1.0); }) == DomainError::Kind::kInvalidDimension);
  d.add("t", 0.0, 1.0, DimensionKind::kTemporal);
  CHECK(kind_of([&] { d.add("s", 0.0, 1.0, DimensionKind::kTemporal); }) ==
        DomainError::Kind::kMultipleTemporal);
  CHECK(d.temporal_index() == 1u);
  CHECK(d.index_of("x") == 0u);
  CHECK_FALSE(d.index_of("q").has_value());
}

TEST_CASE("Latin hypercube puts one point in every stratum of every dimension") {
  const Domain d = box();
  const std::size_t n = 257;
  const PointSet p = sample_collocation(d, n, SamplingStrategy::kLatinHypercube, 11);
  REQUIRE(p.size() == n);
  for (std::size_t j = 0; j < d.size(); ++j) {
    const Dimension& dim = d.dim(j);
    std::vector<int> hits(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = p.at(i, j);
      CHECK(v > dim.lower);
      CHECK(v < dim.upper);
      const auto s = static_cast<std::size_t>((v - dim.lower) / (dim.upper - dim.lower) *
                                              static_cast<double>(n));
      ++hits[std::min(s, n - 1)];
    }
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
}

TEST_CASE("sampling is deterministic per seed and strategy") {
  const Domain d = box();
  for (auto s : {SamplingStrategy::kLatinHypercube, SamplingStrategy::kUniform}) {
    CHECK(sample_collocation(d, 50, s, 3) == sample_collocation(d, 50, s, 3));
    CHECK(sample_collocation(d, 50, s, 3).coords != sample_collocation(d, 50, s, 4).coords);
  }
  const PointSet u = sample_collocation(d, 400, SamplingStrategy::kUniform, 1);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(d.contains(u.point(i)));
}

TEST_CASE("boundary and initial points lie on their face") {
  const Domain d = box();
  const PointSet b = sample_boundary(d, "y", Side::kUpper, 40, 2);
  REQUIRE(b.size() == 40);
  REQUIRE(b.face.has_value());
  CHECK(b.face->dim == 1);
  for (std::size_t i = 0; i < b.size(); ++i) {
    CHECK(b.at(i, 1) == 2.0);
    CHECK(d.contains(b.point(i)));
  }
  const PointSet ic = sample_initial(d, 30, 2);
  for (std::size_t i = 0; i < ic.size(); ++i) CHECK(ic.at(i, 2) == 0.0);

  CHECK(kind_of([&] { sample_boundary(d, "t", Side::kLower, 5, 0); }) ==
        DomainError::Kind::kTemporalFace);
  CHECK(kind_of([&] { sample_boundary(d, "q", Side::kLower, 5, 0); }) ==
        DomainError::Kind::kUnknownDimension);
  Domain no_time;
  no_time.add("x", 0.0, 1.0);
  CHECK(kind_of([&] { sample_initial(no_time, 5, 0); }) == DomainError::Kind::kNoTemporal);
}

TEST_CASE("Cartesian grid includes both bounds, first dimension slowest") {
  Domain d;
  d.add("x", 0.0, 1.0).add("t", 0.0, 0.3, DimensionKind::kTemporal);
  const std::vector<std::size_t> res{3, 4};
  const PointSet g = cartesian_grid(d, res);
  REQUIRE(g.size() == 12);
  CHECK(g.at(0, 0) == 0.0);
  CHECK(g.at(0, 1) == 0.0);
  CHECK(g.at(1, 0) == 0.0);
  CHECK(g.at(1, 1) == doctest::Approx(0.1));
  CHECK(g.at(3, 1) == 0.3);
  CHECK(g.at(4, 0) == 0.5);
  CHECK(g.at(11, 0) == 1.0);
  const std::vector<std::size_t> bad{3};
  CHECK_THROWS_AS(cartesian_grid(d, bad), DomainError);
}

TEST_CASE("format_double round-trips exactly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, (i % 40) - 20);
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::strtod(format_double(std::numeric_limits<double>::denorm_min()).c_str(), nullptr) ==
        std::numeric_limits<double>::denorm_min());
}

TEST_CASE("point CSV has a header of dimension names") {
  Domain d;
  d.add("x", 0.0, 1.0).add("t", 0.0, 1.0, DimensionKind::kTemporal);
  PointSet p{2, {0.5, 0.25}, PointRole::kGrid, std::nullopt};
  std::ostringstream out;
  write_csv(out, d, p);
  CHECK(out.str() == "x,t\n0.5,0.25\n");
}
