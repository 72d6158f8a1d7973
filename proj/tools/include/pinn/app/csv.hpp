#pragma once

// Numeric CSV with a header row: points (dimension columns) and samples
// (dimension columns then `u`).

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pinn/domain.hpp"
#include "pinn/error.hpp"

namespace pinn::app {

/// Malformed CSV content. `row` counts data rows from 1; `line` is the file
/// line (the header is line 1). Both are 0 for header problems.
class CsvError : public Error {
 public:
  CsvError(std::size_t row, std::size_t line, const std::string& message);
  std::size_t row() const noexcept { return row_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t row_;
  std::size_t line_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<double> values;  // row-major

  std::size_t columns() const noexcept { return header.size(); }
  std::size_t rows() const noexcept { return header.empty() ? 0 : values.size() / header.size(); }
};

/// Every row must have header.size() finite numeric fields.
Table read_table(std::istream& in);

/// Points whose header is the domain's dimension names, optionally followed
/// by a `u` column that is ignored.
domain::PointSet read_points(std::istream& in, const domain::Domain& domain);

/// Header "<dims...>,u" and one row per point.
void write_solution(std::ostream& out, const domain::Domain& domain,
                    const domain::PointSet& points, std::span<const double> u);

}  // namespace pinn::app
