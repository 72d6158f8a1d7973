#include "pinn/app/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

namespace pinn::app {

CsvError::CsvError(std::size_t row, std::size_t line, const std::string& message)
    : Error(row == 0 ? message
                     : "row " + std::to_string(row) + " (line " + std::to_string(line) + "): " +
                           message),
      row_(row),
      line_(line) {}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

Table read_table(std::istream& in) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (t.header.empty()) {
      for (auto f : fields) t.header.emplace_back(f);
      continue;
    }
    ++row;
    if (fields.size() != t.header.size()) {
      throw CsvError(row, line_no, "expected " + std::to_string(t.header.size()) +
                                       " columns, found " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto f = fields[c];
      double v = 0.0;
      const char* first = f.data();
      const char* last = f.data() + f.size();
      if (first != last && *first == '+') ++first;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last || f.empty() || !std::isfinite(v)) {
        throw CsvError(row, line_no, "column " + t.header[c] + ": \"" + std::string(f) +
                                         "\" is not a finite number");
      }
      t.values.push_back(v);
    }
  }
  return t;
}

domain::PointSet read_points(std::istream& in, const domain::Domain& domain) {
  const Table t = read_table(in);
  const auto names = domain.names();
  domain::PointSet points;
  points.dims = domain.size();
  points.role = domain::PointRole::kGrid;
  if (t.header.empty()) return points;
  const bool with_u = t.header.size() == names.size() + 1 && t.header.back() == "u";
  const std::vector<std::string> dims(t.header.begin(),
                                      t.header.begin() + static_cast<std::ptrdiff_t>(
                                                             with_u ? names.size() : t.header.size()));
  if (dims != names) {
    std::string want;
    for (const auto& n : names) want += (want.empty() ? "" : ",") + n;
    throw CsvError(0, 1, "header must be " + want + " (optionally followed by u)");
  }
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t d = 0; d < names.size(); ++d) points.coords.push_back(t.values[r * t.columns() + d]);
  }
  return points;
}

void write_solution(std::ostream& out, const domain::Domain& domain,
                    const domain::PointSet& points, std::span<const double> u) {
  for (const auto& name : domain.names()) out << name << ',';
  out << "u\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t d = 0; d < points.dims; ++d) out << domain::format_double(points.at(i, d)) << ',';
    out << domain::format_double(u[i]) << '\n';
  }
}

}  // namespace pinn::app
