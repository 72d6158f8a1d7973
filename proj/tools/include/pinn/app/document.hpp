#pragma once

// Reader for the config file format: a TOML subset with `key = value`
// lines, `[table]` and `[[array-of-tables]]` headers, `#` comments, and
// values that are strings, integers, floats, booleans or one-line arrays.
//
// Keys are flattened to dotted paths ("training.optimizer.lr",
// "conditions[1].type"). Consumers take() the keys they understand; what is
// left over is reported as unknown.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pinn/error.hpp"

namespace pinn::app {

/// Parse errors carry a 1-based line and column; semantic errors carry the
/// field path.
class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, std::size_t column, const std::string& message);
  ConfigError(std::string path, const std::string& message);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::size_t line_ = 0;
  std::size_t column_ = 0;
  std::string path_;
};

struct Value {
  using Array = std::vector<Value>;
  std::variant<bool, std::int64_t, double, std::string, Array> data;
  std::size_t line = 0;
  std::size_t column = 0;

  std::string_view type_name() const noexcept;
};

class Document {
 public:
  static Document parse(std::string_view text);

  bool has(const std::string& path) const { return values_.count(path) != 0; }
  /// Removes and returns the value at `path`.
  std::optional<Value> take(const std::string& path);
  /// Number of [[name]] blocks.
  std::size_t array_size(const std::string& name) const;
  /// True when a [name] header or any key below `name` exists.
  bool has_table(const std::string& name) const;
  /// Paths that were never taken, in file order.
  std::vector<std::string> remaining() const;

 private:
  std::map<std::string, Value> values_;
  std::vector<std::string> order_;
  std::map<std::string, std::size_t> arrays_;
  std::vector<std::string> tables_;
};

// Typed accessors; each throws ConfigError naming `path` on a type mismatch.
std::optional<std::string> take_string(Document& doc, const std::string& path);
std::optional<double> take_double(Document& doc, const std::string& path);
std::optional<std::int64_t> take_int(Document& doc, const std::string& path);
std::optional<bool> take_bool(Document& doc, const std::string& path);
std::optional<std::vector<std::int64_t>> take_int_array(Document& doc, const std::string& path);

/// Quoted, escaped string literal.
std::string quote(std::string_view text);

}  // namespace pinn::app
