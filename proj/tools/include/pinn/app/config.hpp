#pragma once

// Problem configuration for the command-line tool. See README.md for the
// file schema.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pinn/app/document.hpp"
#include "pinn/domain.hpp"
#include "pinn/solver.hpp"

namespace pinn::app {

struct DimensionConfig {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  domain::DimensionKind kind = domain::DimensionKind::kSpatial;

  friend bool operator==(const DimensionConfig&, const DimensionConfig&) = default;
};

struct ParamConfig {
  std::string name;
  double init = 0.0;
  bool trainable = true;

  friend bool operator==(const ParamConfig&, const ParamConfig&) = default;
};

struct ConditionConfig {
  enum class Type { kInitial, kDirichlet, kPeriodic };
  Type type = Type::kDirichlet;
  std::string dim;                              // dirichlet, periodic
  domain::Side side = domain::Side::kLower;     // dirichlet
  std::variant<double, std::string> value = 0.0;  // initial: always a string
  std::vector<std::int64_t> match = {0, 1};     // periodic orders
  std::optional<std::size_t> n_points;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const ConditionConfig&, const ConditionConfig&) = default;
};

struct ProblemConfig {
  std::vector<DimensionConfig> domain;
  std::string residual;
  std::vector<ParamConfig> params;
  std::vector<ConditionConfig> conditions;
  std::vector<std::size_t> layers;  // [input, hidden..., 1]
  net::Activation activation = net::Activation::kTanh;
  solver::SolverConfig training;
  std::optional<std::filesystem::path> data;
  std::filesystem::path output = "pinn-out";
  std::vector<std::size_t> resolution;  // one entry per dimension

  friend bool operator==(const ProblemConfig&, const ProblemConfig&) = default;
};

inline constexpr std::size_t kDefaultResolution = 100;
inline constexpr std::size_t kMaxGridPoints = 10'000'000;

/// Parses and validates a config. Relative paths are resolved against
/// `base_dir`; missing settings get their defaults. Throws ConfigError.
ProblemConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);

/// Reads `path` (pinn::Error on I/O failure) and parses it.
ProblemConfig load_config(const std::filesystem::path& path);

/// Canonical text with every setting spelled out; parse_config of the
/// result reproduces `config`.
std::string emit_config(const ProblemConfig& config);

domain::Domain make_domain(const ProblemConfig& config);
net::MLPSpec make_net_spec(const ProblemConfig& config);

/// Parses the residual and condition expressions. Errors name the field.
solver::Problem make_problem(const ProblemConfig& config);

}  // namespace pinn::app
