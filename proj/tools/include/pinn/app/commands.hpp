#pragma once

// The solve / discover / eval commands. Each returns the process exit code:
// 0 success, 1 I/O failure, 2 invalid configuration or input data,
// 3 training diverged (the last good checkpoint is still written).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace pinn::app {

enum ExitCode : int { kExitOk = 0, kExitIo = 1, kExitConfig = 2, kExitDiverged = 3 };

struct Options {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool quiet = false;
  std::filesystem::path weights;  // eval
  std::filesystem::path points;   // eval
};

/// Writes resolved-config.toml, history.jsonl, weights.pinn, solution.csv.
int cmd_solve(const Options& options, std::ostream& log);
/// cmd_solve outputs plus params.json.
int cmd_discover(const Options& options, std::ostream& log);
/// Writes predictions.csv for the given points; never trains.
int cmd_eval(const Options& options, std::ostream& log);

}  // namespace pinn::app
