#include <iostream>

#include <CLI11.hpp>

#include "pinn/app/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed neural network solver"};
  app.require_subcommand(1);

  pinn::app::Options opts;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t workers = 0;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opts.config, "Problem config file")->required();
    cmd->add_option("--out", out, "Output directory (overrides output.directory)");
    cmd->add_flag("--quiet", opts.quiet, "Only report errors");
  };
  auto training = [&](CLI::App* cmd) {
    common(cmd);
    cmd->add_option("--seed", seed, "Random seed (overrides training.seed)");
    cmd->add_option("--workers", workers, "Worker threads (overrides training.workers)")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* solve = app.add_subcommand("solve", "Train on a forward problem");
  training(solve);
  CLI::App* discover = app.add_subcommand("discover", "Estimate PDE parameters from data");
  training(discover);
  CLI::App* eval = app.add_subcommand("eval", "Predict u at given points with saved weights");
  common(eval);
  eval->add_option("--weights", opts.weights, "Weight archive")->required();
  eval->add_option("--points", opts.points, "CSV of points (header: dimension names)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pinn::app::kExitConfig;
  }

  if (!out.empty()) opts.out = out;
  for (CLI::App* cmd : {solve, discover}) {
    if (cmd->count("--seed") > 0) opts.seed = seed;
    if (cmd->count("--workers") > 0) opts.workers = workers;
  }

  if (*solve) return pinn::app::cmd_solve(opts, std::cerr);
  if (*discover) return pinn::app::cmd_discover(opts, std::cerr);
  return pinn::app::cmd_eval(opts, std::cerr);
}
