#include "pinn/app/commands.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "pinn/app/config.hpp"
#include "pinn/app/csv.hpp"
#include "pinn/net.hpp"
#include "pinn/solver.hpp"

namespace pinn::app {

namespace {

// Failure that maps directly onto an exit code.
class CommandError : public Error {
 public:
  CommandError(int code, const std::string& message) : Error(message), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CommandError(kExitIo, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw CommandError(kExitIo, "error while writing " + path.string());
}

template <typename F>
void write_file(const std::filesystem::path& path, F&& body) {
  std::ofstream out = open_output(path);
  body(out);
  finish(out, path);
}

ProblemConfig load(const Options& options) {
  ProblemConfig cfg;
  try {
    cfg = load_config(options.config);
  } catch (const ConfigError& e) {
    throw CommandError(kExitConfig, options.config.string() + ": " + e.what());
  } catch (const Error& e) {
    throw CommandError(kExitIo, e.what());
  }
  if (options.out) cfg.output = *options.out;
  if (options.seed) cfg.training.seed = *options.seed;
  if (options.workers) {
    if (*options.workers < 1) throw CommandError(kExitConfig, "--workers must be at least 1");
    cfg.training.workers = *options.workers;
  }
  return cfg;
}

void prepare_output(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw CommandError(kExitIo, "cannot create output directory " + dir.string() +
                                    (ec ? ": " + ec.message() : ""));
  }
}

solver::SampleSet read_samples(const std::filesystem::path& path, const domain::Domain& d) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CommandError(kExitConfig, "data.path: cannot read " + path.string());
  Table t;
  try {
    t = read_table(in);
  } catch (const CsvError& e) {
    throw CommandError(kExitConfig, path.string() + ": " + e.what());
  }
  std::vector<std::string> want = d.names();
  want.push_back("u");
  if (t.header != want) {
    std::string text;
    for (const auto& n : want) text += (text.empty() ? "" : ",") + n;
    throw CommandError(kExitConfig, path.string() + ": header must be " + text);
  }
  solver::SampleSet s;
  s.points.dims = d.size();
  s.points.role = domain::PointRole::kSample;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < d.size(); ++c) s.points.coords.push_back(t.values[r * t.columns() + c]);
    s.targets.push_back(t.values[r * t.columns() + d.size()]);
  }
  if (const auto outside = solver::count_out_of_bounds(d, s.points); outside > 0) {
    throw CommandError(kExitConfig, path.string() + ": " + std::to_string(outside) +
                                        " sample points lie outside the domain");
  }
  return s;
}

std::string layer_list(const net::MLPSpec& spec) {
  std::string out = "[";
  const auto widths = spec.layer_widths();
  for (std::size_t i = 0; i < widths.size(); ++i) {
    out += (i > 0 ? ", " : "") + std::to_string(widths[i]);
  }
  return out + "] " + std::string(net::activation_name(spec.activation));
}

void write_params(const std::filesystem::path& path, const solver::CompiledProblem& cp) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json final_values = nlohmann::ordered_json::object();
  for (const auto& [name, value] : solver::recover_parameters(cp)) final_values[name] = value;
  doc["final"] = std::move(final_values);
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (const auto& r : cp.history()) {
    nlohmann::ordered_json row;
    row["iteration"] = r.iteration;
    for (const auto& [name, value] : r.params) row[name] = value;
    trace.push_back(std::move(row));
  }
  doc["trace"] = std::move(trace);
  write_file(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

void write_checkpoint(const std::filesystem::path& dir, const solver::CompiledProblem& cp) {
  write_file(dir / "history.jsonl", [&](std::ostream& out) { solver::write_jsonl(out, cp.history()); });
  try {
    net::save(cp.weights(), cp.problem().net, dir / "weights.pinn");
  } catch (const net::ArchiveError& e) {
    throw CommandError(kExitIo, e.what());
  }
}

int run_training(const Options& options, std::ostream& log, bool discover) {
  const ProblemConfig cfg = load(options);
  solver::Problem problem;
  try {
    problem = make_problem(cfg);
  } catch (const ConfigError& e) {
    throw CommandError(kExitConfig, e.what());
  }

  const std::size_t trainable = problem.params.trainable_count();
  if (discover && trainable == 0) {
    throw CommandError(kExitConfig,
                       "pde.param: no trainable parameters to discover; use `pinn solve` for a "
                       "forward problem");
  }
  if (!discover && trainable > 0) {
    throw CommandError(kExitConfig,
                       "pde.param: trainable parameters are declared; use `pinn discover`, or "
                       "set trainable = false to solve with fixed values");
  }
  if (discover && !cfg.data) {
    throw CommandError(kExitConfig, "data.path: discovery needs a sample data file");
  }
  if (cfg.data) problem.samples = read_samples(*cfg.data, problem.domain);

  prepare_output(cfg.output);
  write_file(cfg.output / "resolved-config.toml",
             [&](std::ostream& out) { out << emit_config(cfg); });

  std::optional<solver::CompiledProblem> compiled;
  try {
    compiled.emplace(solver::compile(problem, cfg.training,
                                     discover ? solver::Mode::kDiscovery : solver::Mode::kForward));
  } catch (const Error& e) {
    throw CommandError(kExitConfig, e.what());
  }
  solver::CompiledProblem& cp = *compiled;

  const std::size_t total = cfg.training.iterations;
  const std::size_t every = std::max<std::size_t>(1, total / 20);
  auto progress = [&](const solver::HistoryRecord& r) {
    if (options.quiet || (r.iteration % every != 0 && r.iteration != total)) return;
    log << "iteration " << r.iteration << '/' << total << "  loss " << r.loss.total
        << "  (l_s " << r.loss.l_s << ", l_r " << r.loss.l_r << ", l_b " << r.loss.l_b
        << ", l_0 " << r.loss.l_0 << ')';
    for (const auto& [name, value] : r.params) log << "  " << name << '=' << value;
    log << '\n';
  };

  try {
    solver::fit(cp, total, progress);
  } catch (const solver::TrainingDiverged& e) {
    write_checkpoint(cfg.output, cp);
    if (discover) write_params(cfg.output / "params.json", cp);
    log << "error: " << e.what() << '\n';
    return kExitDiverged;
  }

  write_checkpoint(cfg.output, cp);
  const domain::PointSet grid = domain::cartesian_grid(problem.domain, cfg.resolution);
  const std::vector<double> u = solver::predict(cp, grid);
  write_file(cfg.output / "solution.csv",
             [&](std::ostream& out) { write_solution(out, problem.domain, grid, u); });
  if (discover) write_params(cfg.output / "params.json", cp);
  if (!options.quiet) {
    log << "wrote " << (cfg.output / "solution.csv").string() << '\n';
    for (const auto& [name, value] : solver::recover_parameters(cp)) {
      log << name << " = " << value << '\n';
    }
  }
  return kExitOk;
}

template <typename F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const CommandError& e) {
    log << "error: " << e.what() << '\n';
    return e.code();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace

int cmd_solve(const Options& options, std::ostream& log) {
  return guarded(log, [&] { return run_training(options, log, false); });
}

int cmd_discover(const Options& options, std::ostream& log) {
  return guarded(log, [&] { return run_training(options, log, true); });
}

int cmd_eval(const Options& options, std::ostream& log) {
  return guarded(log, [&] {
    ProblemConfig cfg = load(options);
    solver::Problem problem;
    try {
      problem = make_problem(cfg);
    } catch (const ConfigError& e) {
      throw CommandError(kExitConfig, e.what());
    }

    net::Archive archive;
    try {
      archive = net::load(options.weights);
    } catch (const net::ArchiveError& e) {
      throw CommandError(e.kind() == net::ArchiveError::Kind::kIo ? kExitIo : kExitConfig,
                         options.weights.string() + ": " + e.what());
    }
    if (!(archive.spec == problem.net)) {
      throw CommandError(kExitConfig, "weight archive network " + layer_list(archive.spec) +
                                          " does not match the config network " +
                                          layer_list(problem.net));
    }

    std::ifstream in(options.points, std::ios::binary);
    if (!in) throw CommandError(kExitIo, "cannot read " + options.points.string());
    domain::PointSet points;
    try {
      points = read_points(in, problem.domain);
    } catch (const CsvError& e) {
      throw CommandError(kExitConfig, options.points.string() + ": " + e.what());
    }
    if (const auto outside = solver::count_out_of_bounds(problem.domain, points); outside > 0) {
      log << "warning: " << outside << " points lie outside the domain (extrapolating)\n";
    }

    // Only the network is needed: drop conditions and keep sampling minimal.
    problem.conditions.clear();
    solver::SolverConfig training = cfg.training;
    training.n_r = 1;
    solver::CompiledProblem cp = solver::compile(problem, training);
    cp.weights() = archive.weights;
    const std::vector<double> u = solver::predict(cp, points);

    prepare_output(cfg.output);
    write_file(cfg.output / "predictions.csv",
               [&](std::ostream& out) { write_solution(out, problem.domain, points, u); });
    if (!options.quiet) log << "wrote " << (cfg.output / "predictions.csv").string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

}  // namespace pinn::app
