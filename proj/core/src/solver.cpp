#include "pinn/solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "pinn/program.hpp"

namespace pinn::solver {

namespace {

// Points per work item. Fixed so that the reduction order never depends on
// the worker count.
constexpr std::size_t kItemPoints = 256;
constexpr std::size_t kLanes = ad::Program::kLanes;

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum : std::uint64_t { kStreamNetwork = 0, kStreamCollocation = 1, kStreamConditions = 2 };

class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers) {
    for (std::size_t w = 1; w < workers; ++w) threads_.emplace_back([this, w] { loop(w); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const noexcept { return threads_.size() + 1; }

  // Runs task(worker) once on every worker; the caller is worker 0.
  void run(const std::function<void(std::size_t)>& task) {
    if (threads_.empty()) {
      task(0);
      return;
    }
    {
      std::lock_guard lock(mutex_);
      task_ = &task;
      pending_ = threads_.size();
      error_ = nullptr;
      ++generation_;
    }
    wake_.notify_all();
    std::exception_ptr own;
    try {
      task(0);
    } catch (...) {
      own = std::current_exception();
    }
    std::unique_lock lock(mutex_);
    done_.wait(lock, [&] { return pending_ == 0; });
    if (own) std::rethrow_exception(own);
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void loop(std::size_t worker) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t)>* task = nullptr;
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        task = task_;
      }
      std::exception_ptr failure;
      try {
        (*task)(worker);
      } catch (...) {
        failure = std::current_exception();
      }
      std::lock_guard lock(mutex_);
      if (failure && !error_) error_ = failure;
      if (--pending_ == 0) done_.notify_one();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::size_t pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

// A run of points evaluated by one program. Each point yields `outputs`
// errors e = program output - target.
struct Block {
  Group group = Group::kResidual;
  std::size_t program = 0;
  std::size_t points = 0;
  std::size_t lane_width = 0;
  std::size_t outputs = 1;
  std::vector<double> coords;   // [point][lane input]
  std::vector<double> targets;  // [point][output]
  std::size_t term_offset = 0;  // index of the first term within its group
  bool adaptive = false;        // carries lambda (residual and initial groups)
  std::optional<conditions::PeriodicBC> periodic;
  std::size_t periodic_dim = 0;
};

struct WorkItem {
  std::size_t block = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ItemResult {
  double sum = 0.0;
  std::vector<double> grad;
  bool bad = false;
  std::size_t bad_term = 0;
  double bad_value = 0.0;
};

struct Scratch {
  std::vector<ad::ProgramRunner> runners;
  std::vector<double> lanes;
  std::vector<double> seeds;
};

std::size_t group_index(Group g) { return static_cast<std::size_t>(g); }

struct OptimizerStates {
  optim::AdamState weights;
  optim::AdamState params;
};

}  // namespace

struct CompiledProblem::Impl {
  Problem problem;
  SolverConfig config;
  Mode mode = Mode::kForward;
  SolutionOverride u_override;

  net::WeightStore weights;
  std::vector<double> params;
  std::vector<std::size_t> trainable;
  std::vector<double> lambda_r;
  std::vector<double> lambda_0;
  domain::PointSet collocation;

  std::vector<std::unique_ptr<ad::Program>> programs;  // [0] evaluates u
  std::vector<Block> blocks;
  std::vector<WorkItem> items;
  TermCounts counts;
  TrainingHistory history;
  OptimizerStates optimizer;

  std::unique_ptr<WorkerPool> pool;
  mutable std::vector<Scratch> scratch;
  mutable std::vector<ItemResult> results;

  std::size_t shared_size() const { return weights.flat.size() + params.size(); }
  std::vector<double> shared_values() const {
    std::vector<double> shared(weights.flat);
    shared.insert(shared.end(), params.begin(), params.end());
    return shared;
  }
  std::size_t group_terms(Group g) const {
    switch (g) {
      case Group::kSample: return counts.samples;
      case Group::kResidual: return counts.residual;
      case Group::kBoundary: return counts.boundary;
      case Group::kInitial: return counts.initial;
    }
    return 0;
  }
};

namespace {

using Impl = CompiledProblem::Impl;

ad::Expr solution(const Impl& impl, ad::Graph& graph, std::span<const ad::Expr> point,
                  std::span<const ad::Expr> weights) {
  if (impl.u_override) return impl.u_override(point, weights);
  return net::forward(impl.problem.net, weights, graph, point);
}

// Variables for one point, keyed "<prefix><dim name>".
std::vector<ad::Expr> point_vars(ad::Graph& graph, const domain::Domain& domain,
                                 const std::string& prefix) {
  std::vector<ad::Expr> vars;
  for (const auto& d : domain.dims()) vars.push_back(graph.new_var(prefix + d.name, 0.0));
  return vars;
}

struct ProgramBuilder {
  const Impl& impl;
  ad::Graph graph;
  std::vector<ad::Expr> weights;
  std::map<std::string, ad::Expr> params;
  std::vector<ad::Expr> shared;

  explicit ProgramBuilder(const Impl& owner) : impl(owner) {
    weights = net::register_weights(graph, impl.weights);
    dsl::ParamSet current = impl.problem.params;
    current.values = impl.params;
    params = dsl::register_parameters(graph, current);
    shared = weights;
    for (const auto& name : current.names) shared.push_back(params.at(name));
  }

  dsl::UForward u_forward() {
    return [this](std::span<const ad::Expr> p) { return solution(impl, graph, p, weights); };
  }

  std::unique_ptr<ad::Program> finish(std::span<const ad::Expr> outputs,
                                      std::span<const ad::Expr> lanes) {
    return std::make_unique<ad::Program>(graph, outputs, lanes, shared);
  }
};

std::unique_ptr<ad::Program> build_u_program(const Impl& impl) {
  ProgramBuilder b(impl);
  const auto x = point_vars(b.graph, impl.problem.domain, "x:");
  const ad::Expr u = solution(impl, b.graph, x, b.weights);
  return b.finish(std::span(&u, 1), x);
}

std::unique_ptr<ad::Program> build_residual_program(const Impl& impl) {
  ProgramBuilder b(impl);
  const auto x = point_vars(b.graph, impl.problem.domain, "x:");
  const ad::Expr r = dsl::compile(impl.problem.residual, b.params, b.u_forward(), b.graph, x);
  return b.finish(std::span(&r, 1), x);
}

std::vector<ad::Expr> periodic_errors(const Impl& impl, ad::Graph& graph,
                                      std::span<const ad::Expr> weights,
                                      const conditions::PeriodicBC& bc, std::size_t dim,
                                      std::span<const ad::Expr> lower,
                                      std::span<const ad::Expr> upper) {
  const ad::Expr u_lower = solution(impl, graph, lower, weights);
  const ad::Expr u_upper = solution(impl, graph, upper, weights);
  std::vector<ad::Expr> errors;
  if (bc.match_value) errors.push_back(u_lower - u_upper);
  if (bc.match_derivative) {
    errors.push_back(graph.derive(u_lower, lower[dim]) - graph.derive(u_upper, upper[dim]));
  }
  return errors;
}

std::unique_ptr<ad::Program> build_periodic_program(const Impl& impl,
                                                    const conditions::PeriodicBC& bc,
                                                    std::size_t dim) {
  ProgramBuilder b(impl);
  const auto lower = point_vars(b.graph, impl.problem.domain, "lower:");
  const auto upper = point_vars(b.graph, impl.problem.domain, "upper:");
  const auto errors = periodic_errors(impl, b.graph, b.weights, bc, dim, lower, upper);
  std::vector<ad::Expr> lanes(lower);
  lanes.insert(lanes.end(), upper.begin(), upper.end());
  return b.finish(errors, lanes);
}

Block point_block(Group group, const domain::PointSet& points, std::vector<double> targets) {
  Block b;
  b.group = group;
  b.program = 0;
  b.points = points.size();
  b.lane_width = points.dims;
  b.coords = points.coords;
  b.targets = std::move(targets);
  return b;
}

void validate_problem(const Problem& p, Mode mode) {
  p.net.validate();
  if (p.net.input_width != p.domain.size()) {
    throw CompileError(CompileError::Kind::kWidthMismatch,
                       "network input width " + std::to_string(p.net.input_width) +
                           " does not match the " + std::to_string(p.domain.size()) +
                           " domain dimensions");
  }
  if (p.net.output_width != 1) {
    throw CompileError(CompileError::Kind::kWidthMismatch, "network output width must be 1");
  }
  if (p.residual.dimension_names() != p.domain.names()) {
    throw CompileError(CompileError::Kind::kDomainMismatch,
                       "residual was parsed against a different domain");
  }
  for (const auto& name : dsl::free_parameters(p.residual)) {
    if (p.params.index_of(name) < 0) {
      throw CompileError(CompileError::Kind::kUnknownParameter,
                         "residual uses undeclared parameter \"" + name + "\"");
    }
  }
  if (p.params.values.size() != p.params.size() || p.params.trainable.size() != p.params.size()) {
    throw CompileError(CompileError::Kind::kUnknownParameter, "inconsistent parameter set");
  }
  std::size_t initial = 0;
  for (const auto& c : p.conditions) {
    conditions::validate(c, p.domain);
    if (std::holds_alternative<conditions::InitialCondition>(c)) ++initial;
  }
  if (initial > 1) {
    throw CompileError(CompileError::Kind::kInvalidCondition,
                       "at most one initial condition is allowed");
  }
  if (p.samples) {
    const auto& s = *p.samples;
    if (s.points.size() != s.targets.size() || (!s.points.empty() && s.points.dims != p.domain.size())) {
      throw CompileError(CompileError::Kind::kInvalidSamples,
                         "sample points and targets do not match the domain");
    }
    for (std::size_t i = 0; i < s.targets.size(); ++i) {
      if (!std::isfinite(s.targets[i])) {
        throw CompileError(CompileError::Kind::kInvalidSamples,
                           "sample " + std::to_string(i) + " has a non-finite target");
      }
    }
  }
  if (mode == Mode::kDiscovery) {
    if (p.params.trainable_count() == 0) {
      throw CompileError(CompileError::Kind::kNoTrainableParameters,
                         "discovery needs at least one trainable parameter");
    }
    if (!p.samples || p.samples->points.empty()) {
      throw CompileError(CompileError::Kind::kInverseWithoutSamples,
                         "discovery needs at least one sample point");
    }
  }
}

void build_blocks(Impl& impl) {
  const Problem& p = impl.problem;
  const SolverConfig& cfg = impl.config;

  impl.programs.push_back(build_u_program(impl));

  if (p.samples && !p.samples->points.empty()) {
    impl.blocks.push_back(point_block(Group::kSample, p.samples->points, p.samples->targets));
  }

  impl.collocation = domain::sample_collocation(p.domain, cfg.n_r, cfg.sampling,
                                                derive_seed(cfg.seed, kStreamCollocation));
  impl.programs.push_back(build_residual_program(impl));
  {
    Block b = point_block(Group::kResidual, impl.collocation,
                          std::vector<double>(impl.collocation.size(), 0.0));
    b.program = impl.programs.size() - 1;
    b.adaptive = true;
    impl.blocks.push_back(std::move(b));
  }

  for (std::size_t k = 0; k < p.conditions.size(); ++k) {
    const std::uint64_t default_seed = derive_seed(cfg.seed, kStreamConditions + k);
    std::visit(
        [&](const auto& c) {
          using T = std::decay_t<decltype(c)>;
          const std::uint64_t seed = c.seed.value_or(default_seed);
          if constexpr (std::is_same_v<T, conditions::InitialCondition>) {
            const auto pts = conditions::sample_points(c, p.domain, c.n_points.value_or(cfg.n_0), seed);
            std::vector<double> targets(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) targets[i] = c.fn(pts.point(i));
            Block b = point_block(Group::kInitial, pts, std::move(targets));
            b.adaptive = true;
            impl.blocks.push_back(std::move(b));
          } else if constexpr (std::is_same_v<T, conditions::DirichletBC>) {
            const auto pts = conditions::sample_points(c, p.domain, c.n_points.value_or(cfg.n_b), seed);
            std::vector<double> targets(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) targets[i] = c.target(pts.point(i));
            impl.blocks.push_back(point_block(Group::kBoundary, pts, std::move(targets)));
          } else {
            const std::size_t dim = *p.domain.index_of(c.dim);
            const auto [lower, upper] =
                conditions::sample_pairs(c, p.domain, c.n_points.value_or(cfg.n_b), seed);
            impl.programs.push_back(build_periodic_program(impl, c, dim));
            Block b;
            b.group = Group::kBoundary;
            b.program = impl.programs.size() - 1;
            b.points = lower.size();
            b.lane_width = 2 * p.domain.size();
            b.outputs = c.orders();
            for (std::size_t i = 0; i < lower.size(); ++i) {
              const auto lo = lower.point(i);
              const auto hi = upper.point(i);
              b.coords.insert(b.coords.end(), lo.begin(), lo.end());
              b.coords.insert(b.coords.end(), hi.begin(), hi.end());
            }
            b.targets.assign(b.points * b.outputs, 0.0);
            b.periodic = c;
            b.periodic_dim = dim;
            impl.blocks.push_back(std::move(b));
          }
        },
        p.conditions[k]);
  }

  for (std::size_t bi = 0; bi < impl.blocks.size(); ++bi) {
    Block& b = impl.blocks[bi];
    const std::size_t terms = b.points * b.outputs;
    switch (b.group) {
      case Group::kSample: b.term_offset = impl.counts.samples; impl.counts.samples += terms; break;
      case Group::kResidual: b.term_offset = impl.counts.residual; impl.counts.residual += terms; break;
      case Group::kBoundary: b.term_offset = impl.counts.boundary; impl.counts.boundary += terms; break;
      case Group::kInitial: b.term_offset = impl.counts.initial; impl.counts.initial += terms; break;
    }
    for (std::size_t begin = 0; begin < b.points; begin += kItemPoints) {
      impl.items.push_back({bi, begin, std::min(b.points, begin + kItemPoints)});
    }
  }
}

void prepare_workers(const Impl& impl) {
  impl.scratch.clear();
  for (std::size_t w = 0; w < impl.pool->size(); ++w) {
    Scratch s;
    std::size_t widest = 1;
    std::size_t outputs = 1;
    for (const auto& prog : impl.programs) {
      s.runners.emplace_back(*prog);
      widest = std::max(widest, prog->lane_input_count());
      outputs = std::max(outputs, prog->output_count());
    }
    s.lanes.assign(widest * kLanes, 0.0);
    s.seeds.assign(outputs * kLanes, 0.0);
    impl.scratch.push_back(std::move(s));
  }
  impl.results.assign(impl.items.size(), ItemResult{});
}

void run_item(const Impl& impl, Scratch& scratch, const WorkItem& item, ItemResult& result,
              std::span<const double> shared, bool with_gradients, LossEvaluation& out) {
  const Block& b = impl.blocks[item.block];
  ad::ProgramRunner& runner = scratch.runners[b.program];
  const std::size_t n_terms = impl.group_terms(b.group);
  const double inv_n = 1.0 / static_cast<double>(n_terms);
  const std::vector<double>* lambda = nullptr;
  std::vector<double>* lambda_grad = nullptr;
  if (b.adaptive) {
    lambda = b.group == Group::kResidual ? &impl.lambda_r : &impl.lambda_0;
    if (with_gradients) {
      lambda_grad = b.group == Group::kResidual ? &out.grad_lambda_r : &out.grad_lambda_0;
    }
  }
  const std::size_t lambda_base = b.term_offset;

  result.sum = 0.0;
  result.bad = false;
  if (with_gradients) result.grad.assign(shared.size(), 0.0);

  for (std::size_t p = item.begin; p < item.end; p += kLanes) {
    const std::size_t n = std::min(kLanes, item.end - p);
    for (std::size_t in = 0; in < b.lane_width; ++in) {
      for (std::size_t lane = 0; lane < kLanes; ++lane) {
        const std::size_t src = p + std::min(lane, n - 1);
        scratch.lanes[in * kLanes + lane] = b.coords[src * b.lane_width + in];
      }
    }
    runner.forward(std::span(scratch.lanes).first(b.lane_width * kLanes), shared);
    std::fill(scratch.seeds.begin(), scratch.seeds.end(), 0.0);
    for (std::size_t lane = 0; lane < n; ++lane) {
      const std::size_t i = p + lane;
      for (std::size_t k = 0; k < b.outputs; ++k) {
        const double e = runner.output(k, lane) - b.targets[i * b.outputs + k];
        const std::size_t term = i * b.outputs + k;
        if (!std::isfinite(e) && !result.bad) {
          result.bad = true;
          result.bad_term = b.term_offset + term;
          result.bad_value = e;
        }
        const double lam = lambda != nullptr ? (*lambda)[lambda_base + term] : 1.0;
        const double w = lam * lam;
        result.sum += w * e * e;
        scratch.seeds[k * kLanes + lane] = 2.0 * w * e * inv_n;
        if (lambda_grad != nullptr) (*lambda_grad)[lambda_base + term] = 2.0 * lam * e * e * inv_n;
      }
    }
    if (with_gradients && !result.bad) {
      runner.backward(std::span(scratch.seeds).first(b.outputs * kLanes), result.grad);
    }
  }
}

}  // namespace

std::string_view group_name(Group g) noexcept {
  switch (g) {
    case Group::kSample: return "sample";
    case Group::kResidual: return "residual";
    case Group::kBoundary: return "boundary";
    case Group::kInitial: return "initial";
  }
  return "?";
}

void SolverConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (n_r < 1) throw Error("training.n_r must be at least 1");
  if (workers < 1) throw Error("training.workers must be at least 1");
  if (!positive(optimizer.adam.lr)) throw Error("training.optimizer.lr must be positive");
  if (optimizer.param_lr && !positive(*optimizer.param_lr)) {
    throw Error("training.optimizer.param_lr must be positive");
  }
  if (!(optimizer.adam.beta1 >= 0.0 && optimizer.adam.beta1 < 1.0)) {
    throw Error("training.optimizer.beta1 must lie in [0, 1)");
  }
  if (!(optimizer.adam.beta2 >= 0.0 && optimizer.adam.beta2 < 1.0)) {
    throw Error("training.optimizer.beta2 must lie in [0, 1)");
  }
  if (!positive(optimizer.adam.epsilon)) throw Error("training.optimizer.epsilon must be positive");
  if (!(std::isfinite(self_adaptive.lr_lambda) && self_adaptive.lr_lambda >= 0.0)) {
    throw Error("training.self_adaptive.lr_lambda must be finite and non-negative");
  }
}

NonFiniteLossError::NonFiniteLossError(Group group, std::size_t index, double value)
    : Error("non-finite " + std::string(group_name(group)) + " loss term at point " +
            std::to_string(index) + " (" + std::to_string(value) + ")"),
      group_(group),
      index_(index) {}

TrainingDiverged::TrainingDiverged(std::size_t last_good_iteration, const std::string& cause)
    : Error("training diverged after iteration " + std::to_string(last_good_iteration) + ": " +
            cause),
      last_good_(last_good_iteration) {}

CompiledProblem::CompiledProblem(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
CompiledProblem::CompiledProblem(CompiledProblem&&) noexcept = default;
CompiledProblem& CompiledProblem::operator=(CompiledProblem&&) noexcept = default;
CompiledProblem::~CompiledProblem() = default;

const Problem& CompiledProblem::problem() const noexcept { return impl_->problem; }
const SolverConfig& CompiledProblem::config() const noexcept { return impl_->config; }
Mode CompiledProblem::mode() const noexcept { return impl_->mode; }
TermCounts CompiledProblem::counts() const noexcept { return impl_->counts; }
net::WeightStore& CompiledProblem::weights() noexcept { return impl_->weights; }
const net::WeightStore& CompiledProblem::weights() const noexcept { return impl_->weights; }
std::span<double> CompiledProblem::param_values() noexcept { return impl_->params; }
std::span<const double> CompiledProblem::param_values() const noexcept { return impl_->params; }
const std::vector<std::size_t>& CompiledProblem::trainable() const noexcept {
  return impl_->trainable;
}
std::vector<double>& CompiledProblem::lambda_r() noexcept { return impl_->lambda_r; }
std::vector<double>& CompiledProblem::lambda_0() noexcept { return impl_->lambda_0; }
const std::vector<double>& CompiledProblem::lambda_r() const noexcept { return impl_->lambda_r; }
const std::vector<double>& CompiledProblem::lambda_0() const noexcept { return impl_->lambda_0; }
const domain::PointSet& CompiledProblem::collocation() const noexcept {
  return impl_->collocation;
}
const TrainingHistory& CompiledProblem::history() const noexcept { return impl_->history; }

CompiledProblem compile(Problem problem, const SolverConfig& config, Mode mode,
                        SolutionOverride u_override) {
  config.validate();
  validate_problem(problem, mode);

  auto impl = std::make_unique<Impl>();
  impl->problem = std::move(problem);
  impl->config = config;
  impl->mode = mode;
  impl->u_override = std::move(u_override);
  impl->weights = net::init_glorot(impl->problem.net, derive_seed(config.seed, kStreamNetwork));
  impl->params = impl->problem.params.values;
  if (mode == Mode::kDiscovery) {
    for (std::size_t i = 0; i < impl->problem.params.size(); ++i) {
      if (impl->problem.params.trainable[i]) impl->trainable.push_back(i);
    }
  }

  build_blocks(*impl);
  impl->lambda_r.assign(impl->counts.residual, 1.0);
  impl->lambda_0.assign(impl->counts.initial, 1.0);

  const optim::AdamConfig weight_cfg = config.optimizer.adam;
  optim::AdamConfig param_cfg = weight_cfg;
  param_cfg.lr = config.optimizer.param_lr.value_or(weight_cfg.lr);
  impl->optimizer.weights = optim::AdamState(impl->weights.flat.size(), weight_cfg);
  impl->optimizer.params = optim::AdamState(impl->trainable.size(), param_cfg);

  impl->pool = std::make_unique<WorkerPool>(config.workers);
  prepare_workers(*impl);
  return CompiledProblem(std::move(impl));
}

LossEvaluation compute_loss(const CompiledProblem& problem, bool with_gradients) {
  const Impl& impl = problem.impl();
  const std::vector<double> shared = impl.shared_values();

  LossEvaluation out;
  if (with_gradients) {
    out.grad_lambda_r.assign(impl.lambda_r.size(), 0.0);
    out.grad_lambda_0.assign(impl.lambda_0.size(), 0.0);
  }

  std::atomic<std::size_t> next{0};
  impl.pool->run([&](std::size_t worker) {
    for (std::size_t i = next.fetch_add(1); i < impl.items.size(); i = next.fetch_add(1)) {
      run_item(impl, impl.scratch[worker], impl.items[i], impl.results[i], shared, with_gradients,
               out);
    }
  });

  double sums[4] = {0.0, 0.0, 0.0, 0.0};
  if (with_gradients) out.grad_weights.assign(shared.size(), 0.0);
  for (std::size_t i = 0; i < impl.items.size(); ++i) {
    const ItemResult& r = impl.results[i];
    const Group g = impl.blocks[impl.items[i].block].group;
    if (r.bad) throw NonFiniteLossError(g, r.bad_term, r.bad_value);
    sums[group_index(g)] += r.sum;
    if (with_gradients) {
      for (std::size_t j = 0; j < shared.size(); ++j) out.grad_weights[j] += r.grad[j];
    }
  }

  auto mean = [&](Group g) {
    const std::size_t n = impl.group_terms(g);
    return n == 0 ? 0.0 : sums[group_index(g)] / static_cast<double>(n);
  };
  out.loss.l_s = mean(Group::kSample);
  out.loss.l_r = mean(Group::kResidual);
  out.loss.l_b = mean(Group::kBoundary);
  out.loss.l_0 = mean(Group::kInitial);
  out.loss.total = out.loss.l_s + out.loss.l_r + out.loss.l_b + out.loss.l_0;
  if (!std::isfinite(out.loss.total)) {
    throw NonFiniteLossError(Group::kResidual, 0, out.loss.total);
  }

  if (with_gradients) {
    const std::size_t n_w = impl.weights.flat.size();
    out.grad_params.assign(out.grad_weights.begin() + static_cast<std::ptrdiff_t>(n_w),
                           out.grad_weights.end());
    out.grad_weights.resize(n_w);
  }
  return out;
}

std::vector<double> self_adaptive_step(std::span<const double> lambda,
                                       std::span<const double> grad, double lr_lambda) {
  if (lambda.size() != grad.size()) {
    throw Error("lambda and gradient lengths differ (" + std::to_string(lambda.size()) + " vs " +
                std::to_string(grad.size()) + ")");
  }
  optim::check_finite(grad);
  std::vector<double> next(lambda.begin(), lambda.end());
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += lr_lambda * grad[i];
  return next;
}

namespace {

std::vector<std::pair<std::string, double>> trainable_values(const Impl& impl) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i : impl.trainable) out.emplace_back(impl.problem.params.names[i], impl.params[i]);
  return out;
}

struct Snapshot {
  std::vector<double> weights;
  std::vector<double> params;
  std::vector<double> lambda_r;
  std::vector<double> lambda_0;
  OptimizerStates optimizer;
};

Snapshot take_snapshot(const Impl& impl) {
  return {impl.weights.flat, impl.params, impl.lambda_r, impl.lambda_0, impl.optimizer};
}

void restore(Impl& impl, Snapshot s) {
  impl.weights.flat = std::move(s.weights);
  impl.params = std::move(s.params);
  impl.lambda_r = std::move(s.lambda_r);
  impl.lambda_0 = std::move(s.lambda_0);
  impl.optimizer = std::move(s.optimizer);
}

void apply_update(Impl& impl, const LossEvaluation& ev) {
  const OptimizerConfig& oc = impl.config.optimizer;
  std::vector<double> param_grad;
  std::vector<double> trained;
  for (std::size_t i : impl.trainable) {
    param_grad.push_back(ev.grad_params[i]);
    trained.push_back(impl.params[i]);
  }
  if (oc.kind == OptimizerConfig::Kind::kAdam) {
    optim::adam_step(impl.optimizer.weights, impl.weights.flat, ev.grad_weights);
    optim::adam_step(impl.optimizer.params, trained, param_grad);
  } else {
    optim::sgd_step(impl.weights.flat, ev.grad_weights, oc.adam.lr);
    optim::sgd_step(trained, param_grad, oc.param_lr.value_or(oc.adam.lr));
  }
  for (std::size_t k = 0; k < impl.trainable.size(); ++k) impl.params[impl.trainable[k]] = trained[k];

  if (impl.config.self_adaptive.enabled) {
    const double lr = impl.config.self_adaptive.lr_lambda;
    impl.lambda_r = self_adaptive_step(impl.lambda_r, ev.grad_lambda_r, lr);
    impl.lambda_0 = self_adaptive_step(impl.lambda_0, ev.grad_lambda_0, lr);
  }
}

}  // namespace

TrainingHistory fit(CompiledProblem& problem, std::size_t iterations,
                    const IterationCallback& on_iteration) {
  Impl& impl = problem.impl();
  const auto start = std::chrono::steady_clock::now();
  TrainingHistory added;
  std::optional<Snapshot> previous;

  for (std::size_t step = 0; step < iterations; ++step) {
    const std::size_t iteration = impl.history.size() + 1;
    LossEvaluation ev;
    try {
      ev = compute_loss(problem, true);
    } catch (const NonFiniteLossError& e) {
      if (previous) restore(impl, std::move(*previous));
      throw TrainingDiverged(iteration > 1 ? iteration - 1 : 0, e.what());
    }

    HistoryRecord record;
    record.iteration = iteration;
    record.loss = ev.loss;
    record.params = trainable_values(impl);
    record.millis =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    Snapshot before = take_snapshot(impl);
    try {
      apply_update(impl, ev);
    } catch (const optim::NonFiniteGradientError& e) {
      restore(impl, std::move(before));
      impl.history.push_back(record);
      added.push_back(record);
      throw TrainingDiverged(iteration, e.what());
    }
    previous = std::move(before);

    impl.history.push_back(record);
    added.push_back(record);
    if (on_iteration) on_iteration(record);
  }
  return added;
}

std::vector<double> predict(const CompiledProblem& problem, const domain::PointSet& points) {
  const Impl& impl = problem.impl();
  const std::size_t n = points.size();
  if (n == 0) return {};
  if (points.dims != impl.problem.domain.size()) {
    throw Error("points have " + std::to_string(points.dims) + " coordinates, the domain has " +
                std::to_string(impl.problem.domain.size()));
  }
  const std::vector<double> shared = impl.shared_values();
  const std::size_t dims = points.dims;
  const std::size_t chunks = (n + kItemPoints - 1) / kItemPoints;
  std::vector<double> out(n);

  std::atomic<std::size_t> next{0};
  impl.pool->run([&](std::size_t worker) {
    Scratch& s = impl.scratch[worker];
    ad::ProgramRunner& runner = s.runners[0];
    for (std::size_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
      const std::size_t end = std::min(n, (c + 1) * kItemPoints);
      for (std::size_t p = c * kItemPoints; p < end; p += kLanes) {
        const std::size_t m = std::min(kLanes, end - p);
        for (std::size_t d = 0; d < dims; ++d) {
          for (std::size_t lane = 0; lane < kLanes; ++lane) {
            s.lanes[d * kLanes + lane] = points.at(p + std::min(lane, m - 1), d);
          }
        }
        runner.forward(std::span(s.lanes).first(dims * kLanes), shared);
        for (std::size_t lane = 0; lane < m; ++lane) out[p + lane] = runner.output(0, lane);
      }
    }
  });
  return out;
}

std::size_t count_out_of_bounds(const domain::Domain& domain, const domain::PointSet& points) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!domain.contains(points.point(i))) ++count;
  }
  return count;
}

std::vector<std::pair<std::string, double>> recover_parameters(const CompiledProblem& problem) {
  return trainable_values(problem.impl());
}

ExpandedLoss expand_loss(const CompiledProblem& problem) {
  const Impl& impl = problem.impl();
  const domain::Domain& dom = impl.problem.domain;
  ExpandedLoss out;
  out.graph = std::make_unique<ad::Graph>();
  ad::Graph& g = *out.graph;

  out.weights = net::register_weights(g, impl.weights);
  dsl::ParamSet current = impl.problem.params;
  current.values = impl.params;
  const auto params = dsl::register_parameters(g, current);
  for (const auto& name : current.names) out.params.push_back(params.at(name));
  for (std::size_t i = 0; i < impl.lambda_r.size(); ++i) {
    out.lambda_r.push_back(g.new_var("lambda_r[" + std::to_string(i) + "]", impl.lambda_r[i]));
  }
  for (std::size_t i = 0; i < impl.lambda_0.size(); ++i) {
    out.lambda_0.push_back(g.new_var("lambda_0[" + std::to_string(i) + "]", impl.lambda_0[i]));
  }

  auto point = [&](std::span<const double> coords) {
    std::vector<ad::Expr> vars;
    for (std::size_t d = 0; d < coords.size(); ++d) {
      vars.push_back(g.new_var(g.fresh_key("p:" + dom.dim(d % dom.size()).name), coords[d]));
    }
    return vars;
  };
  const dsl::UForward u_forward = [&](std::span<const ad::Expr> p) {
    return solution(impl, g, p, out.weights);
  };

  std::vector<ad::Expr> sums(4, g.constant(0.0));
  for (const Block& b : impl.blocks) {
    ad::Expr& sum = sums[group_index(b.group)];
    for (std::size_t i = 0; i < b.points; ++i) {
      const auto vars = point(std::span(b.coords).subspan(i * b.lane_width, b.lane_width));
      std::vector<ad::Expr> errors;
      if (b.periodic) {
        const std::size_t d = dom.size();
        errors = periodic_errors(impl, g, out.weights, *b.periodic, b.periodic_dim,
                                 std::span(vars).first(d), std::span(vars).subspan(d, d));
      } else if (b.group == Group::kResidual) {
        errors.push_back(dsl::compile(impl.problem.residual, params, u_forward, g, vars));
      } else {
        errors.push_back(u_forward(vars) - b.targets[i]);
      }
      for (std::size_t k = 0; k < errors.size(); ++k) {
        ad::Expr term = ad::square(errors[k]);
        if (b.adaptive) {
          const auto& lambda = b.group == Group::kResidual ? out.lambda_r : out.lambda_0;
          term = ad::square(lambda[b.term_offset + i * b.outputs + k]) * term;
        }
        sum = sum + term;
      }
    }
  }
  auto mean = [&](Group grp) {
    const std::size_t n = impl.group_terms(grp);
    return n == 0 ? g.constant(0.0) : sums[group_index(grp)] / static_cast<double>(n);
  };
  out.l_s = mean(Group::kSample);
  out.l_r = mean(Group::kResidual);
  out.l_b = mean(Group::kBoundary);
  out.l_0 = mean(Group::kInitial);
  out.total = out.l_s + out.l_r + out.l_b + out.l_0;
  return out;
}

}  // namespace pinn::solver
