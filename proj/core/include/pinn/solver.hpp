#pragma once

// Composite PINN loss
//
//     L = L_s + L_r + L_b + L_0
//
// (sample mismatch, PDE residual, boundary, initial), the forward and inverse
// (discovery) training loops, and prediction.
//
// Every loss group is a mean of squared errors e_i^2. The residual and
// initial groups optionally carry self-adaptive multipliers lambda_i^2.
// Evaluation runs on frozen lane-batched programs: points are processed in
// fixed-size work items whose partial sums are combined in item order, so
// results do not depend on the number of workers.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pinn/autodiff.hpp"
#include "pinn/conditions.hpp"
#include "pinn/domain.hpp"
#include "pinn/dsl.hpp"
#include "pinn/net.hpp"
#include "pinn/optim.hpp"

namespace pinn::solver {

/// Observed data {x_s, t_s, y_s}.
struct SampleSet {
  domain::PointSet points;
  std::vector<double> targets;
};

struct Problem {
  domain::Domain domain;
  dsl::ResidualExpr residual;
  dsl::ParamSet params;
  std::vector<conditions::Condition> conditions;
  std::optional<SampleSet> samples;
  net::MLPSpec net;
};

enum class Mode { kForward, kDiscovery };

struct OptimizerConfig {
  enum class Kind { kAdam, kSgd };
  Kind kind = Kind::kAdam;
  /// Learning rate and moments; for SGD only `lr` is used.
  optim::AdamConfig adam;
  /// Learning rate for trainable PDE parameters (defaults to adam.lr).
  std::optional<double> param_lr;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct SelfAdaptiveConfig {
  bool enabled = false;
  double lr_lambda = 5e-3;

  friend bool operator==(const SelfAdaptiveConfig&, const SelfAdaptiveConfig&) = default;
};

struct SolverConfig {
  std::size_t n_r = 10000;
  std::size_t n_0 = 100;
  std::size_t n_b = 100;
  domain::SamplingStrategy sampling = domain::SamplingStrategy::kLatinHypercube;
  OptimizerConfig optimizer;
  std::size_t iterations = 1000;
  SelfAdaptiveConfig self_adaptive;
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  /// Throws pinn::Error naming the offending field.
  void validate() const;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct LossBreakdown {
  double l_s = 0.0;
  double l_r = 0.0;
  double l_b = 0.0;
  double l_0 = 0.0;
  double total = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

enum class Group { kSample, kResidual, kBoundary, kInitial };
std::string_view group_name(Group g) noexcept;

/// Number of squared-error terms per group.
struct TermCounts {
  std::size_t samples = 0;
  std::size_t residual = 0;
  std::size_t boundary = 0;
  std::size_t initial = 0;

  std::size_t total() const noexcept { return samples + residual + boundary + initial; }
};

struct HistoryRecord {
  std::size_t iteration = 0;  // 1-based
  LossBreakdown loss;         // evaluated before this iteration's update
  std::vector<std::pair<std::string, double>> params;
  double millis = 0.0;  // wall time since fit() started
};

using TrainingHistory = std::vector<HistoryRecord>;

/// Same records ignoring wall time.
bool same_trajectory(const TrainingHistory& a, const TrainingHistory& b);

class CompileError : public Error {
 public:
  enum class Kind {
    kWidthMismatch,
    kDomainMismatch,
    kUnknownParameter,
    kInverseWithoutSamples,
    kNoTrainableParameters,
    kInvalidSamples,
    kInvalidCondition,
  };
  CompileError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Non-finite loss term: names the group and the point index in it.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(Group group, std::size_t index, double value);
  Group group() const noexcept { return group_; }
  std::size_t index() const noexcept { return index_; }

 private:
  Group group_;
  std::size_t index_;
};

/// Training stopped on a non-finite loss or gradient. The problem is rolled
/// back to the state evaluated at history record `last_good_iteration`
/// (0: nothing was evaluated successfully).
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t last_good_iteration, const std::string& cause);
  std::size_t last_good_iteration() const noexcept { return last_good_; }

 private:
  std::size_t last_good_;
};

/// Replaces the network output u(point; w). Receives the point nodes and the
/// weight variables; used to inject closed-form solutions.
using SolutionOverride =
    std::function<ad::Expr(std::span<const ad::Expr> point, std::span<const ad::Expr> weights)>;

class CompiledProblem {
 public:
  CompiledProblem(CompiledProblem&&) noexcept;
  CompiledProblem& operator=(CompiledProblem&&) noexcept;
  ~CompiledProblem();

  const Problem& problem() const noexcept;
  const SolverConfig& config() const noexcept;
  Mode mode() const noexcept;
  TermCounts counts() const noexcept;

  net::WeightStore& weights() noexcept;
  const net::WeightStore& weights() const noexcept;
  /// Current PDE parameter values, in ParamSet order.
  std::span<double> param_values() noexcept;
  std::span<const double> param_values() const noexcept;
  /// Indices (into param_values) updated by training; empty in forward mode.
  const std::vector<std::size_t>& trainable() const noexcept;
  /// Self-adaptive multipliers (all 1.0 at compile time).
  std::vector<double>& lambda_r() noexcept;
  std::vector<double>& lambda_0() noexcept;
  const std::vector<double>& lambda_r() const noexcept;
  const std::vector<double>& lambda_0() const noexcept;

  const domain::PointSet& collocation() const noexcept;
  const TrainingHistory& history() const noexcept;

  // Internal state; only the solver implementation looks inside.
  struct Impl;
  explicit CompiledProblem(std::unique_ptr<Impl> impl);
  Impl& impl() noexcept { return *impl_; }
  const Impl& impl() const noexcept { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

/// Samples points, initializes the network and lambda, and freezes the loss
/// programs. Throws CompileError, ConditionError or DomainError.
CompiledProblem compile(Problem problem, const SolverConfig& config, Mode mode = Mode::kForward,
                        SolutionOverride u_override = {});

struct LossEvaluation {
  LossBreakdown loss;
  std::vector<double> grad_weights;  // d total / d w
  std::vector<double> grad_params;   // d total / d param, every parameter
  std::vector<double> grad_lambda_r;
  std::vector<double> grad_lambda_0;
};

/// Loss at the problem's current weights, parameters and lambda. Gradients
/// are left empty unless requested. Throws NonFiniteLossError.
LossEvaluation compute_loss(const CompiledProblem& problem, bool with_gradients = true);

using IterationCallback = std::function<void(const HistoryRecord&)>;

/// Runs `iterations` descent steps (plus lambda ascent when enabled),
/// appending to the problem's history. Returns the records added by this
/// call. Throws TrainingDiverged.
TrainingHistory fit(CompiledProblem& problem, std::size_t iterations,
                    const IterationCallback& on_iteration = {});

/// lambda + lr * grad (gradient ascent). Throws optim::NonFiniteGradientError.
std::vector<double> self_adaptive_step(std::span<const double> lambda,
                                       std::span<const double> grad, double lr_lambda);

/// u(point; w) for each point.
std::vector<double> predict(const CompiledProblem& problem, const domain::PointSet& points);

/// Number of points outside the domain box (still predicted, flagged only).
std::size_t count_out_of_bounds(const domain::Domain& domain, const domain::PointSet& points);

/// Trainable parameters and their current values; empty in forward mode.
std::vector<std::pair<std::string, double>> recover_parameters(const CompiledProblem& problem);

/// The whole loss as one symbolic graph, for checking the batched evaluator
/// on small problems. Variables are bound to the problem's current state.
struct ExpandedLoss {
  std::unique_ptr<ad::Graph> graph;
  ad::Expr l_s, l_r, l_b, l_0, total;
  std::vector<ad::Expr> weights;
  std::vector<ad::Expr> params;
  std::vector<ad::Expr> lambda_r;
  std::vector<ad::Expr> lambda_0;
};
ExpandedLoss expand_loss(const CompiledProblem& problem);

/// One JSON object per line: iteration, l_s, l_r, l_b, l_0, total, params,
/// millis.
void write_jsonl(std::ostream& out, const TrainingHistory& history);

}  // namespace pinn::solver
