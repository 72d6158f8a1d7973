#pragma once

// Lane-batched evaluation of a fixed expression graph.
//
// A Program is a frozen, linearized copy of the nodes reachable from a set of
// outputs. Its variables are split into lane inputs (one value per lane, e.g.
// point coordinates) and shared inputs (one value for all lanes, e.g. network
// weights). The same Program is evaluated for many points by running kLanes
// points at a time: forward fills every slot for every lane, backward runs the
// numeric reverse sweep seeded per lane and accumulates shared-input adjoints
// summed over lanes.
//
// Programs are immutable after construction and may be shared between
// threads; each thread owns its own ProgramRunner.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pinn/autodiff.hpp"

namespace pinn::ad {

class Program {
 public:
  static constexpr std::size_t kLanes = 8;
  static constexpr std::uint32_t kAbsent = 0xffffffffu;

  /// Variables reachable from `outputs` that are neither lane nor shared
  /// inputs are frozen at their current binding (UnboundVariableError if
  /// unbound).
  Program(const Graph& graph, std::span<const Expr> outputs, std::span<const Expr> lane_inputs,
          std::span<const Expr> shared_inputs);

  std::size_t slot_count() const noexcept { return instructions_.size(); }
  /// Product terms held by fused linear instructions.
  std::size_t term_count() const noexcept { return terms_.size(); }
  std::size_t output_count() const noexcept { return output_slots_.size(); }
  std::size_t lane_input_count() const noexcept { return lane_slots_.size(); }
  std::size_t shared_input_count() const noexcept { return shared_slots_.size(); }

 private:
  friend class ProgramRunner;

  // Lowered instruction set: graph ops plus kLinear, a fused sum of signed
  // products that replaces single-use add/sub/neg/mul chains.
  enum class Code : std::uint8_t {
    kNop, kAdd, kSub, kMul, kDiv, kNeg, kPow, kTanh, kSin, kCos, kExp, kLinear,
  };
  // Adjoint flags: propagate to the operand.
  enum : std::uint8_t { kGradA = 1, kGradB = 2 };

  struct Instruction {
    Code code;
    std::uint8_t flags;
    bool needs_adjoint;  // depends on some lane or shared input
    std::uint32_t lhs;   // kLinear: first term
    std::uint32_t rhs;   // kLinear: one past the last term
    std::uint32_t mid;   // kLinear: first plain (single-factor) term
    double constant;     // const value, frozen var value, or pow exponent
  };
  // sign * a * b, or sign * a for plain terms, which follow the products.
  // Adjoint writes that nothing reads go to the scratch slot.
  struct Term {
    std::uint32_t a;
    std::uint32_t b;
    std::uint32_t grad_a;
    std::uint32_t grad_b;
    double sign;
  };
  std::size_t scratch_slot() const noexcept { return instructions_.size(); }

  std::vector<Instruction> instructions_;
  std::vector<Term> terms_;
  std::vector<std::uint32_t> output_slots_;
  std::vector<std::uint32_t> lane_slots_;    // kAbsent when not reachable
  std::vector<std::uint32_t> shared_slots_;  // kAbsent when not reachable
};

/// Per-thread scratch space for running a Program.
class ProgramRunner {
 public:
  explicit ProgramRunner(const Program& program);

  /// lane_inputs is laid out [input][lane] (lane_input_count * kLanes values);
  /// shared holds shared_input_count values.
  void forward(std::span<const double> lane_inputs, std::span<const double> shared);

  double output(std::size_t k, std::size_t lane) const {
    return values_[program_->output_slots_[k] * Program::kLanes + lane];
  }

  /// Reverse sweep after forward(). seeds is laid out [output][lane].
  /// Shared-input adjoints summed over lanes (in lane order) are added to
  /// shared_grad. When lane_grad is non-empty it receives the per-lane input
  /// adjoints, laid out like lane_inputs.
  void backward(std::span<const double> seeds, std::span<double> shared_grad,
                std::span<double> lane_grad = {});

  const Program& program() const noexcept { return *program_; }

 private:
  const Program* program_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
};

}  // namespace pinn::ad
