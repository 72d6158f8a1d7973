#include "pinn/program.hpp"

#include "fastmath.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pinn::ad {

namespace {

constexpr std::size_t L = Program::kLanes;

bool is_linear_op(Op op) { return op == Op::kAdd || op == Op::kSub; }

}  // namespace

Program::Program(const Graph& graph, std::span<const Expr> outputs,
                 std::span<const Expr> lane_inputs, std::span<const Expr> shared_inputs) {
  std::uint32_t top = 0;
  for (const Expr& e : outputs) {
    if (!graph.owns(e)) throw ForeignNodeError("program output does not belong to the graph");
    top = std::max(top, e.id + 1);
  }
  for (const Expr& e : lane_inputs) {
    if (!graph.is_var(e)) throw NotAVariableError("program lane input is not a variable");
  }
  for (const Expr& e : shared_inputs) {
    if (!graph.is_var(e)) throw NotAVariableError("program shared input is not a variable");
  }

  // Reachability and use counts.
  std::vector<char> reach(top, 0);
  std::vector<std::uint32_t> uses(top, 0);
  std::vector<std::uint32_t> user(top, 0);
  for (const Expr& e : outputs) {
    reach[e.id] = 1;
    uses[e.id] += 2;  // outputs are never absorbed
  }
  for (std::uint32_t id = top; id-- > 0;) {
    if (!reach[id]) continue;
    const Node& n = graph.node(id);
    const int k = arity(n.op);
    if (k >= 1) {
      reach[n.lhs] = 1;
      ++uses[n.lhs];
      user[n.lhs] = id;
    }
    if (k == 2) {
      reach[n.rhs] = 1;
      ++uses[n.rhs];
      user[n.rhs] = id;
    }
  }

  // 0 = frozen, 1 = lane input, 2 = shared input
  std::vector<char> input_kind(top, 0);
  for (const Expr& e : lane_inputs) {
    if (e.id < top) input_kind[e.id] = 1;
  }
  for (const Expr& e : shared_inputs) {
    if (e.id < top) input_kind[e.id] = 2;
  }

  // Single-use add/sub/neg/mul nodes feeding an add/sub are folded into the
  // consumer's term list instead of getting a slot of their own.
  std::vector<char> absorbed(top, 0);
  for (std::uint32_t id = 0; id < top; ++id) {
    if (!reach[id] || uses[id] != 1) continue;
    const Op op = graph.node(id).op;
    if (op != Op::kAdd && op != Op::kSub && op != Op::kNeg && op != Op::kMul) continue;
    absorbed[id] = is_linear_op(graph.node(user[id]).op) ? 1 : 0;
  }

  std::vector<std::uint32_t> slot_of(top, kAbsent);
  auto expand = [&](auto& self, std::uint32_t id, bool negative, bool root) -> void {
    const Node& n = graph.node(id);
    const bool open = root || absorbed[id];
    if (open && n.op == Op::kAdd) {
      self(self, n.lhs, negative, false);
      self(self, n.rhs, negative, false);
    } else if (open && n.op == Op::kSub) {
      self(self, n.lhs, negative, false);
      self(self, n.rhs, !negative, false);
    } else if (open && n.op == Op::kNeg) {
      self(self, n.lhs, !negative, false);
    } else if (open && n.op == Op::kMul) {
      terms_.push_back({slot_of[n.lhs], slot_of[n.rhs], 0, 0, negative ? -1.0 : 1.0});
    } else {
      terms_.push_back({slot_of[id], kAbsent, 0, 0, negative ? -1.0 : 1.0});
    }
  };

  for (std::uint32_t id = 0; id < top; ++id) {
    if (!reach[id] || absorbed[id]) continue;
    const Node& n = graph.node(id);
    Instruction ins{Code::kNop, 0, false, 0, 0, 0, n.constant};
    const int k = arity(n.op);
    switch (n.op) {
      case Op::kConst: break;
      case Op::kVar:
        if (input_kind[id] == 0) {
          if (!graph.var_bound(n.lhs)) throw UnboundVariableError(graph.var_key(n.lhs));
          ins.constant = graph.var_value(n.lhs);
        } else {
          ins.needs_adjoint = true;
        }
        break;
      case Op::kAdd: ins.code = Code::kAdd; break;
      case Op::kSub: ins.code = Code::kSub; break;
      case Op::kMul: ins.code = Code::kMul; break;
      case Op::kDiv: ins.code = Code::kDiv; break;
      case Op::kNeg: ins.code = Code::kNeg; break;
      case Op::kPowConst: ins.code = Code::kPow; break;
      case Op::kTanh: ins.code = Code::kTanh; break;
      case Op::kSin: ins.code = Code::kSin; break;
      case Op::kCos: ins.code = Code::kCos; break;
      case Op::kExp: ins.code = Code::kExp; break;
    }
    const bool fuse = is_linear_op(n.op) && (absorbed[n.lhs] || absorbed[n.rhs]);
    if (fuse) {
      ins.code = Code::kLinear;
      ins.lhs = static_cast<std::uint32_t>(terms_.size());
      expand(expand, id, false, true);
      ins.rhs = static_cast<std::uint32_t>(terms_.size());
      const auto plain = std::stable_partition(terms_.begin() + ins.lhs, terms_.end(),
                                               [](const Term& t) { return t.b != kAbsent; });
      ins.mid = static_cast<std::uint32_t>(plain - terms_.begin());
      for (std::uint32_t t = ins.lhs; t < ins.rhs; ++t) {
        const Term& term = terms_[t];
        ins.needs_adjoint = ins.needs_adjoint || instructions_[term.a].needs_adjoint ||
                            (term.b != kAbsent && instructions_[term.b].needs_adjoint);
      }
    } else {
      if (k >= 1) {
        ins.lhs = slot_of[n.lhs];
        ins.needs_adjoint = ins.needs_adjoint || instructions_[ins.lhs].needs_adjoint;
      }
      if (k == 2) {
        ins.rhs = slot_of[n.rhs];
        ins.needs_adjoint = ins.needs_adjoint || instructions_[ins.rhs].needs_adjoint;
      }
    }
    slot_of[id] = static_cast<std::uint32_t>(instructions_.size());
    instructions_.push_back(ins);
  }

  for (const Expr& e : outputs) output_slots_.push_back(slot_of[e.id]);
  for (const Expr& e : lane_inputs) lane_slots_.push_back(e.id < top ? slot_of[e.id] : kAbsent);
  for (const Expr& e : shared_inputs) {
    shared_slots_.push_back(e.id < top ? slot_of[e.id] : kAbsent);
  }

  auto grad_bit = [&](std::uint32_t slot, std::uint8_t bit) -> std::uint8_t {
    return instructions_[slot].needs_adjoint ? bit : 0;
  };
  const auto scratch = static_cast<std::uint32_t>(scratch_slot());
  for (Term& term : terms_) {
    term.grad_a = instructions_[term.a].needs_adjoint ? term.a : scratch;
    if (term.b != kAbsent) term.grad_b = instructions_[term.b].needs_adjoint ? term.b : scratch;
  }
  for (Instruction& ins : instructions_) {
    if (!ins.needs_adjoint) continue;
    switch (ins.code) {
      case Code::kNop:
      case Code::kLinear:
        break;
      case Code::kAdd:
      case Code::kSub:
      case Code::kMul:
      case Code::kDiv:
        ins.flags = grad_bit(ins.lhs, kGradA) | grad_bit(ins.rhs, kGradB);
        break;
      default:
        ins.flags = grad_bit(ins.lhs, kGradA);
        break;
    }
  }
}

ProgramRunner::ProgramRunner(const Program& program)
    : program_(&program),
      values_(program.slot_count() * L, 0.0),
      adjoints_((program.slot_count() + 1) * L, 0.0) {
  const auto& ins = program.instructions_;
  for (std::size_t i = 0; i < ins.size(); ++i) {
    if (ins[i].code == Program::Code::kNop) std::fill_n(values_.begin() + i * L, L, ins[i].constant);
  }
}

void ProgramRunner::forward(std::span<const double> lane_inputs, std::span<const double> shared) {
  using Code = Program::Code;
  const Program& p = *program_;
  double* v = values_.data();
  for (std::size_t k = 0; k < p.lane_slots_.size(); ++k) {
    if (p.lane_slots_[k] == Program::kAbsent) continue;
    std::copy_n(lane_inputs.data() + k * L, L, v + p.lane_slots_[k] * L);
  }
  for (std::size_t k = 0; k < p.shared_slots_.size(); ++k) {
    if (p.shared_slots_[k] == Program::kAbsent) continue;
    std::fill_n(v + p.shared_slots_[k] * L, L, shared[k]);
  }

  const Program::Term* terms = p.terms_.data();
  const auto& ins = p.instructions_;
  const std::size_t n = ins.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& in = ins[i];
    double* __restrict out = v + i * L;
    const double* __restrict a = v + static_cast<std::size_t>(in.lhs) * L;
    const double* __restrict b = v + static_cast<std::size_t>(in.rhs) * L;
    switch (in.code) {
      case Code::kNop:
        break;
      case Code::kLinear: {
        double acc[L] = {};
        for (std::uint32_t t = in.lhs; t < in.mid; ++t) {
          const auto& term = terms[t];
          const double* __restrict ta = v + static_cast<std::size_t>(term.a) * L;
          const double* __restrict tb = v + static_cast<std::size_t>(term.b) * L;
          for (std::size_t l = 0; l < L; ++l) acc[l] += term.sign * ta[l] * tb[l];
        }
        for (std::uint32_t t = in.mid; t < in.rhs; ++t) {
          const auto& term = terms[t];
          const double* __restrict ta = v + static_cast<std::size_t>(term.a) * L;
          for (std::size_t l = 0; l < L; ++l) acc[l] += term.sign * ta[l];
        }
        for (std::size_t l = 0; l < L; ++l) out[l] = acc[l];
        break;
      }
      case Code::kAdd:
        for (std::size_t l = 0; l < L; ++l) out[l] = a[l] + b[l];
        break;
      case Code::kSub:
        for (std::size_t l = 0; l < L; ++l) out[l] = a[l] - b[l];
        break;
      case Code::kMul:
        for (std::size_t l = 0; l < L; ++l) out[l] = a[l] * b[l];
        break;
      case Code::kDiv:
        for (std::size_t l = 0; l < L; ++l) out[l] = a[l] / b[l];
        break;
      case Code::kNeg:
        for (std::size_t l = 0; l < L; ++l) out[l] = -a[l];
        break;
      case Code::kPow:
        for (std::size_t l = 0; l < L; ++l) out[l] = std::pow(a[l], in.constant);
        break;
      case Code::kTanh:
        for (std::size_t l = 0; l < L; ++l) out[l] = detail::tanh(a[l]);
        break;
      case Code::kSin:
        for (std::size_t l = 0; l < L; ++l) out[l] = std::sin(a[l]);
        break;
      case Code::kCos:
        for (std::size_t l = 0; l < L; ++l) out[l] = std::cos(a[l]);
        break;
      case Code::kExp:
        for (std::size_t l = 0; l < L; ++l) out[l] = std::exp(a[l]);
        break;
    }
  }
}

void ProgramRunner::backward(std::span<const double> seeds, std::span<double> shared_grad,
                             std::span<double> lane_grad) {
  using Code = Program::Code;
  const Program& p = *program_;
  const auto& ins = p.instructions_;
  const std::size_t n = ins.size();
  const double* v = values_.data();
  double* adj = adjoints_.data();

  // Adjoints are all zero between sweeps: each slot is cleared once it has
  // been consumed, input slots once they have been reported.
  for (std::size_t k = 0; k < p.output_slots_.size(); ++k) {
    const std::size_t s = p.output_slots_[k];
    if (!ins[s].needs_adjoint) continue;
    for (std::size_t l = 0; l < L; ++l) adj[s * L + l] += seeds[k * L + l];
  }

  const Program::Term* terms = p.terms_.data();
  for (std::size_t i = n; i-- > 0;) {
    const auto& in = ins[i];
    if (!in.needs_adjoint) continue;
    double g[L];
    for (std::size_t l = 0; l < L; ++l) g[l] = adj[i * L + l];
    if (in.code != Code::kNop) std::fill_n(adj + i * L, L, 0.0);
    const double* __restrict self = v + i * L;
    const std::uint8_t f = in.flags;
    const bool da = (f & Program::kGradA) != 0;
    const bool db = (f & Program::kGradB) != 0;
    const double* __restrict va = v + static_cast<std::size_t>(in.lhs) * L;
    const double* __restrict vb = v + static_cast<std::size_t>(in.rhs) * L;
    double* ga = adj + static_cast<std::size_t>(in.lhs) * L;
    double* gb = adj + static_cast<std::size_t>(in.rhs) * L;
    switch (in.code) {
      case Code::kNop:
        break;
      case Code::kLinear:
        for (std::uint32_t t = in.lhs; t < in.mid; ++t) {
          const auto& term = terms[t];
          const double* __restrict ta = v + static_cast<std::size_t>(term.a) * L;
          const double* __restrict tb = v + static_cast<std::size_t>(term.b) * L;
          double* gta = adj + static_cast<std::size_t>(term.grad_a) * L;
          double* gtb = adj + static_cast<std::size_t>(term.grad_b) * L;
          double gs[L];
          for (std::size_t l = 0; l < L; ++l) gs[l] = term.sign * g[l];
          for (std::size_t l = 0; l < L; ++l) gta[l] += gs[l] * tb[l];
          for (std::size_t l = 0; l < L; ++l) gtb[l] += gs[l] * ta[l];
        }
        for (std::uint32_t t = in.mid; t < in.rhs; ++t) {
          const auto& term = terms[t];
          double* gta = adj + static_cast<std::size_t>(term.grad_a) * L;
          for (std::size_t l = 0; l < L; ++l) gta[l] += term.sign * g[l];
        }
        break;
      case Code::kAdd:
        if (da) for (std::size_t l = 0; l < L; ++l) ga[l] += g[l];
        if (db) for (std::size_t l = 0; l < L; ++l) gb[l] += g[l];
        break;
      case Code::kSub:
        if (da) for (std::size_t l = 0; l < L; ++l) ga[l] += g[l];
        if (db) for (std::size_t l = 0; l < L; ++l) gb[l] -= g[l];
        break;
      case Code::kMul:
        if (da) for (std::size_t l = 0; l < L; ++l) ga[l] += g[l] * vb[l];
        if (db) for (std::size_t l = 0; l < L; ++l) gb[l] += g[l] * va[l];
        break;
      case Code::kDiv:
        if (da) for (std::size_t l = 0; l < L; ++l) ga[l] += g[l] / vb[l];
        if (db) for (std::size_t l = 0; l < L; ++l) gb[l] -= g[l] * self[l] / vb[l];
        break;
      case Code::kNeg:
        if (da) for (std::size_t l = 0; l < L; ++l) ga[l] -= g[l];
        break;
      case Code::kPow:
        if (da) {
          for (std::size_t l = 0; l < L; ++l) {
            ga[l] += g[l] * in.constant * std::pow(va[l], in.constant - 1.0);
          }
        }
        break;
      case Code::kTanh:
        if (da) for (std::size_t l = 0; l < L; ++l) ga[l] += g[l] * (1.0 - self[l] * self[l]);
        break;
      case Code::kSin:
        if (da) for (std::size_t l = 0; l < L; ++l) ga[l] += g[l] * std::cos(va[l]);
        break;
      case Code::kCos:
        if (da) for (std::size_t l = 0; l < L; ++l) ga[l] -= g[l] * std::sin(va[l]);
        break;
      case Code::kExp:
        if (da) for (std::size_t l = 0; l < L; ++l) ga[l] += g[l] * self[l];
        break;
    }
  }

  for (std::size_t k = 0; k < p.shared_slots_.size(); ++k) {
    const std::uint32_t s = p.shared_slots_[k];
    if (s == Program::kAbsent) continue;
    double sum = 0.0;
    for (std::size_t l = 0; l < L; ++l) sum += adj[s * L + l];
    shared_grad[k] += sum;
  }
  if (!lane_grad.empty()) {
    for (std::size_t k = 0; k < p.lane_slots_.size(); ++k) {
      const std::uint32_t s = p.lane_slots_[k];
      for (std::size_t l = 0; l < L; ++l) {
        lane_grad[k * L + l] = s == Program::kAbsent ? 0.0 : adj[s * L + l];
      }
    }
  }
  for (const auto* slots : {&p.shared_slots_, &p.lane_slots_}) {
    for (std::uint32_t s : *slots) {
      if (s != Program::kAbsent) std::fill_n(adj + s * L, L, 0.0);
    }
  }
  std::fill_n(adj + p.scratch_slot() * L, L, 0.0);
}

}  // namespace pinn::ad
