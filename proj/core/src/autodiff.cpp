#include "pinn/autodiff.hpp"

#include "fastmath.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

namespace pinn::ad {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

bool is_commutative(Op op) { return op == Op::kAdd || op == Op::kMul; }

}  // namespace

int arity(Op op) noexcept {
  switch (op) {
    case Op::kConst:
    case Op::kVar:
      return 0;
    case Op::kNeg:
    case Op::kPowConst:
    case Op::kTanh:
    case Op::kSin:
    case Op::kCos:
    case Op::kExp:
      return 1;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv:
      return 2;
  }
  return 0;
}

std::string_view op_name(Op op) noexcept {
  switch (op) {
    case Op::kConst: return "const";
    case Op::kVar: return "var";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kPowConst: return "pow_const";
    case Op::kTanh: return "tanh";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kExp: return "exp";
  }
  return "?";
}

double apply_primitive(Op op, double a, double b, double constant) noexcept {
  switch (op) {
    case Op::kConst: return constant;
    case Op::kVar: return a;
    case Op::kAdd: return a + b;
    case Op::kSub: return a - b;
    case Op::kMul: return a * b;
    case Op::kDiv: return a / b;
    case Op::kNeg: return -a;
    case Op::kPowConst: return std::pow(a, constant);
    case Op::kTanh: return detail::tanh(a);
    case Op::kSin: return std::sin(a);
    case Op::kCos: return std::cos(a);
    case Op::kExp: return std::exp(a);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

DuplicateKeyError::DuplicateKeyError(const std::string& key)
    : Error("variable key already registered: \"" + key + "\"") {}

UnboundVariableError::UnboundVariableError(const std::string& key)
    : Error("unbound variable \"" + key + "\""), key_(key) {}

NonFiniteError::NonFiniteError(std::uint32_t node, Op op, double value)
    : Error([&] {
        std::ostringstream os;
        os << "non-finite value " << value << " at node " << node << " (" << op_name(op) << ")";
        return os.str();
      }()),
      node_(node) {}

std::size_t Graph::NodeKeyHash::operator()(const NodeKey& k) const noexcept {
  std::uint64_t h = static_cast<std::uint64_t>(k.op);
  h = h * 0x9E3779B97F4A7C15ull ^ k.lhs;
  h = h * 0x9E3779B97F4A7C15ull ^ k.rhs;
  h = h * 0x9E3779B97F4A7C15ull ^ k.bits;
  h ^= h >> 29;
  return static_cast<std::size_t>(h);
}

void Graph::check_owned(Expr e) const {
  if (!owns(e)) {
    throw ForeignNodeError("node " + std::to_string(e.id) + " does not belong to this graph");
  }
}

const Node& Graph::node(Expr e) const {
  check_owned(e);
  return nodes_[e.id];
}

bool Graph::is_var(Expr e) const { return owns(e) && nodes_[e.id].op == Op::kVar; }

bool Graph::is_constant(Expr e, double value) const {
  return owns(e) && nodes_[e.id].op == Op::kConst && nodes_[e.id].constant == value;
}

Expr Graph::make(Op op, std::uint32_t lhs, std::uint32_t rhs, double constant) {
  const NodeKey key{op, lhs, rhs, std::bit_cast<std::uint64_t>(constant)};
  if (auto it = interned_.find(key); it != interned_.end()) return Expr{this, it->second};
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{op, lhs, rhs, constant});
  interned_.emplace(key, id);
  return Expr{this, id};
}

Expr Graph::constant(double value) {
  if (value == 0.0) value = 0.0;  // fold -0 into +0
  return make(Op::kConst, 0, 0, value);
}

Expr Graph::new_var(const std::string& key) {
  if (var_index_.contains(key)) throw DuplicateKeyError(key);
  const auto slot = static_cast<std::uint32_t>(var_keys_.size());
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{Op::kVar, slot, 0, 0.0});
  var_index_.emplace(key, id);
  var_keys_.push_back(key);
  var_values_.push_back(std::numeric_limits<double>::quiet_NaN());
  var_bound_.push_back(0);
  return Expr{this, id};
}

Expr Graph::new_var(const std::string& key, double value) {
  Expr v = new_var(key);
  bind(v, value);
  return v;
}

std::string Graph::fresh_key(std::string_view prefix) const {
  std::string key;
  for (std::size_t n = var_keys_.size();; ++n) {
    key = std::string(prefix) + "#" + std::to_string(n);
    if (!var_index_.contains(key)) return key;
  }
}

void Graph::bind(std::string_view key, double value) { bind(var(key), value); }

void Graph::bind(Expr v, double value) {
  if (!is_var(v)) throw NotAVariableError("bind target is not a variable node");
  const auto slot = nodes_[v.id].lhs;
  var_values_[slot] = value;
  var_bound_[slot] = 1;
}

bool Graph::is_bound(std::string_view key) const {
  auto it = var_index_.find(std::string(key));
  return it != var_index_.end() && var_bound_[nodes_[it->second].lhs] != 0;
}

bool Graph::has_var(std::string_view key) const { return var_index_.contains(std::string(key)); }

Expr Graph::var(std::string_view key) const {
  auto it = var_index_.find(std::string(key));
  if (it == var_index_.end()) throw UnboundVariableError(std::string(key));
  return Expr{const_cast<Graph*>(this), it->second};
}

const std::string& Graph::key_of(Expr v) const {
  if (!is_var(v)) throw NotAVariableError("node is not a variable");
  return var_keys_[nodes_[v.id].lhs];
}

Expr Graph::apply(Op op, std::span<const Expr> operands) {
  if (op == Op::kConst || op == Op::kVar || op == Op::kPowConst) {
    throw ArityError(std::string("apply cannot build '") + std::string(op_name(op)) +
                     "' nodes; use constant(), new_var() or pow_const()");
  }
  if (static_cast<int>(operands.size()) != arity(op)) {
    throw ArityError(std::string(op_name(op)) + " takes " + std::to_string(arity(op)) +
                     " operand(s), got " + std::to_string(operands.size()));
  }
  for (const Expr& e : operands) check_owned(e);
  return simplify_or_make(op, operands[0], operands.size() > 1 ? operands[1] : Expr{this, 0});
}

Expr Graph::apply(Op op, Expr a) {
  const Expr ops[] = {a};
  return apply(op, ops);
}

Expr Graph::apply(Op op, Expr a, Expr b) {
  const Expr ops[] = {a, b};
  return apply(op, ops);
}

Expr Graph::simplify_or_make(Op op, Expr a, Expr b) {
  const Node na = nodes_[a.id];
  const bool a_const = na.op == Op::kConst;
  const double av = na.constant;
  bool b_const = false;
  double bv = 0.0;
  if (arity(op) == 2) {
    b_const = nodes_[b.id].op == Op::kConst;
    bv = nodes_[b.id].constant;
  }

  if (a_const && (arity(op) == 1 || b_const)) {
    const double folded = apply_primitive(op, av, bv, 0.0);
    if (std::isfinite(folded)) return constant(folded);
  }

  switch (op) {
    case Op::kAdd:
      if (a_const && av == 0.0) return b;
      if (b_const && bv == 0.0) return a;
      break;
    case Op::kSub:
      if (b_const && bv == 0.0) return a;
      if (a_const && av == 0.0) return simplify_or_make(Op::kNeg, b, b);
      if (a.id == b.id) return constant(0.0);
      break;
    case Op::kMul:
      if ((a_const && av == 0.0) || (b_const && bv == 0.0)) return constant(0.0);
      if (a_const && av == 1.0) return b;
      if (b_const && bv == 1.0) return a;
      if (a_const && av == -1.0) return simplify_or_make(Op::kNeg, b, b);
      if (b_const && bv == -1.0) return simplify_or_make(Op::kNeg, a, a);
      break;
    case Op::kDiv:
      if (b_const && bv == 1.0) return a;
      break;
    case Op::kNeg:
      if (na.op == Op::kNeg) return Expr{this, na.lhs};
      break;
    default:
      break;
  }

  std::uint32_t lhs = a.id;
  std::uint32_t rhs = arity(op) == 2 ? b.id : 0;
  if (is_commutative(op) && rhs < lhs) std::swap(lhs, rhs);
  return make(op, lhs, rhs, 0.0);
}

Expr Graph::pow_const(Expr base, double exponent) {
  check_owned(base);
  if (!std::isfinite(exponent)) throw ArityError("pow_const exponent must be finite");
  if (exponent == 0.0) return constant(1.0);
  if (exponent == 1.0) return base;
  const Node nb = nodes_[base.id];
  if (nb.op == Op::kConst) {
    const double folded = std::pow(nb.constant, exponent);
    if (std::isfinite(folded)) return constant(folded);
  }
  return make(Op::kPowConst, base.id, 0, exponent);
}

std::vector<char> Graph::reachable(std::span<const Expr> outputs) const {
  std::uint32_t top = 0;
  for (const Expr& e : outputs) {
    check_owned(e);
    top = std::max(top, e.id + 1);
  }
  std::vector<char> reach(top, 0);
  for (const Expr& e : outputs) reach[e.id] = 1;
  for (std::uint32_t id = top; id-- > 0;) {
    if (!reach[id]) continue;
    const Node& n = nodes_[id];
    const int k = arity(n.op);
    if (k >= 1) reach[n.lhs] = 1;
    if (k == 2) reach[n.rhs] = 1;
  }
  return reach;
}

Graph::Slots Graph::slot_values(const std::map<std::string, double>* overrides) const {
  Slots slots{var_values_, var_bound_};
  if (overrides != nullptr) {
    for (const auto& [key, value] : *overrides) {
      auto it = var_index_.find(key);
      if (it == var_index_.end()) continue;
      slots.values[nodes_[it->second].lhs] = value;
      slots.bound[nodes_[it->second].lhs] = 1;
    }
  }
  return slots;
}

std::vector<double> Graph::forward_values(const std::vector<char>& reach,
                                          const Slots& slots) const {
  std::vector<double> values(reach.size(), 0.0);
  for (std::uint32_t id = 0; id < reach.size(); ++id) {
    if (!reach[id]) continue;
    const Node& n = nodes_[id];
    double v;
    switch (n.op) {
      case Op::kConst:
        v = n.constant;
        break;
      case Op::kVar:
        if (!slots.bound[n.lhs]) throw UnboundVariableError(var_keys_[n.lhs]);
        v = slots.values[n.lhs];
        break;
      default:
        v = apply_primitive(n.op, values[n.lhs], arity(n.op) == 2 ? values[n.rhs] : 0.0,
                            n.constant);
        break;
    }
    if (!std::isfinite(v)) throw NonFiniteError(id, n.op, v);
    values[id] = v;
  }
  return values;
}

double Graph::eval(Expr node) const {
  const Expr outs[] = {node};
  const auto reach = reachable(outs);
  return forward_values(reach, slot_values(nullptr))[node.id];
}

double Graph::eval(Expr node, const std::map<std::string, double>& bindings) const {
  const Expr outs[] = {node};
  const auto reach = reachable(outs);
  return forward_values(reach, slot_values(&bindings))[node.id];
}

std::vector<double> Graph::eval_many(std::span<const Expr> nodes) const {
  if (nodes.empty()) return {};
  const auto reach = reachable(nodes);
  const auto values = forward_values(reach, slot_values(nullptr));
  std::vector<double> out;
  out.reserve(nodes.size());
  for (const Expr& e : nodes) out.push_back(values[e.id]);
  return out;
}

Expr Graph::derive(Expr output, Expr wrt) {
  const Expr w[] = {wrt};
  return derive(output, w).front();
}

std::vector<Expr> Graph::derive(Expr output, std::span<const Expr> wrt) {
  check_owned(output);
  for (const Expr& w : wrt) {
    check_owned(w);
    if (nodes_[w.id].op != Op::kVar) {
      throw NotAVariableError("derive: node " + std::to_string(w.id) + " is not a variable");
    }
  }
  const std::uint32_t top = output.id + 1;

  // depends[id]: node id is a function of at least one wrt variable.
  std::vector<char> depends(top, 0);
  for (const Expr& w : wrt) {
    if (w.id < top) depends[w.id] = 1;
  }
  for (std::uint32_t id = 0; id < top; ++id) {
    const Node& n = nodes_[id];
    const int k = arity(n.op);
    if (k >= 1 && depends[n.lhs]) depends[id] = 1;
    if (k == 2 && depends[n.rhs]) depends[id] = 1;
  }

  const Expr outs[] = {output};
  const auto reach = reachable(outs);

  std::vector<std::uint32_t> adjoint(top, kNone);
  if (depends[output.id]) adjoint[output.id] = constant(1.0).id;

  auto accumulate = [&](std::uint32_t target, Expr contribution) {
    if (!depends[target]) return;
    if (adjoint[target] == kNone) {
      adjoint[target] = contribution.id;
    } else {
      adjoint[target] = simplify_or_make(Op::kAdd, Expr{this, adjoint[target]}, contribution).id;
    }
  };

  for (std::uint32_t id = top; id-- > 0;) {
    if (!reach[id] || !depends[id] || adjoint[id] == kNone) continue;
    const Node n = nodes_[id];  // copy: nodes_ grows below
    const Expr g{this, adjoint[id]};
    const Expr self{this, id};
    const Expr a{this, n.lhs};
    const Expr b{this, n.rhs};
    switch (n.op) {
      case Op::kConst:
      case Op::kVar:
        break;
      case Op::kAdd:
        accumulate(n.lhs, g);
        accumulate(n.rhs, g);
        break;
      case Op::kSub:
        accumulate(n.lhs, g);
        if (depends[n.rhs]) accumulate(n.rhs, simplify_or_make(Op::kNeg, g, g));
        break;
      case Op::kMul:
        if (depends[n.lhs]) accumulate(n.lhs, simplify_or_make(Op::kMul, g, b));
        if (depends[n.rhs]) accumulate(n.rhs, simplify_or_make(Op::kMul, g, a));
        break;
      case Op::kDiv:
        if (depends[n.lhs]) accumulate(n.lhs, simplify_or_make(Op::kDiv, g, b));
        if (depends[n.rhs]) {
          const Expr num = simplify_or_make(Op::kMul, g, self);
          const Expr q = simplify_or_make(Op::kDiv, num, b);
          accumulate(n.rhs, simplify_or_make(Op::kNeg, q, q));
        }
        break;
      case Op::kNeg:
        accumulate(n.lhs, simplify_or_make(Op::kNeg, g, g));
        break;
      case Op::kPowConst: {
        const Expr lowered = pow_const(a, n.constant - 1.0);
        const Expr scaled = simplify_or_make(Op::kMul, constant(n.constant), lowered);
        accumulate(n.lhs, simplify_or_make(Op::kMul, g, scaled));
        break;
      }
      case Op::kTanh: {
        const Expr sq = simplify_or_make(Op::kMul, self, self);
        const Expr sech2 = simplify_or_make(Op::kSub, constant(1.0), sq);
        accumulate(n.lhs, simplify_or_make(Op::kMul, g, sech2));
        break;
      }
      case Op::kSin:
        accumulate(n.lhs, simplify_or_make(Op::kMul, g, simplify_or_make(Op::kCos, a, a)));
        break;
      case Op::kCos: {
        const Expr t = simplify_or_make(Op::kMul, g, simplify_or_make(Op::kSin, a, a));
        accumulate(n.lhs, simplify_or_make(Op::kNeg, t, t));
        break;
      }
      case Op::kExp:
        accumulate(n.lhs, simplify_or_make(Op::kMul, g, self));
        break;
    }
  }

  std::vector<Expr> result;
  result.reserve(wrt.size());
  for (const Expr& w : wrt) {
    if (w.id < top && adjoint[w.id] != kNone) {
      result.push_back(Expr{this, adjoint[w.id]});
    } else {
      result.push_back(constant(0.0));
    }
  }
  return result;
}

std::vector<double> Graph::derive_many(Expr output, std::span<const Expr> wrt) const {
  check_owned(output);
  for (const Expr& w : wrt) {
    check_owned(w);
    if (nodes_[w.id].op != Op::kVar) {
      throw NotAVariableError("derive_many: node " + std::to_string(w.id) + " is not a variable");
    }
  }
  const Expr outs[] = {output};
  const auto reach = reachable(outs);
  const auto values = forward_values(reach, slot_values(nullptr));

  std::vector<double> adj(reach.size(), 0.0);
  adj[output.id] = 1.0;
  for (std::uint32_t id = output.id + 1; id-- > 0;) {
    if (!reach[id]) continue;
    const double g = adj[id];
    if (g == 0.0) continue;
    const Node& n = nodes_[id];
    switch (n.op) {
      case Op::kConst:
      case Op::kVar:
        break;
      case Op::kAdd:
        adj[n.lhs] += g;
        adj[n.rhs] += g;
        break;
      case Op::kSub:
        adj[n.lhs] += g;
        adj[n.rhs] -= g;
        break;
      case Op::kMul:
        adj[n.lhs] += g * values[n.rhs];
        adj[n.rhs] += g * values[n.lhs];
        break;
      case Op::kDiv:
        adj[n.lhs] += g / values[n.rhs];
        adj[n.rhs] -= g * values[id] / values[n.rhs];
        break;
      case Op::kNeg:
        adj[n.lhs] -= g;
        break;
      case Op::kPowConst:
        adj[n.lhs] += g * n.constant * std::pow(values[n.lhs], n.constant - 1.0);
        break;
      case Op::kTanh:
        adj[n.lhs] += g * (1.0 - values[id] * values[id]);
        break;
      case Op::kSin:
        adj[n.lhs] += g * std::cos(values[n.lhs]);
        break;
      case Op::kCos:
        adj[n.lhs] -= g * std::sin(values[n.lhs]);
        break;
      case Op::kExp:
        adj[n.lhs] += g * values[id];
        break;
    }
  }

  std::vector<double> grad;
  grad.reserve(wrt.size());
  for (const Expr& w : wrt) grad.push_back(w.id < adj.size() ? adj[w.id] : 0.0);
  for (std::size_t j = 0; j < grad.size(); ++j) {
    if (!std::isfinite(grad[j])) throw NonFiniteError(wrt[j].id, Op::kVar, grad[j]);
  }
  return grad;
}

namespace {

Graph& graph_of(Expr a, Expr b) {
  if (a.graph == nullptr || a.graph != b.graph) {
    throw ForeignNodeError("operands belong to different graphs");
  }
  return *a.graph;
}

Graph& graph_of(Expr a) {
  if (a.graph == nullptr) throw ForeignNodeError("null expression handle");
  return *a.graph;
}

}  // namespace

Expr operator+(Expr a, Expr b) { return graph_of(a, b).apply(Op::kAdd, a, b); }
Expr operator-(Expr a, Expr b) { return graph_of(a, b).apply(Op::kSub, a, b); }
Expr operator*(Expr a, Expr b) { return graph_of(a, b).apply(Op::kMul, a, b); }
Expr operator/(Expr a, Expr b) { return graph_of(a, b).apply(Op::kDiv, a, b); }
Expr operator-(Expr a) { return graph_of(a).apply(Op::kNeg, a); }
Expr operator+(Expr a, double b) { return a + graph_of(a).constant(b); }
Expr operator+(double a, Expr b) { return graph_of(b).constant(a) + b; }
Expr operator-(Expr a, double b) { return a - graph_of(a).constant(b); }
Expr operator-(double a, Expr b) { return graph_of(b).constant(a) - b; }
Expr operator*(Expr a, double b) { return a * graph_of(a).constant(b); }
Expr operator*(double a, Expr b) { return graph_of(b).constant(a) * b; }
Expr operator/(Expr a, double b) { return a / graph_of(a).constant(b); }
Expr operator/(double a, Expr b) { return graph_of(b).constant(a) / b; }
Expr tanh(Expr a) { return graph_of(a).apply(Op::kTanh, a); }
Expr sin(Expr a) { return graph_of(a).apply(Op::kSin, a); }
Expr cos(Expr a) { return graph_of(a).apply(Op::kCos, a); }
Expr exp(Expr a) { return graph_of(a).apply(Op::kExp, a); }
Expr square(Expr a) { return a * a; }

}  // namespace pinn::ad
