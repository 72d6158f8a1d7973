#pragma once

// Scalar expression graphs with symbolic reverse-mode differentiation.
//
// A Graph is an append-only arena of scalar nodes. derive() returns new graph
// nodes rather than numbers, so a derivative can itself be differentiated:
// the PDE residual contains input-derivatives of the network, and training
// differentiates that residual again with respect to the weights.
//
// Node construction applies a small set of algebraic identities (constant
// folding, x*1, x+0, x*0, double negation) and hash-conses structurally equal
// nodes, which keeps nested derivative graphs compact.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pinn/error.hpp"

namespace pinn::ad {

enum class Op : std::uint8_t {
  kConst,
  kVar,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kPowConst,
  kTanh,
  kSin,
  kCos,
  kExp,
};

/// Number of operands taken by `op`.
int arity(Op op) noexcept;
std::string_view op_name(Op op) noexcept;

class Graph;

/// Handle to a node owned by a Graph.
struct Expr {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  friend bool operator==(const Expr&, const Expr&) = default;
};

struct Node {
  Op op = Op::kConst;
  std::uint32_t lhs = 0;  // var nodes: binding slot
  std::uint32_t rhs = 0;
  double constant = 0.0;  // const value or pow_const exponent
};

class DuplicateKeyError : public Error {
 public:
  explicit DuplicateKeyError(const std::string& key);
};

class UnboundVariableError : public Error {
 public:
  explicit UnboundVariableError(const std::string& key);
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class NonFiniteError : public Error {
 public:
  NonFiniteError(std::uint32_t node, Op op, double value);
  std::uint32_t node() const noexcept { return node_; }

 private:
  std::uint32_t node_;
};

class ArityError : public Error {
 public:
  using Error::Error;
};

class ForeignNodeError : public Error {
 public:
  using Error::Error;
};

class NotAVariableError : public Error {
 public:
  using Error::Error;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Expr constant(double value);

  /// Registers a new variable under `key`. Throws DuplicateKeyError if taken.
  Expr new_var(const std::string& key);
  Expr new_var(const std::string& key, double value);

  /// Returns a key of the form "<prefix>#<n>" that is not yet registered.
  std::string fresh_key(std::string_view prefix) const;

  void bind(std::string_view key, double value);
  void bind(Expr var, double value);
  bool is_bound(std::string_view key) const;
  bool has_var(std::string_view key) const;
  Expr var(std::string_view key) const;
  const std::string& key_of(Expr var) const;

  Expr apply(Op op, std::span<const Expr> operands);
  Expr apply(Op op, Expr a);
  Expr apply(Op op, Expr a, Expr b);
  Expr pow_const(Expr base, double exponent);

  /// Forward sweep over the nodes reachable from `node` using the current
  /// bindings. Throws UnboundVariableError or NonFiniteError.
  double eval(Expr node) const;
  double eval(Expr node, const std::map<std::string, double>& bindings) const;
  std::vector<double> eval_many(std::span<const Expr> nodes) const;

  /// Symbolic reverse sweep: one node per `wrt` holding d(output)/d(wrt).
  std::vector<Expr> derive(Expr output, std::span<const Expr> wrt);
  Expr derive(Expr output, Expr wrt);

  /// Numeric reverse sweep: d(output)/d(wrt_j) for every j in one pass.
  std::vector<double> derive_many(Expr output, std::span<const Expr> wrt) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::uint32_t id) const { return nodes_.at(id); }
  const Node& node(Expr e) const;
  bool owns(Expr e) const noexcept { return e.graph == this && e.id < nodes_.size(); }
  bool is_var(Expr e) const;
  bool is_constant(Expr e, double value) const;

  /// Slot-indexed view of the variable bindings (NaN where unbound).
  std::size_t var_count() const noexcept { return var_keys_.size(); }
  double var_value(std::uint32_t slot) const { return var_values_.at(slot); }
  bool var_bound(std::uint32_t slot) const { return var_bound_.at(slot) != 0; }
  const std::string& var_key(std::uint32_t slot) const { return var_keys_.at(slot); }

 private:
  struct NodeKey {
    Op op;
    std::uint32_t lhs;
    std::uint32_t rhs;
    std::uint64_t bits;
    friend bool operator==(const NodeKey&, const NodeKey&) = default;
  };
  struct NodeKeyHash {
    std::size_t operator()(const NodeKey& k) const noexcept;
  };

  void check_owned(Expr e) const;
  Expr make(Op op, std::uint32_t lhs, std::uint32_t rhs, double constant);
  Expr simplify_or_make(Op op, Expr a, Expr b);
  std::vector<char> reachable(std::span<const Expr> outputs) const;
  struct Slots {
    std::vector<double> values;
    std::vector<char> bound;
  };
  std::vector<double> forward_values(const std::vector<char>& reach, const Slots& slots) const;
  Slots slot_values(const std::map<std::string, double>* overrides) const;

  std::vector<Node> nodes_;
  std::unordered_map<NodeKey, std::uint32_t, NodeKeyHash> interned_;
  std::unordered_map<std::string, std::uint32_t> var_index_;  // key -> node id
  std::vector<std::string> var_keys_;                         // slot -> key
  std::vector<double> var_values_;
  std::vector<char> var_bound_;
};

/// Applies the real-valued primitive of `op` (value of a node given operand
/// values). Exposed so evaluators share one definition of the primitives.
double apply_primitive(Op op, double a, double b, double constant) noexcept;

// Arithmetic sugar on handles; operands must share a graph.
Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr a);
Expr operator+(Expr a, double b);
Expr operator+(double a, Expr b);
Expr operator-(Expr a, double b);
Expr operator-(double a, Expr b);
Expr operator*(Expr a, double b);
Expr operator*(double a, Expr b);
Expr operator/(Expr a, double b);
Expr operator/(double a, Expr b);
Expr tanh(Expr a);
Expr sin(Expr a);
Expr cos(Expr a);
Expr exp(Expr a);
Expr square(Expr a);

}  // namespace pinn::ad
