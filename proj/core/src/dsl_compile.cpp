#include <cmath>
#include <map>
#include <numbers>
#include <optional>

#include "pinn/dsl.hpp"

namespace pinn::dsl {

namespace {

// Evaluates solution-free trees; also used for constant exponents.
struct NumericEvaluator {
  std::span<const double> point;
  const std::map<std::string, double>* params;

  double run(const AstNode& n) const {
    switch (n.kind) {
      case AstNode::Kind::kNumber: return n.number;
      case AstNode::Kind::kConstant: return std::numbers::pi;
      case AstNode::Kind::kDimension: return point[n.dims.front()];
      case AstNode::Kind::kParameter: {
        if (params != nullptr) {
          if (auto it = params->find(n.name); it != params->end()) return it->second;
        }
        throw Error("no value supplied for parameter \"" + n.name + "\"");
      }
      case AstNode::Kind::kSolution:
      case AstNode::Kind::kDerivative:
        throw Error("expression depends on u and cannot be evaluated numerically");
      case AstNode::Kind::kNegate: return -run(*n.lhs);
      case AstNode::Kind::kCall: {
        const double a = run(*n.lhs);
        switch (n.fn) {
          case Function::kTanh: return std::tanh(a);
          case Function::kSin: return std::sin(a);
          case Function::kCos: return std::cos(a);
          case Function::kExp: return std::exp(a);
        }
        return a;
      }
      case AstNode::Kind::kBinary: {
        const double a = run(*n.lhs);
        const double b = run(*n.rhs);
        switch (n.op) {
          case '+': return a + b;
          case '-': return a - b;
          case '*': return a * b;
          case '/': return a / b;
          default: return std::pow(a, b);
        }
      }
    }
    return 0.0;
  }
};

class Compiler {
 public:
  Compiler(const std::map<std::string, ad::Expr>& params, const UForward& u_forward,
           ad::Graph& graph, std::span<const ad::Expr> point_vars)
      : params_(params), u_forward_(u_forward), graph_(graph), point_(point_vars) {}

  ad::Expr lower(const AstNode& n) {
    switch (n.kind) {
      case AstNode::Kind::kNumber:
        return graph_.constant(n.number);
      case AstNode::Kind::kConstant:
        return graph_.constant(std::numbers::pi);
      case AstNode::Kind::kDimension:
        return point_[n.dims.front()];
      case AstNode::Kind::kSolution:
        return solution();
      case AstNode::Kind::kDerivative:
        return derivative(n.dims);
      case AstNode::Kind::kParameter: {
        auto it = params_.find(n.name);
        if (it == params_.end()) throw Error("no variable supplied for parameter \"" + n.name + "\"");
        return it->second;
      }
      case AstNode::Kind::kNegate:
        return -lower(*n.lhs);
      case AstNode::Kind::kCall: {
        const ad::Expr a = lower(*n.lhs);
        switch (n.fn) {
          case Function::kTanh: return ad::tanh(a);
          case Function::kSin: return ad::sin(a);
          case Function::kCos: return ad::cos(a);
          case Function::kExp: return ad::exp(a);
        }
        return a;
      }
      case AstNode::Kind::kBinary: {
        if (n.op == '^') return power(n);
        const ad::Expr a = lower(*n.lhs);
        const ad::Expr b = lower(*n.rhs);
        switch (n.op) {
          case '+': return a + b;
          case '-': return a - b;
          case '*': return a * b;
          default: return a / b;
        }
      }
    }
    throw Error("unhandled expression node");
  }

 private:
  ad::Expr solution() {
    if (!u_) {
      if (!u_forward_) throw Error("expression uses u but no solution network was supplied");
      u_ = u_forward_(point_);
    }
    return *u_;
  }

  // d^k u / d x_{i1} ... d x_{ik}, differentiating in suffix order and
  // reusing shared prefixes (u_x is built once for both u_x and u_xx).
  ad::Expr derivative(const std::vector<std::size_t>& dims) {
    if (auto it = derivatives_.find(dims); it != derivatives_.end()) return it->second;
    std::vector<std::size_t> prefix(dims.begin(), dims.end() - 1);
    const ad::Expr inner = prefix.empty() ? solution() : derivative(prefix);
    const ad::Expr d = graph_.derive(inner, point_[dims.back()]);
    derivatives_.emplace(dims, d);
    return d;
  }

  // Small non-negative integer exponents lower to repeated multiplication;
  // everything else becomes a pow_const node.
  ad::Expr power(const AstNode& n) {
    const ad::Expr base = lower(*n.lhs);
    const double e = NumericEvaluator{{}, nullptr}.run(*n.rhs);
    if (e == std::round(e) && e >= 0.0 && e <= 4.0) {
      switch (static_cast<int>(e)) {
        case 0: return graph_.constant(1.0);
        case 1: return base;
        case 2: return base * base;
        case 3: return base * base * base;
        default: {
          const ad::Expr sq = base * base;
          return sq * sq;
        }
      }
    }
    return graph_.pow_const(base, e);
  }

  const std::map<std::string, ad::Expr>& params_;
  const UForward& u_forward_;
  ad::Graph& graph_;
  std::span<const ad::Expr> point_;
  std::optional<ad::Expr> u_;
  std::map<std::vector<std::size_t>, ad::Expr> derivatives_;
};

}  // namespace

std::map<std::string, ad::Expr> register_parameters(ad::Graph& graph, const ParamSet& params) {
  std::map<std::string, ad::Expr> vars;
  for (std::size_t i = 0; i < params.size(); ++i) {
    vars.emplace(params.names[i], graph.new_var("param:" + params.names[i], params.values[i]));
  }
  return vars;
}

ad::Expr compile(const ResidualExpr& expr, const std::map<std::string, ad::Expr>& params,
                 const UForward& u_forward, ad::Graph& graph,
                 std::span<const ad::Expr> point_vars) {
  if (point_vars.size() != expr.dimension_names().size()) {
    throw Error("compile needs " + std::to_string(expr.dimension_names().size()) +
                " point variables, got " + std::to_string(point_vars.size()));
  }
  Compiler compiler(params, u_forward, graph, point_vars);
  return compiler.lower(expr.root());
}

double evaluate(const ResidualExpr& expr, std::span<const double> point,
                const std::map<std::string, double>& params) {
  if (point.size() != expr.dimension_names().size()) {
    throw Error("evaluate needs " + std::to_string(expr.dimension_names().size()) +
                " coordinates, got " + std::to_string(point.size()));
  }
  const NumericEvaluator eval{point, &params};
  return eval.run(expr.root());
}

}  // namespace pinn::dsl
