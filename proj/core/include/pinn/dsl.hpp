#pragma once

// A small expression language for strong-form PDE residuals such as
//
//     u_t + u*u_x - (0.01/pi)*u_xx
//
// Grammar (lowest to highest precedence):
//
//     expr   := term (('+' | '-') term)*
//     term   := unary (('*' | '/') unary)*
//     unary  := '-' unary | power
//     power  := atom ('^' unary)?                 right-associative
//     atom   := number | identifier | func '(' expr ')' | '(' expr ')'
//     func   := tanh | sin | cos | exp
//
// Identifiers resolve to a domain dimension, the solution `u`, a derivative
// `u_<dims>` (suffix spelled with dimension names, total order <= 2), a
// declared learnable parameter, or the constant `pi`. Exponents must be
// constant; a non-constant base needs an integer exponent.
//
// The same language, without `u`, derivatives or parameters, describes
// boundary and initial condition functions.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pinn/autodiff.hpp"
#include "pinn/domain.hpp"
#include "pinn/error.hpp"

namespace pinn::dsl {

inline constexpr int kMaxDerivativeOrder = 2;

enum class Function { kTanh, kSin, kCos, kExp };

std::string_view function_name(Function f) noexcept;

struct AstNode {
  enum class Kind {
    kNumber,
    kConstant,    // pi
    kDimension,   // dims[0] = dimension index
    kSolution,    // u
    kDerivative,  // dims = differentiation order, e.g. u_xt -> {x, t}
    kParameter,
    kNegate,      // lhs
    kBinary,      // op in + - * / ^
    kCall,        // fn(lhs)
  };

  Kind kind = Kind::kNumber;
  double number = 0.0;
  std::string name;
  std::vector<std::size_t> dims;
  char op = 0;
  Function fn = Function::kTanh;
  std::shared_ptr<const AstNode> lhs;
  std::shared_ptr<const AstNode> rhs;
  std::size_t position = 0;  // byte offset in the source text
};

/// Structural equality; source positions are ignored.
bool operator==(const AstNode& a, const AstNode& b);

/// Base for every positioned parse failure. column() is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& message);
  std::size_t position() const noexcept { return position_; }
  std::size_t column() const noexcept { return position_ + 1; }

 private:
  std::size_t position_;
};

class SyntaxError : public ParseError {
 public:
  SyntaxError(std::size_t position, const std::string& found, std::vector<std::string> expected);
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::vector<std::string> expected_;
};

class SemanticError : public ParseError {
 public:
  enum class Kind {
    kUnknownIdentifier,
    kDerivativeOrder,
    kUnknownDerivativeDimension,
    kAmbiguousDerivative,
    kInvalidExponent,
    kNotAllowed,
  };
  SemanticError(Kind kind, std::size_t position, const std::string& message)
      : ParseError(position, message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Learnable PDE coefficients.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<bool> trainable;

  void add(std::string name, double value, bool is_trainable = true);
  std::size_t size() const noexcept { return names.size(); }
  std::ptrdiff_t index_of(std::string_view name) const noexcept;
  std::size_t trainable_count() const noexcept;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// Parsed, resolved expression. Immutable; copies share the tree.
class ResidualExpr {
 public:
  const AstNode& root() const noexcept { return *root_; }
  const std::vector<std::string>& dimension_names() const noexcept { return dims_; }
  const std::string& source() const noexcept { return source_; }
  /// True when the tree mentions u or a derivative of u.
  bool uses_solution() const noexcept;
  int max_derivative_order() const noexcept;

  friend bool operator==(const ResidualExpr& a, const ResidualExpr& b) {
    return *a.root_ == *b.root_;
  }

 private:
  friend ResidualExpr parse_impl(std::string_view, const domain::Domain&,
                                 std::span<const std::string>, bool);
  std::shared_ptr<const AstNode> root_;
  std::vector<std::string> dims_;
  std::string source_;
};

/// Parses a residual over `domain` with the given learnable parameters.
ResidualExpr parse(std::string_view text, const domain::Domain& domain,
                   std::span<const std::string> declared_params = {});

/// Parses a condition function: dimensions and constants only.
ResidualExpr parse_condition(std::string_view text, const domain::Domain& domain);

/// Canonical text; parse(to_string(e)) == e.
std::string to_string(const ResidualExpr& expr);
std::string to_string(const AstNode& node, const std::vector<std::string>& dims);

/// Sorted, de-duplicated learnable identifiers appearing in the expression.
std::vector<std::string> free_parameters(const ResidualExpr& expr);

using UForward = std::function<ad::Expr(std::span<const ad::Expr>)>;

/// One variable per parameter, keyed "param:<name>" and bound to its value.
std::map<std::string, ad::Expr> register_parameters(ad::Graph& graph, const ParamSet& params);

/// Lowers the expression into graph nodes. u becomes u_forward(point_vars);
/// u_<s> becomes nested derive() calls of u with respect to the point
/// variables named in s, in suffix order.
ad::Expr compile(const ResidualExpr& expr, const std::map<std::string, ad::Expr>& params,
                 const UForward& u_forward, ad::Graph& graph,
                 std::span<const ad::Expr> point_vars);

/// Numeric evaluation of a solution-free expression at a point.
double evaluate(const ResidualExpr& expr, std::span<const double> point,
                const std::map<std::string, double>& params = {});

}  // namespace pinn::dsl
