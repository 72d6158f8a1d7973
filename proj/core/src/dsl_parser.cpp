#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>

#include "pinn/dsl.hpp"

namespace pinn::dsl {

namespace {

using NodePtr = std::shared_ptr<const AstNode>;

enum class Tok { kNumber, kIdent, kPlus, kMinus, kStar, kSlash, kCaret, kLParen, kRParen, kEnd };

struct Token {
  Tok kind;
  std::string_view text;
  std::size_t pos;
  double number = 0.0;
};

std::string describe(const Token& t) {
  if (t.kind == Tok::kEnd) return "end of input";
  return "'" + std::string(t.text) + "'";
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
      if (i < src.size() && src[i] == '.') {
        ++i;
        while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
      }
      if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < src.size() && (src[j] == '+' || src[j] == '-')) ++j;
        if (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) {
          i = j;
          while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
        }
      }
      Token t{Tok::kNumber, src.substr(start, i - start), start};
      const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (res.ec != std::errc() || !std::isfinite(t.number)) {
        throw SyntaxError(start, "'" + std::string(t.text) + "'", {"a finite number"});
      }
      out.push_back(t);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      while (i < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_')) {
        ++i;
      }
      out.push_back(Token{Tok::kIdent, src.substr(start, i - start), start});
      continue;
    }
    Tok kind;
    switch (c) {
      case '+': kind = Tok::kPlus; break;
      case '-': kind = Tok::kMinus; break;
      case '*': kind = Tok::kStar; break;
      case '/': kind = Tok::kSlash; break;
      case '^': kind = Tok::kCaret; break;
      case '(': kind = Tok::kLParen; break;
      case ')': kind = Tok::kRParen; break;
      default:
        throw SyntaxError(start, "unexpected character '" + std::string(1, c) + "'",
                          {"number", "identifier", "operator", "'('", "')'"});
    }
    ++i;
    out.push_back(Token{kind, src.substr(start, 1), start});
  }
  out.push_back(Token{Tok::kEnd, {}, src.size()});
  return out;
}

std::optional<Function> function_of(std::string_view name) {
  if (name == "tanh") return Function::kTanh;
  if (name == "sin") return Function::kSin;
  if (name == "cos") return Function::kCos;
  if (name == "exp") return Function::kExp;
  return std::nullopt;
}

bool is_constant_tree(const AstNode& n) {
  switch (n.kind) {
    case AstNode::Kind::kNumber:
    case AstNode::Kind::kConstant:
      return true;
    case AstNode::Kind::kNegate:
    case AstNode::Kind::kCall:
      return is_constant_tree(*n.lhs);
    case AstNode::Kind::kBinary:
      return is_constant_tree(*n.lhs) && is_constant_tree(*n.rhs);
    default:
      return false;
  }
}

class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& dims,
         std::span<const std::string> params, bool allow_solution)
      : tokens_(lex(src)), dims_(dims), params_(params), allow_solution_(allow_solution) {}

  NodePtr parse() {
    if (peek().kind == Tok::kEnd) {
      throw SyntaxError(peek().pos, "empty expression", {"an expression"});
    }
    NodePtr root = expr();
    if (peek().kind != Tok::kEnd) {
      throw SyntaxError(peek().pos, describe(peek()),
                        {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"});
    }
    return root;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() { return tokens_[pos_++]; }

  static NodePtr binary(char op, NodePtr a, NodePtr b, std::size_t pos) {
    auto n = std::make_shared<AstNode>();
    n->kind = AstNode::Kind::kBinary;
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    n->position = pos;
    return n;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    while (peek().kind == Tok::kPlus || peek().kind == Tok::kMinus) {
      const Token op = next();
      lhs = binary(op.kind == Tok::kPlus ? '+' : '-', lhs, term(), op.pos);
    }
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (peek().kind == Tok::kStar || peek().kind == Tok::kSlash) {
      const Token op = next();
      lhs = binary(op.kind == Tok::kStar ? '*' : '/', lhs, unary(), op.pos);
    }
    return lhs;
  }

  NodePtr unary() {
    if (peek().kind == Tok::kMinus) {
      const Token op = next();
      auto n = std::make_shared<AstNode>();
      n->kind = AstNode::Kind::kNegate;
      n->lhs = unary();
      n->position = op.pos;
      return n;
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (peek().kind != Tok::kCaret) return base;
    const Token op = next();
    const std::size_t exponent_pos = peek().pos;
    NodePtr exponent = unary();
    if (!is_constant_tree(*exponent)) {
      throw SemanticError(SemanticError::Kind::kInvalidExponent, exponent_pos,
                          "exponent must be a constant expression");
    }
    const double e = evaluate_constant(*exponent);
    if (!is_constant_tree(*base) && e != std::round(e)) {
      throw SemanticError(SemanticError::Kind::kInvalidExponent, exponent_pos,
                          "non-integer exponent requires a constant base");
    }
    return binary('^', base, exponent, op.pos);
  }

  static double evaluate_constant(const AstNode& n) {
    switch (n.kind) {
      case AstNode::Kind::kNumber: return n.number;
      case AstNode::Kind::kConstant: return std::numbers::pi;
      case AstNode::Kind::kNegate: return -evaluate_constant(*n.lhs);
      case AstNode::Kind::kCall: {
        const double a = evaluate_constant(*n.lhs);
        switch (n.fn) {
          case Function::kTanh: return std::tanh(a);
          case Function::kSin: return std::sin(a);
          case Function::kCos: return std::cos(a);
          case Function::kExp: return std::exp(a);
        }
        return a;
      }
      case AstNode::Kind::kBinary: {
        const double a = evaluate_constant(*n.lhs);
        const double b = evaluate_constant(*n.rhs);
        switch (n.op) {
          case '+': return a + b;
          case '-': return a - b;
          case '*': return a * b;
          case '/': return a / b;
          default: return std::pow(a, b);
        }
      }
      default:
        return 0.0;
    }
  }

  NodePtr atom() {
    const Token t = peek();
    switch (t.kind) {
      case Tok::kNumber: {
        next();
        auto n = std::make_shared<AstNode>();
        n->kind = AstNode::Kind::kNumber;
        n->number = t.number;
        n->position = t.pos;
        return n;
      }
      case Tok::kLParen: {
        next();
        NodePtr inner = expr();
        expect_rparen();
        return inner;
      }
      case Tok::kIdent:
        next();
        return identifier(t);
      default:
        throw SyntaxError(t.pos, describe(t),
                          {"number", "identifier", "function call", "'('", "'-'"});
    }
  }

  void expect_rparen() {
    if (peek().kind != Tok::kRParen) {
      throw SyntaxError(peek().pos, describe(peek()), {"')'", "operator"});
    }
    next();
  }

  NodePtr identifier(const Token& t) {
    const std::string name(t.text);
    auto n = std::make_shared<AstNode>();
    n->position = t.pos;
    n->name = name;

    if (auto fn = function_of(name)) {
      if (peek().kind != Tok::kLParen) {
        throw SyntaxError(peek().pos, describe(peek()), {"'(' after " + name});
      }
      next();
      n->kind = AstNode::Kind::kCall;
      n->fn = *fn;
      n->lhs = expr();
      expect_rparen();
      return n;
    }
    if (peek().kind == Tok::kLParen) {
      throw SemanticError(SemanticError::Kind::kUnknownIdentifier, t.pos,
                          "unknown function \"" + name + "\" (available: tanh, sin, cos, exp)");
    }
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i] == name) {
        n->kind = AstNode::Kind::kDimension;
        n->dims = {i};
        return n;
      }
    }
    if (name == "u") {
      require_solution(t);
      n->kind = AstNode::Kind::kSolution;
      return n;
    }
    if (name.starts_with("u_")) {
      require_solution(t);
      n->kind = AstNode::Kind::kDerivative;
      n->dims = derivative_suffix(name.substr(2), t.pos);
      return n;
    }
    if (std::find(params_.begin(), params_.end(), name) != params_.end()) {
      n->kind = AstNode::Kind::kParameter;
      return n;
    }
    if (name == "pi") {
      n->kind = AstNode::Kind::kConstant;
      return n;
    }
    throw SemanticError(SemanticError::Kind::kUnknownIdentifier, t.pos,
                        "unknown identifier \"" + name + "\"");
  }

  void require_solution(const Token& t) const {
    if (!allow_solution_) {
      throw SemanticError(SemanticError::Kind::kNotAllowed, t.pos,
                          "\"" + std::string(t.text) +
                              "\" is not allowed here (condition functions may use dimensions "
                              "and constants only)");
    }
  }

  // Splits a derivative suffix into dimension names. Every complete
  // segmentation is collected so that ambiguous spellings are reported.
  std::vector<std::size_t> derivative_suffix(const std::string& suffix, std::size_t pos) const {
    std::vector<std::vector<std::size_t>> found;
    std::vector<std::size_t> current;
    segment(suffix, 0, current, found);
    if (found.empty()) {
      throw SemanticError(SemanticError::Kind::kUnknownDerivativeDimension, pos,
                          "derivative \"u_" + suffix + "\" does not name known dimensions");
    }
    if (found.size() > 1) {
      throw SemanticError(SemanticError::Kind::kAmbiguousDerivative, pos,
                          "derivative \"u_" + suffix + "\" can be read in more than one way");
    }
    if (found.front().size() > static_cast<std::size_t>(kMaxDerivativeOrder)) {
      throw SemanticError(SemanticError::Kind::kDerivativeOrder, pos,
                          "derivative \"u_" + suffix + "\" has order " +
                              std::to_string(found.front().size()) + "; the maximum is " +
                              std::to_string(kMaxDerivativeOrder));
    }
    return found.front();
  }

  void segment(const std::string& s, std::size_t at, std::vector<std::size_t>& current,
               std::vector<std::vector<std::size_t>>& found) const {
    if (at == s.size()) {
      if (!current.empty()) found.push_back(current);
      return;
    }
    if (found.size() > 1) return;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      if (s.compare(at, dims_[d].size(), dims_[d]) == 0) {
        current.push_back(d);
        segment(s, at + dims_[d].size(), current, found);
        current.pop_back();
      }
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const std::vector<std::string>& dims_;
  std::span<const std::string> params_;
  bool allow_solution_;
};

void collect_params(const AstNode& n, std::set<std::string>& out) {
  if (n.kind == AstNode::Kind::kParameter) out.insert(n.name);
  if (n.lhs) collect_params(*n.lhs, out);
  if (n.rhs) collect_params(*n.rhs, out);
}

bool mentions_solution(const AstNode& n) {
  if (n.kind == AstNode::Kind::kSolution || n.kind == AstNode::Kind::kDerivative) return true;
  return (n.lhs && mentions_solution(*n.lhs)) || (n.rhs && mentions_solution(*n.rhs));
}

int derivative_order(const AstNode& n) {
  int order = n.kind == AstNode::Kind::kDerivative ? static_cast<int>(n.dims.size()) : 0;
  if (n.lhs) order = std::max(order, derivative_order(*n.lhs));
  if (n.rhs) order = std::max(order, derivative_order(*n.rhs));
  return order;
}

// Printing precedence: + - (1), * / (2), unary - (3), ^ (4), atoms (5).
int precedence(const AstNode& n) {
  switch (n.kind) {
    case AstNode::Kind::kBinary:
      switch (n.op) {
        case '+':
        case '-':
          return 1;
        case '*':
        case '/':
          return 2;
        default:
          return 4;
      }
    case AstNode::Kind::kNegate:
      return 3;
    default:
      return 5;
  }
}

void print(const AstNode& n, const std::vector<std::string>& dims, std::string& out) {
  auto wrapped = [&](const AstNode& child, bool wrap) {
    if (wrap) out += '(';
    print(child, dims, out);
    if (wrap) out += ')';
  };
  switch (n.kind) {
    case AstNode::Kind::kNumber:
      out += domain::format_double(n.number);
      break;
    case AstNode::Kind::kConstant:
    case AstNode::Kind::kSolution:
    case AstNode::Kind::kParameter:
      out += n.name;
      break;
    case AstNode::Kind::kDimension:
      out += dims.at(n.dims.front());
      break;
    case AstNode::Kind::kDerivative:
      out += "u_";
      for (std::size_t d : n.dims) out += dims.at(d);
      break;
    case AstNode::Kind::kNegate:
      out += '-';
      wrapped(*n.lhs, precedence(*n.lhs) < 3);
      break;
    case AstNode::Kind::kCall:
      out += function_name(n.fn);
      out += '(';
      print(*n.lhs, dims, out);
      out += ')';
      break;
    case AstNode::Kind::kBinary: {
      const int p = precedence(n);
      if (n.op == '^') {
        wrapped(*n.lhs, precedence(*n.lhs) < 5);
        out += '^';
        wrapped(*n.rhs, precedence(*n.rhs) < 3);
      } else {
        wrapped(*n.lhs, precedence(*n.lhs) < p);
        out += ' ';
        out += n.op;
        out += ' ';
        wrapped(*n.rhs, precedence(*n.rhs) <= p);
      }
      break;
    }
  }
}

}  // namespace

std::string_view function_name(Function f) noexcept {
  switch (f) {
    case Function::kTanh: return "tanh";
    case Function::kSin: return "sin";
    case Function::kCos: return "cos";
    case Function::kExp: return "exp";
  }
  return "?";
}

bool operator==(const AstNode& a, const AstNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case AstNode::Kind::kNumber:
      return a.number == b.number;
    case AstNode::Kind::kConstant:
    case AstNode::Kind::kSolution:
    case AstNode::Kind::kParameter:
      return a.name == b.name;
    case AstNode::Kind::kDimension:
    case AstNode::Kind::kDerivative:
      return a.dims == b.dims;
    case AstNode::Kind::kNegate:
      return *a.lhs == *b.lhs;
    case AstNode::Kind::kCall:
      return a.fn == b.fn && *a.lhs == *b.lhs;
    case AstNode::Kind::kBinary:
      return a.op == b.op && *a.lhs == *b.lhs && *a.rhs == *b.rhs;
  }
  return false;
}

ParseError::ParseError(std::size_t position, const std::string& message)
    : Error("column " + std::to_string(position + 1) + ": " + message), position_(position) {}

namespace {

std::string syntax_message(const std::string& found, const std::vector<std::string>& expected) {
  std::string msg = "syntax error at " + found + "; expected ";
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i) msg += i + 1 == expected.size() ? " or " : ", ";
    msg += expected[i];
  }
  return msg;
}

}  // namespace

SyntaxError::SyntaxError(std::size_t position, const std::string& found,
                         std::vector<std::string> expected)
    : ParseError(position, syntax_message(found, expected)), expected_(std::move(expected)) {}

void ParamSet::add(std::string name, double value, bool is_trainable) {
  if (index_of(name) >= 0) throw Error("parameter \"" + name + "\" declared twice");
  if (!std::isfinite(value)) throw Error("parameter \"" + name + "\" has a non-finite value");
  names.push_back(std::move(name));
  values.push_back(value);
  trainable.push_back(is_trainable);
}

std::ptrdiff_t ParamSet::index_of(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

std::size_t ParamSet::trainable_count() const noexcept {
  return static_cast<std::size_t>(std::count(trainable.begin(), trainable.end(), true));
}

bool ResidualExpr::uses_solution() const noexcept { return mentions_solution(*root_); }

int ResidualExpr::max_derivative_order() const noexcept { return derivative_order(*root_); }

ResidualExpr parse_impl(std::string_view text, const domain::Domain& domain,
                        std::span<const std::string> declared_params, bool allow_solution) {
  const auto dims = domain.names();
  for (const std::string& p : declared_params) {
    const bool clash = !domain::is_identifier(p) || std::find(dims.begin(), dims.end(), p) != dims.end() ||
                       p == "u" || p.starts_with("u_") || p == "pi" || function_of(p).has_value();
    if (clash) {
      throw SemanticError(SemanticError::Kind::kUnknownIdentifier, 0,
                          "parameter name \"" + p + "\" is not a free identifier");
    }
  }
  Parser parser(text, dims, declared_params, allow_solution);
  ResidualExpr out;
  out.root_ = parser.parse();
  out.dims_ = dims;
  out.source_ = std::string(text);
  return out;
}

ResidualExpr parse(std::string_view text, const domain::Domain& domain,
                   std::span<const std::string> declared_params) {
  return parse_impl(text, domain, declared_params, true);
}

ResidualExpr parse_condition(std::string_view text, const domain::Domain& domain) {
  return parse_impl(text, domain, {}, false);
}

std::string to_string(const AstNode& node, const std::vector<std::string>& dims) {
  std::string out;
  print(node, dims, out);
  return out;
}

std::string to_string(const ResidualExpr& expr) {
  return to_string(expr.root(), expr.dimension_names());
}

std::vector<std::string> free_parameters(const ResidualExpr& expr) {
  std::set<std::string> names;
  collect_params(expr.root(), names);
  return {names.begin(), names.end()};
}

}  // namespace pinn::dsl
