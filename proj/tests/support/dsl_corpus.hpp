#pragma once

// Residual-language corpus over dimensions (x, t) with parameters
// {nu, D, lambda1}: well-formed expressions and positioned failures.

#include <array>
#include <cstddef>
#include <string_view>

namespace pinn::testing {

inline constexpr std::array<std::string_view, 25> kDslCorpus = {
    "u_t + u*u_x - (0.01/pi)*u_xx",
    "u_t + lambda1*u*u_x - nu*u_xx",
    "u_t - D*u_xx",
    "u_t - u_xx",
    "u_tt - 4*u_xx",
    "u_xt + u_x*u_t",
    "u_tx - u_xt",
    "u - sin(pi*x)*exp(-t)",
    "-u",
    "-(u + 1)",
    "--u_x",
    "u^2 - x^3",
    "u^-2 + 2^0.5",
    "(u + x)^2",
    "2^-3*x",
    "x - (t - u)",
    "x - t - u",
    "x / (t / u)",
    "x / t / u",
    "tanh(u_x) + cos(u_t)",
    "exp(-(x^2 + t^2)/(4*D*t + 1))",
    "1.5e-3*u_xx + 2.5E+2*u",
    "u*(1 - u) - nu*(u_x^2 + u_xx)",
    "sin(sin(sin(u)))",
    "0.5*(u_x - u_t)*(u_x + u_t) - D",
};

struct DslErrorCase {
  std::string_view text;
  std::size_t column;  // 1-based
  enum class Kind { kSyntax, kUnknownIdentifier, kDerivativeOrder, kOther } kind;
};

inline constexpr std::array<DslErrorCase, 14> kDslErrors = {{
    {"u_t + v*u_x", 7, DslErrorCase::Kind::kUnknownIdentifier},
    {"u_t - y", 7, DslErrorCase::Kind::kUnknownIdentifier},
    {"u_xxx", 1, DslErrorCase::Kind::kDerivativeOrder},
    {"u_t - u_xxt", 7, DslErrorCase::Kind::kDerivativeOrder},
    {"u_t + * u", 7, DslErrorCase::Kind::kSyntax},
    {"(u_t - u_xx", 12, DslErrorCase::Kind::kSyntax},
    {"u_t - u_xx)", 11, DslErrorCase::Kind::kSyntax},
    {"", 1, DslErrorCase::Kind::kSyntax},
    {"u_t # u", 5, DslErrorCase::Kind::kSyntax},
    {"sin u", 5, DslErrorCase::Kind::kSyntax},
    {"foo(u)", 1, DslErrorCase::Kind::kUnknownIdentifier},
    {"u^u", 3, DslErrorCase::Kind::kOther},
    {"u^0.5", 3, DslErrorCase::Kind::kOther},
    {"u_y", 1, DslErrorCase::Kind::kOther},
}};

}  // namespace pinn::testing
