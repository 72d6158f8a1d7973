#pragma once

// Branch-free tanh shared by every evaluator so that scalar and lane-batched
// results agree. Written so the compiler can vectorize lane loops over it.
// Coefficients are the classic Cephes rational approximations (about 1 ulp).

#include <bit>
#include <cmath>
#include <cstdint>

namespace pinn::ad::detail {

// exp(x) for x in [0, 40].
inline double exp_small_range(double x) {
  constexpr double kLog2e = 1.4426950408889634073599;
  constexpr double kC1 = 6.93145751953125E-1;
  constexpr double kC2 = 1.42860682030941723212E-6;
  const double n = std::floor(x * kLog2e + 0.5);
  const double r = (x - n * kC1) - n * kC2;
  const double r2 = r * r;
  const double p = r * ((1.26177193074810590878E-4 * r2 + 3.02994407707441961300E-2) * r2 +
                        9.99999999999999999910E-1);
  const double q = ((3.00198505138664455042E-6 * r2 + 2.52448340349684104192E-3) * r2 +
                    2.27265548208155028766E-1) *
                       r2 +
                   2.00000000000000000009E0;
  const double e = 1.0 + 2.0 * (p / (q - p));
  const auto bits = static_cast<std::uint64_t>(static_cast<std::int64_t>(n) + 1023) << 52;
  return e * std::bit_cast<double>(bits);
}

inline double tanh(double x) {
  const double ax = std::fabs(x);
  // |x| < 0.625: x + x^3 P(x^2) / Q(x^2)
  const double z = x * x;
  const double p = (-9.64399179425052238628E-1 * z - 9.92877231001918586564E1) * z -
                   1.61468768441708447952E3;
  const double q = ((z + 1.12811678491632931402E2) * z + 2.23548839060100448583E3) * z +
                   4.84406305325125486048E3;
  const double small = x + x * z * (p / q);
  // otherwise 1 - 2 / (exp(2|x|) + 1), with the sign restored
  const double s = exp_small_range(2.0 * std::fmin(ax, 20.0));
  const double large = std::copysign(1.0 - 2.0 / (s + 1.0), x);
  const double result = ax < 0.625 ? small : large;
  return std::isnan(x) ? x : result;
}

}  // namespace pinn::ad::detail
