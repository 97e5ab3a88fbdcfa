// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace asd::detail {

/// tanh with a branch-free body so the loop in tanh_inplace vectorizes
/// (needs -fno-trapping-math). Within 3 ulp of std::tanh.
inline double tanh_value(double x) {
  const double ax = std::fabs(x);

  // expm1(-2|x|) via y = n ln2 + r, |r| <= ln2 / 2, and a Taylor polynomial
  // q(r) with exp(r) = 1 + r q(r). Forming 2^n - 1 separately avoids the
  // cancellation in 1 - exp(y) for small |x|.
  const double y = std::max(-2.0 * ax, -700.0);
  const double shifted = y * 1.4426950408889634 + 0x1.8p52;
  const double n = shifted - 0x1.8p52;
  const double r = (y - n * 0.6931471805599453) - n * 2.3190468138462996e-17;
  double q = 1.0 / 87178291200;
  q = q * r + 1.0 / 6227020800;
  q = q * r + 1.0 / 479001600;
  q = q * r + 1.0 / 39916800;
  q = q * r + 1.0 / 3628800;
  q = q * r + 1.0 / 362880;
  q = q * r + 1.0 / 40320;
  q = q * r + 1.0 / 5040;
  q = q * r + 1.0 / 720;
  q = q * r + 1.0 / 120;
  q = q * r + 1.0 / 24;
  q = q * r + 1.0 / 6;
  q = q * r + 0.5;
  q = q * r + 1.0;
  const double s = std::bit_cast<double>((std::bit_cast<std::uint64_t>(shifted) + 1023) << 52);
  const double em1 = (s - 1.0) + s * (r * q);
  return std::copysign(-em1 / (2.0 + em1), x);
}

inline void tanh_inplace(double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) v[i] = tanh_value(v[i]);
}

}  // namespace asd::detail
