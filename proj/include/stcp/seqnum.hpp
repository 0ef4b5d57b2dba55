// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <concepts>
#include <cstdint>
#include <limits>

// Serial-number arithmetic for TCP sequence numbers (mod 2^32 in
// production; the templates also instantiate at narrower widths so tests
// can brute-force the full space).

namespace stcp::tcp {

// a < b iff walking forward from a reaches b in less than half the space:
// (b - a) mod 2^w in [1, 2^(w-1)).
template <std::unsigned_integral U>
constexpr bool seq_lt(U a, U b) {
  constexpr U half = U{1} << (std::numeric_limits<U>::digits - 1);
  const U d = static_cast<U>(b - a);
  return d != 0 && d < half;
}

template <std::unsigned_integral U>
constexpr bool seq_lte(U a, U b) {
  return a == b || seq_lt(a, b);
}

// lo <= x < hi in sequence order, mirroring the RFC window checks.
// Empty when hi == lo.
template <std::unsigned_integral U>
constexpr bool seq_between(U lo, U x, U hi) {
  return static_cast<U>(x - lo) < static_cast<U>(hi - lo);
}

template <std::unsigned_integral U>
constexpr U seq_max(U a, U b) {
  return seq_lt(a, b) ? b : a;
}

using seq32 = uint32_t;

}  // namespace stcp::tcp
