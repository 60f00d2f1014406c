// Semirings used by the matrix code. A semiring type provides value_type,
// zero(), one(), add(), mul() and a no_cancellation flag telling whether a
// sum of nonzero terms can vanish.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string_view>

namespace mrmx {

/// (N, +, *).
struct NatSemiring {
  using value_type = std::int64_t;
  static constexpr std::string_view name = "nat";
  static constexpr bool no_cancellation = true;
  static value_type zero() { return 0; }
  static value_type one() { return 1; }
  static value_type add(value_type a, value_type b) { return a + b; }
  static value_type mul(value_type a, value_type b) { return a * b; }
  static bool is_zero(value_type a) { return a == 0; }
};

/// (N u {inf}, min, +). Infinity is the semiring zero; addition saturates.
struct MinPlusSemiring {
  using value_type = std::int64_t;
  static constexpr std::string_view name = "minplus";
  static constexpr bool no_cancellation = true;
  static constexpr value_type inf = std::numeric_limits<value_type>::max();
  static value_type zero() { return inf; }
  static value_type one() { return 0; }
  static value_type add(value_type a, value_type b) { return std::min(a, b); }
  static value_type mul(value_type a, value_type b) {
    if (a == inf || b == inf) return inf;
    return a + b;
  }
  static bool is_zero(value_type a) { return a == inf; }
};

/// Ordinary ring or field arithmetic over F (integers, rationals, doubles).
template <class F>
struct FieldSemiring {
  using value_type = F;
  static constexpr std::string_view name = "field";
  static constexpr bool no_cancellation = false;
  static value_type zero() { return F(0); }
  static value_type one() { return F(1); }
  static value_type add(const value_type& a, const value_type& b) { return a + b; }
  static value_type mul(const value_type& a, const value_type& b) { return a * b; }
  static bool is_zero(const value_type& a) { return a == F(0); }
};

}  // namespace mrmx
