#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <string>

namespace refl {

// Exact rational arithmetic. mpq_class keeps values in lowest terms after
// every operation, so equality and ordering are exact.
//
// Two gmpxx pitfalls to keep out of this codebase:
//  - arithmetic yields lazy expression templates; a lambda returning
//    `a / b` without an explicit `-> Rat` hands the caller references to
//    dead locals. Declare the return type or wrap in Rat(...).
//  - Rat(num, den) does not reduce; construct from coprime literals only,
//    or go through dyadic() / parse_rational().
using Rat = mpq_class;

inline const Rat& rat_zero() {
  static const Rat z(0);
  return z;
}
inline const Rat& rat_one() {
  static const Rat o(1);
  return o;
}

// n / 2^level, level >= 0.
Rat dyadic(std::int64_t n, int level);
Rat dyadic(const mpz_class& n, int level);

// 2^e for any integer e.
Rat pow2(int e);

// Parses "a/b" or "a" (optionally signed). Throws ParseError on junk or b == 0.
Rat parse_rational(const std::string& text);

// A dyadic rational has a power-of-two denominator. On success fills
// level/numerator with the minimal representation value = num / 2^level.
struct DyadicParts {
  int level = 0;
  std::int64_t numerator = 0;
};
std::optional<DyadicParts> as_dyadic(const Rat& q);

std::string rat_str(const Rat& q);

// Probability of the complementary event.
inline Rat complement(const Rat& p) { return Rat(1) - p; }

inline Rat rat_min(const Rat& a, const Rat& b) { return a < b ? a : b; }
inline Rat rat_max(const Rat& a, const Rat& b) { return a < b ? b : a; }
inline Rat clamp01(const Rat& q) {
  if (q < 0) return Rat(0);
  if (q > 1) return Rat(1);
  return q;
}

double rat_to_double(const Rat& q);

}  // namespace refl
