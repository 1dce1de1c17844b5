// Exact rational probabilities (arbitrary precision, GMP-backed).
//
// Probabilities and distribution weights are never floating point anywhere in
// the library; doubles appear only in diagnostics. Weights produced by the
// coin-flip rules are dyadic, but the general interface allows any rational
// (empirical frequencies, product bounds, tolerances).

#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace probt {

using Rat = mpq_class;
using Int = mpz_class;

inline Rat rat(long num, long den = 1) {
  if (den == 0) throw std::invalid_argument("rat: zero denominator");
  Rat q(num, den);
  q.canonicalize();
  return q;
}

// 1 / 2^k
inline Rat pow2_inv(unsigned long k) {
  Rat q(1);
  mpq_div_2exp(q.get_mpq_t(), q.get_mpq_t(), k);
  return q;
}

// 2^k as an integer
inline Int pow2_int(unsigned long k) {
  Int z(1);
  mpz_mul_2exp(z.get_mpz_t(), z.get_mpz_t(), k);
  return z;
}

// A weight is dyadic iff its (canonical) denominator is a power of two.
inline bool is_dyadic(const Rat& q) {
  const Int& den = q.get_den();
  return mpz_popcount(den.get_mpz_t()) == 1;
}

// Canonical "num/den" rendering used by the JSON output and test logs.
// The denominator is always printed, including for integers ("3/1"), so the
// output format is uniform and byte-stable.
inline std::string rat_str(const Rat& q) {
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

inline double rat_double(const Rat& q) { return q.get_d(); }

// Parses "p/q", "p", or "2^-k" (the last form is accepted because tolerances
// in this problem domain are naturally dyadic).
inline Rat parse_rat(const std::string& s) {
  if (s.rfind("2^-", 0) == 0) {
    unsigned long k = std::stoul(s.substr(3));
    return pow2_inv(k);
  }
  Rat q;
  if (mpq_set_str(q.get_mpq_t(), s.c_str(), 10) != 0)
    throw std::invalid_argument("not a rational: '" + s + "'");
  if (mpz_sgn(q.get_den().get_mpz_t()) <= 0)
    throw std::invalid_argument("non-positive denominator: '" + s + "'");
  q.canonicalize();
  return q;
}

}  // namespace probt
