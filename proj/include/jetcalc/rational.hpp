#pragma once

#include <gmpxx.h>

#include <string>

namespace jetcalc {

/// Exact arbitrary-precision rational used for every coefficient in the kernel.
using Rational = mpq_class;
using Integer = mpz_class;

inline Rational make_rational(long num, long den = 1) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

inline bool is_integer(const Rational& r) { return r.get_den() == 1; }

/// Largest integer not exceeding r.
inline Integer floor_of(const Rational& r) {
  Integer q;
  mpz_fdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
  return q;
}

inline std::string to_string(const Rational& r) { return r.get_str(); }

/// Binomial coefficient C(n, k) for small nonnegative arguments.
inline Integer binomial(unsigned long n, unsigned long k) {
  Integer out;
  mpz_bin_uiui(out.get_mpz_t(), n, k);
  return out;
}

}  // namespace jetcalc
