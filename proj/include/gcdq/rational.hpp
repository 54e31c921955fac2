#ifndef GCDQ_RATIONAL_HPP
#define GCDQ_RATIONAL_HPP

#include <gmpxx.h>

#include <stdexcept>
#include <string>

namespace gcdq {

using BigInt = mpz_class;
using Rational = mpq_class;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A precondition of an operation was violated by the caller.
struct PreconditionError : Error {
  using Error::Error;
};

// An exhaustive certified search found no branch; on valid inputs this
// would contradict the statement the operation implements.
struct InconsistencyError : Error {
  using Error::Error;
};

// An inequality stayed unresolved at the precision ceiling.
struct IndeterminateError : Error {
  using Error::Error;
};

inline BigInt pow10z(unsigned long e) {
  BigInt r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, e);
  return r;
}

inline BigInt pow2z(unsigned long e) {
  BigInt r;
  mpz_ui_pow_ui(r.get_mpz_t(), 2, e);
  return r;
}

inline BigInt powz(const BigInt& b, unsigned long e) {
  BigInt r;
  mpz_pow_ui(r.get_mpz_t(), b.get_mpz_t(), e);
  return r;
}

// num/den in canonical form; the two-argument mpq_class constructor does
// not reduce, and GMP requires canonical operands.
inline Rational make_ratio(const BigInt& num, const BigInt& den) {
  if (den == 0) throw Error("make_ratio: zero denominator");
  Rational r(num, den);
  r.canonicalize();
  return r;
}

// b^e for integer e, b != 0 when e < 0.
inline Rational pow_int(const Rational& b, long e) {
  if (e == 0) return Rational(1);
  unsigned long a = e < 0 ? static_cast<unsigned long>(-e) : static_cast<unsigned long>(e);
  Rational r;
  mpz_pow_ui(r.get_num().get_mpz_t(), b.get_num().get_mpz_t(), a);
  mpz_pow_ui(r.get_den().get_mpz_t(), b.get_den().get_mpz_t(), a);
  r.canonicalize();
  if (e < 0) {
    if (r == 0) throw PreconditionError("pow_int: zero base with negative exponent");
    return Rational(1) / r;
  }
  return r;
}

// Canonical "num/den" form; the denominator is always spelled out so that
// serialized values are byte-stable.
inline std::string rational_to_string(const Rational& x) {
  Rational c(x);
  c.canonicalize();
  return c.get_num().get_str() + "/" + c.get_den().get_str();
}

inline Rational parse_rational(const std::string& s) {
  auto slash = s.find('/');
  try {
    Rational r;
    if (slash == std::string::npos) {
      r = Rational(BigInt(s));
    } else {
      BigInt num(s.substr(0, slash));
      BigInt den(s.substr(slash + 1));
      if (den <= 0) throw Error("parse_rational: non-positive denominator");
      r = Rational(num, den);
    }
    r.canonicalize();
    return r;
  } catch (const std::invalid_argument&) {
    throw Error("parse_rational: malformed rational '" + s + "'");
  }
}

// Decides x >= 10^{-exp10} for x > 0 without materializing 10^exp10.
// Digit-count bounds settle every case except a narrow boundary band,
// which can only occur when exp10 is small enough to expand exactly.
inline bool at_least_pow10_floor(const Rational& x, const BigInt& exp10) {
  if (x <= 0) return false;
  if (exp10 < 0) throw PreconditionError("at_least_pow10_floor: negative exponent");
  Rational c(x);
  c.canonicalize();
  const BigInt& num = c.get_num();
  const BigInt& den = c.get_den();
  long nn = static_cast<long>(mpz_sizeinbase(num.get_mpz_t(), 10));
  long dn = static_cast<long>(mpz_sizeinbase(den.get_mpz_t(), 10));
  // num >= 10^{nn-1}, den < 10^{dn}: nn-1+E >= dn forces true.
  if (BigInt(nn - 1) + exp10 >= BigInt(dn)) return true;
  // num < 10^{nn}: nn+E <= dn-1 forces false.
  if (BigInt(nn) + exp10 <= BigInt(dn - 1)) return false;
  if (!exp10.fits_ulong_p() || exp10.get_ui() > 10000000UL)
    throw IndeterminateError("at_least_pow10_floor: boundary case with huge exponent");
  return num * pow10z(exp10.get_ui()) >= den;
}

}  // namespace gcdq

#endif
