#ifndef GCDQ_INTERVAL_HPP
#define GCDQ_INTERVAL_HPP

#include "gcdq/rational.hpp"

#include <nlohmann/json_fwd.hpp>

namespace gcdq {

// Closed rational interval. Arithmetic is exact on the endpoints, so every
// operation returns an interval containing the exact image of the inputs.
struct RationalInterval {
  Rational lo, hi;

  RationalInterval() : lo(0), hi(0) {}
  RationalInterval(Rational l, Rational h);
  static RationalInterval point(const Rational& x) { return RationalInterval(x, x); }

  bool is_point() const { return lo == hi; }
  Rational width() const { return hi - lo; }
  bool contains(const Rational& x) const { return lo <= x && x <= hi; }
  bool intersects(const RationalInterval& o) const { return lo <= o.hi && o.lo <= hi; }

  RationalInterval operator*(const RationalInterval& o) const;
  RationalInterval operator*(const Rational& c) const;
  RationalInterval reciprocal() const;                 // requires 0 not in [lo, hi]
  RationalInterval pow_uint(unsigned long e) const;    // requires lo >= 0

  nlohmann::json to_json() const;
  static RationalInterval from_json(const nlohmann::json& j);
};

enum class IntervalOrder { Less, Greater, Overlap };

// GREATER iff x.lo > y.hi, LESS iff x.hi < y.lo, OVERLAP otherwise.
IntervalOrder compare_certified(const RationalInterval& x, const RationalInterval& y);

// Non-strict certified relations (x >= y is certain iff x.lo >= y.hi).
inline bool certainly_ge(const RationalInterval& x, const RationalInterval& y) {
  return x.lo >= y.hi;
}
inline bool certainly_gt(const RationalInterval& x, const RationalInterval& y) {
  return x.lo > y.hi;
}
inline bool certainly_le(const RationalInterval& x, const RationalInterval& y) {
  return x.hi <= y.lo;
}
inline bool certainly_lt(const RationalInterval& x, const RationalInterval& y) {
  return x.hi < y.lo;
}

// Enclosure of x^{1/n} for x >= 0 on the dyadic grid of step 2^-precision_bits.
// Returns an exact point when x is a perfect n-th power of a rational.
RationalInterval nth_root_enclosure(const Rational& x, unsigned long n,
                                    unsigned precision_bits);

// Enclosure of p^{1/30}: lo^30 <= p <= hi^30 with hi - lo <= 2^-precision_bits.
RationalInterval root30_enclosure(const BigInt& p, unsigned precision_bits);

// Enclosure of (1 - p^{-a/b})^{-e}; lo > 1 for every p >= 2.
RationalInterval power_deficit_factor_enclosure(const BigInt& p, const Rational& exponent,
                                                unsigned long e, unsigned precision_bits);

// The factor attached to each accounted prime in the quality functional,
// (1 - p^{-31/30})^{-10} under the default constants.
RationalInterval quality_factor_enclosure(const BigInt& p, unsigned precision_bits);

// Certified value of the quality functional: an exact rational part times an
// enclosed product of the per-prime transcendental factors.
struct QualityValue {
  Rational exact_part;        // >= 0; equals 0 iff the graph has no edge mass
  RationalInterval trans_part;  // the enclosed product, [1,1] when no primes
  RationalInterval product;     // exact_part * trans_part

  bool is_zero() const { return exact_part == 0; }
  nlohmann::json to_json() const;
};

}  // namespace gcdq

#endif
