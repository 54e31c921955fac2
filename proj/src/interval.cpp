#include "gcdq/interval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace gcdq {

RationalInterval::RationalInterval(Rational l, Rational h) : lo(std::move(l)), hi(std::move(h)) {
  if (lo > hi) throw PreconditionError("RationalInterval: lo > hi");
}

RationalInterval RationalInterval::operator*(const RationalInterval& o) const {
  Rational a = lo * o.lo, b = lo * o.hi, c = hi * o.lo, d = hi * o.hi;
  return RationalInterval(std::min(std::min(a, b), std::min(c, d)),
                          std::max(std::max(a, b), std::max(c, d)));
}

RationalInterval RationalInterval::operator*(const Rational& c) const {
  if (c >= 0) return RationalInterval(lo * c, hi * c);
  return RationalInterval(hi * c, lo * c);
}

RationalInterval RationalInterval::reciprocal() const {
  if (lo <= 0 && hi >= 0) throw PreconditionError("reciprocal: interval contains 0");
  return RationalInterval(Rational(1) / hi, Rational(1) / lo);
}

RationalInterval RationalInterval::pow_uint(unsigned long e) const {
  if (lo < 0) throw PreconditionError("pow_uint: negative endpoint");
  return RationalInterval(pow_int(lo, static_cast<long>(e)),
                          pow_int(hi, static_cast<long>(e)));
}

nlohmann::json RationalInterval::to_json() const {
  return {{"lo", rational_to_string(lo)}, {"hi", rational_to_string(hi)}};
}

RationalInterval RationalInterval::from_json(const nlohmann::json& j) {
  return RationalInterval(parse_rational(j.at("lo").get<std::string>()),
                          parse_rational(j.at("hi").get<std::string>()));
}

IntervalOrder compare_certified(const RationalInterval& x, const RationalInterval& y) {
  if (x.lo > y.hi) return IntervalOrder::Greater;
  if (x.hi < y.lo) return IntervalOrder::Less;
  return IntervalOrder::Overlap;
}

RationalInterval nth_root_enclosure(const Rational& x, unsigned long n,
                                    unsigned precision_bits) {
  if (x < 0) throw PreconditionError("nth_root_enclosure: negative input");
  if (n == 0) throw PreconditionError("nth_root_enclosure: zeroth root");
  if (x == 0) return RationalInterval::point(Rational(0));
  Rational c(x);
  c.canonicalize();
  {
    BigInt rn, rd;
    int en = mpz_root(rn.get_mpz_t(), c.get_num().get_mpz_t(), n);
    int ed = mpz_root(rd.get_mpz_t(), c.get_den().get_mpz_t(), n);
    if (en && ed) {
      Rational exact(rn, rd);
      exact.canonicalize();
      return RationalInterval::point(exact);
    }
  }
  BigInt scale = pow2z(precision_bits);
  // floor((num * scale^n / den)^{1/n}) via the truncated integer root.
  BigInt t = c.get_num() * powz(scale, n);
  BigInt q = t / c.get_den();
  BigInt r;
  int exact_root = mpz_root(r.get_mpz_t(), q.get_mpz_t(), n);
  Rational lo(r, scale);
  lo.canonicalize();
  if (exact_root && q * c.get_den() == t) {
    // q = num*scale^n/den exactly and r^n = q: x is a perfect n-th power.
    return RationalInterval::point(lo);
  }
  Rational hi(r + 1, scale);
  hi.canonicalize();
  return RationalInterval(lo, hi);
}

RationalInterval root30_enclosure(const BigInt& p, unsigned precision_bits) {
  if (p < 2) throw PreconditionError("root30_enclosure: p must be >= 2");
  return nth_root_enclosure(Rational(p), 30, precision_bits);
}

RationalInterval power_deficit_factor_enclosure(const BigInt& p, const Rational& exponent,
                                                unsigned long e, unsigned precision_bits) {
  if (p < 2) throw PreconditionError("power_deficit_factor_enclosure: p must be >= 2");
  Rational exp(exponent);
  exp.canonicalize();
  if (exp <= 0) throw PreconditionError("power_deficit_factor_enclosure: exponent <= 0");
  if (!exp.get_num().fits_ulong_p() || !exp.get_den().fits_ulong_p())
    throw PreconditionError("power_deficit_factor_enclosure: exponent out of range");
  unsigned long a = exp.get_num().get_ui();
  unsigned long b = exp.get_den().get_ui();
  // p^{a/b} = (p^a)^{1/b}; p >= 2 and a > 0 give root >= 2^{1/b} > 1.
  RationalInterval root = nth_root_enclosure(Rational(powz(p, a)), b, precision_bits);
  RationalInterval inv = root.reciprocal();              // p^{-a/b}
  RationalInterval one_minus(1 - inv.hi, 1 - inv.lo);    // 1 - p^{-a/b} in (0,1)
  if (one_minus.lo <= 0)
    throw IndeterminateError("power_deficit_factor_enclosure: precision too low");
  return one_minus.pow_uint(e).reciprocal();
}

RationalInterval quality_factor_enclosure(const BigInt& p, unsigned precision_bits) {
  return power_deficit_factor_enclosure(p, Rational(31, 30), 10, precision_bits);
}

nlohmann::json QualityValue::to_json() const {
  return {{"exact_part", rational_to_string(exact_part)},
          {"trans_part", trans_part.to_json()},
          {"product", product.to_json()}};
}

}  // namespace gcdq
