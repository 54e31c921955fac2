#ifndef GCDQ_FACTORED_HPP
#define GCDQ_FACTORED_HPP

#include "gcdq/rational.hpp"

#include <nlohmann/json_fwd.hpp>

#include <compare>
#include <optional>
#include <utility>
#include <vector>

namespace gcdq {

// An integer carried as its prime factorization. Divisibility, gcd/lcm and
// the multiplicative functions below act on exponent vectors only; the
// magnitude is never formed unless explicitly requested.
class FactoredInt {
 public:
  using Factor = std::pair<BigInt, unsigned>;  // (prime, exponent >= 1)

  FactoredInt() = default;  // the integer 1

  // Validates: primes strictly increasing, exponents >= 1, every prime
  // passes a Miller-Rabin test (round count set via set_primality_rounds).
  explicit FactoredInt(std::vector<Factor> factors);

  static FactoredInt one() { return FactoredInt(); }
  static FactoredInt prime_power(const BigInt& p, unsigned e);

  // Trial division up to trial_bound; a larger cofactor is accepted only if
  // it passes the primality test, otherwise the call fails.
  static FactoredInt from_integer(const BigInt& n, unsigned long trial_bound = 1000000);

  const std::vector<Factor>& factors() const { return factors_; }
  bool is_one() const { return factors_.empty(); }
  size_t num_primes() const { return factors_.size(); }

  unsigned valuation(const BigInt& p) const;
  bool divisible_by(const FactoredInt& d) const;

  // Exact quotient; throws if d does not divide *this.
  FactoredInt divide_exact(const FactoredInt& d) const;

  // prod_{p | n} (1 - 1/p)
  Rational phi_over_n() const;

  // The plain magnitude, refused beyond max_digits decimal digits.
  std::optional<BigInt> magnitude(size_t max_digits = 100000) const;

  bool operator==(const FactoredInt& o) const { return factors_ == o.factors_; }
  bool operator!=(const FactoredInt& o) const { return !(*this == o); }
  bool operator<(const FactoredInt& o) const;  // lexicographic on factor lists

  std::string to_string() const;  // e.g. "2^3*5"
  nlohmann::json to_json() const;
  static FactoredInt from_json(const nlohmann::json& j);

  static void set_primality_rounds(int rounds);
  static int primality_rounds();
  static bool is_probable_prime(const BigInt& p);

  friend FactoredInt mul(const FactoredInt& a, const FactoredInt& b);
  friend FactoredInt gcd(const FactoredInt& a, const FactoredInt& b);
  friend FactoredInt lcm(const FactoredInt& a, const FactoredInt& b);

 private:
  struct Trusted {};
  FactoredInt(std::vector<Factor> factors, Trusted) : factors_(std::move(factors)) {}

  std::vector<Factor> factors_;
};

FactoredInt mul(const FactoredInt& a, const FactoredInt& b);
FactoredInt gcd(const FactoredInt& a, const FactoredInt& b);
FactoredInt lcm(const FactoredInt& a, const FactoredInt& b);

// Primes whose valuations in a and b differ, i.e. the primes dividing
// ab/gcd(a,b)^2, in increasing order.
std::vector<BigInt> asymmetric_primes(const FactoredInt& a, const FactoredInt& b);

// sum of 1/p over asymmetric primes p >= t.
Rational l_t(const FactoredInt& a, const FactoredInt& b, const Rational& t);

// max { r*psi_q, q*psi_r } where psi_q = psi(q), psi_r = psi(r).
Rational m_of(const FactoredInt& q, const FactoredInt& r, const Rational& psi_q,
              const Rational& psi_r);

}  // namespace gcdq

#endif
