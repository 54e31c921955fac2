#include "gcdq/factored.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <set>

namespace gcdq {

namespace {

std::atomic<int> g_primality_rounds{32};

// Primes verified once per thread; values are immutable so re-testing the
// same prime on every construction would be pure waste.
thread_local std::set<BigInt> t_verified_primes;

}  // namespace

void FactoredInt::set_primality_rounds(int rounds) {
  if (rounds < 1) throw PreconditionError("primality rounds must be >= 1");
  g_primality_rounds.store(rounds);
}

int FactoredInt::primality_rounds() { return g_primality_rounds.load(); }

bool FactoredInt::is_probable_prime(const BigInt& p) {
  if (p < 2) return false;
  if (t_verified_primes.count(p)) return true;
  int r = mpz_probab_prime_p(p.get_mpz_t(), g_primality_rounds.load());
  if (r == 0) return false;
  t_verified_primes.insert(p);
  return true;
}

FactoredInt::FactoredInt(std::vector<Factor> factors) : factors_(std::move(factors)) {
  const BigInt* prev = nullptr;
  for (const auto& [p, e] : factors_) {
    if (e < 1) throw PreconditionError("FactoredInt: exponent must be >= 1");
    if (prev && !(*prev < p))
      throw PreconditionError("FactoredInt: primes must be strictly increasing");
    if (!is_probable_prime(p))
      throw PreconditionError("FactoredInt: " + p.get_str() + " failed the primality test");
    prev = &p;
  }
}

FactoredInt FactoredInt::prime_power(const BigInt& p, unsigned e) {
  if (e == 0) return one();
  return FactoredInt({{p, e}});
}

FactoredInt FactoredInt::from_integer(const BigInt& n, unsigned long trial_bound) {
  if (n < 1) throw PreconditionError("from_integer: input must be >= 1");
  BigInt m = n;
  std::vector<Factor> fs;
  BigInt d = 2;
  while (d * d <= m && d <= trial_bound) {
    if (m % d == 0) {
      unsigned e = 0;
      while (m % d == 0) {
        m /= d;
        ++e;
      }
      fs.emplace_back(d, e);
    }
    d += (d == 2) ? 1 : 2;
  }
  if (m > 1) {
    if (!is_probable_prime(m))
      throw PreconditionError("from_integer: cofactor " + m.get_str() +
                              " exceeds the trial-division bound and is not prime");
    fs.emplace_back(m, 1);
  }
  return FactoredInt(std::move(fs), Trusted{});
}

unsigned FactoredInt::valuation(const BigInt& p) const {
  for (const auto& [q, e] : factors_) {
    if (q == p) return e;
    if (q > p) return 0;
  }
  return 0;
}

bool FactoredInt::divisible_by(const FactoredInt& d) const {
  for (const auto& [p, e] : d.factors_)
    if (valuation(p) < e) return false;
  return true;
}

FactoredInt FactoredInt::divide_exact(const FactoredInt& d) const {
  if (!divisible_by(d)) throw PreconditionError("divide_exact: not divisible");
  std::vector<Factor> fs;
  size_t j = 0;
  for (const auto& [p, e] : factors_) {
    unsigned sub = 0;
    while (j < d.factors_.size() && d.factors_[j].first < p) ++j;
    if (j < d.factors_.size() && d.factors_[j].first == p) sub = d.factors_[j].second;
    if (e > sub) fs.emplace_back(p, e - sub);
  }
  return FactoredInt(std::move(fs), Trusted{});
}

Rational FactoredInt::phi_over_n() const {
  Rational r(1);
  for (const auto& [p, e] : factors_) {
    (void)e;
    r *= Rational(p - 1, p);
  }
  r.canonicalize();
  return r;
}

std::optional<BigInt> FactoredInt::magnitude(size_t max_digits) const {
  BigInt m = 1;
  for (const auto& [p, e] : factors_) {
    m *= powz(p, e);
    if (mpz_sizeinbase(m.get_mpz_t(), 10) > max_digits) return std::nullopt;
  }
  return m;
}

bool FactoredInt::operator<(const FactoredInt& o) const {
  size_t n = std::min(factors_.size(), o.factors_.size());
  for (size_t i = 0; i < n; ++i) {
    if (factors_[i].first != o.factors_[i].first) return factors_[i].first < o.factors_[i].first;
    if (factors_[i].second != o.factors_[i].second)
      return factors_[i].second < o.factors_[i].second;
  }
  return factors_.size() < o.factors_.size();
}

std::string FactoredInt::to_string() const {
  if (factors_.empty()) return "1";
  std::string s;
  for (const auto& [p, e] : factors_) {
    if (!s.empty()) s += "*";
    s += p.get_str();
    if (e > 1) s += "^" + std::to_string(e);
  }
  return s;
}

nlohmann::json FactoredInt::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [p, e] : factors_) j.push_back({p.get_str(), e});
  return j;
}

FactoredInt FactoredInt::from_json(const nlohmann::json& j) {
  std::vector<Factor> fs;
  for (const auto& entry : j) {
    if (!entry.is_array() || entry.size() != 2)
      throw Error("FactoredInt: malformed factor entry");
    fs.emplace_back(BigInt(entry[0].get<std::string>()), entry[1].get<unsigned>());
  }
  return FactoredInt(std::move(fs));
}

FactoredInt mul(const FactoredInt& a, const FactoredInt& b) {
  std::vector<FactoredInt::Factor> fs;
  size_t i = 0, j = 0;
  while (i < a.factors_.size() || j < b.factors_.size()) {
    if (j == b.factors_.size() ||
        (i < a.factors_.size() && a.factors_[i].first < b.factors_[j].first)) {
      fs.push_back(a.factors_[i++]);
    } else if (i == a.factors_.size() || b.factors_[j].first < a.factors_[i].first) {
      fs.push_back(b.factors_[j++]);
    } else {
      fs.emplace_back(a.factors_[i].first, a.factors_[i].second + b.factors_[j].second);
      ++i;
      ++j;
    }
  }
  return FactoredInt(std::move(fs), FactoredInt::Trusted{});
}

FactoredInt gcd(const FactoredInt& a, const FactoredInt& b) {
  std::vector<FactoredInt::Factor> fs;
  size_t i = 0, j = 0;
  while (i < a.factors_.size() && j < b.factors_.size()) {
    if (a.factors_[i].first < b.factors_[j].first) {
      ++i;
    } else if (b.factors_[j].first < a.factors_[i].first) {
      ++j;
    } else {
      fs.emplace_back(a.factors_[i].first,
                      std::min(a.factors_[i].second, b.factors_[j].second));
      ++i;
      ++j;
    }
  }
  return FactoredInt(std::move(fs), FactoredInt::Trusted{});
}

FactoredInt lcm(const FactoredInt& a, const FactoredInt& b) {
  std::vector<FactoredInt::Factor> fs;
  size_t i = 0, j = 0;
  while (i < a.factors_.size() || j < b.factors_.size()) {
    if (j == b.factors_.size() ||
        (i < a.factors_.size() && a.factors_[i].first < b.factors_[j].first)) {
      fs.push_back(a.factors_[i++]);
    } else if (i == a.factors_.size() || b.factors_[j].first < a.factors_[i].first) {
      fs.push_back(b.factors_[j++]);
    } else {
      fs.emplace_back(a.factors_[i].first,
                      std::max(a.factors_[i].second, b.factors_[j].second));
      ++i;
      ++j;
    }
  }
  return FactoredInt(std::move(fs), FactoredInt::Trusted{});
}

std::vector<BigInt> asymmetric_primes(const FactoredInt& a, const FactoredInt& b) {
  std::vector<BigInt> out;
  size_t i = 0, j = 0;
  const auto& fa = a.factors();
  const auto& fb = b.factors();
  while (i < fa.size() || j < fb.size()) {
    if (j == fb.size() || (i < fa.size() && fa[i].first < fb[j].first)) {
      out.push_back(fa[i++].first);
    } else if (i == fa.size() || fb[j].first < fa[i].first) {
      out.push_back(fb[j++].first);
    } else {
      if (fa[i].second != fb[j].second) out.push_back(fa[i].first);
      ++i;
      ++j;
    }
  }
  return out;
}

Rational l_t(const FactoredInt& a, const FactoredInt& b, const Rational& t) {
  if (t < 1) throw PreconditionError("l_t: t must be >= 1");
  Rational s(0);
  for (const BigInt& p : asymmetric_primes(a, b))
    if (Rational(p) >= t) s += Rational(1, p);
  s.canonicalize();
  return s;
}

Rational m_of(const FactoredInt& q, const FactoredInt& r, const Rational& psi_q,
              const Rational& psi_r) {
  if (psi_q < 0 || psi_r < 0) throw PreconditionError("m_of: psi values must be >= 0");
  auto qm = q.magnitude();
  auto rm = r.magnitude();
  if (!qm || !rm) throw PreconditionError("m_of: magnitude exceeds the digit cap");
  Rational a = Rational(*rm) * psi_q;
  Rational b = Rational(*qm) * psi_r;
  return a >= b ? a : b;
}

}  // namespace gcdq
