#include "gcdq/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gcdq {

// --- psi ---------------------------------------------------------------------

PsiFunction PsiFunction::table(std::map<long, Rational> values) {
  PsiFunction f;
  f.kind_ = Kind::Table;
  for (const auto& [q, v] : values) {
    if (q < 1) throw PreconditionError("psi table: keys must be positive");
    if (v < 0) throw PreconditionError("psi table: values must be >= 0");
  }
  f.table_ = std::move(values);
  return f;
}

PsiFunction PsiFunction::constant(const Rational& value, long support_lo, long support_hi) {
  if (value < 0) throw PreconditionError("psi: constant must be >= 0");
  PsiFunction f;
  f.kind_ = Kind::Constant;
  f.value_ = value;
  f.lo_ = support_lo;
  f.hi_ = support_hi;
  return f;
}

PsiFunction PsiFunction::reciprocal(const Rational& scale) {
  if (scale < 0) throw PreconditionError("psi: scale must be >= 0");
  PsiFunction f;
  f.kind_ = Kind::Reciprocal;
  f.value_ = scale;
  return f;
}

Rational PsiFunction::operator()(long q) const {
  if (q < 1) throw PreconditionError("psi: argument must be positive");
  switch (kind_) {
    case Kind::Table: {
      auto it = table_.find(q);
      return it == table_.end() ? Rational(0) : it->second;
    }
    case Kind::Constant:
      if (q < lo_ || (hi_ >= 0 && q > hi_)) return Rational(0);
      return value_;
    case Kind::Reciprocal:
      return value_ / q;
  }
  return Rational(0);
}

bool PsiFunction::bounded_by_half_on(long lo, long hi) const {
  Rational half(1, 2);
  switch (kind_) {
    case Kind::Table:
      for (const auto& [q, v] : table_)
        if (q >= lo && q <= hi && v > half) return false;
      return true;
    case Kind::Constant:
      return value_ <= half || hi < lo_ || (hi_ >= 0 && lo > hi_);
    case Kind::Reciprocal:
      return value_ <= Rational(lo) * half || lo > hi;
  }
  return true;
}

long PsiFunction::support_end() const {
  if (kind_ == Kind::Table) return table_.empty() ? 0 : table_.rbegin()->first;
  if (kind_ == Kind::Constant) return hi_;
  return -1;
}

// --- interval unions ------------------------------------------------------------

IntervalUnion::IntervalUnion(std::vector<std::pair<Rational, Rational>> pieces) {
  for (auto& [lo, hi] : pieces)
    if (lo > hi) throw PreconditionError("IntervalUnion: inverted piece");
  std::sort(pieces.begin(), pieces.end());
  for (auto& piece : pieces) {
    if (!pieces_.empty() && piece.first <= pieces_.back().second) {
      if (piece.second > pieces_.back().second) pieces_.back().second = piece.second;
    } else {
      pieces_.push_back(std::move(piece));
    }
  }
}

Rational IntervalUnion::measure() const {
  Rational m(0);
  for (const auto& [lo, hi] : pieces_) m += hi - lo;
  return m;
}

IntervalUnion IntervalUnion::intersect(const IntervalUnion& o) const {
  std::vector<std::pair<Rational, Rational>> out;
  size_t i = 0, j = 0;
  while (i < pieces_.size() && j < o.pieces_.size()) {
    const auto& a = pieces_[i];
    const auto& b = o.pieces_[j];
    Rational lo = std::max(a.first, b.first);
    Rational hi = std::min(a.second, b.second);
    if (lo <= hi) out.emplace_back(lo, hi);
    if (a.second < b.second)
      ++i;
    else
      ++j;
  }
  return IntervalUnion(std::move(out));
}

namespace {

IntervalUnion fraction_neighbourhoods(const PsiFunction& psi, long q, bool reduced_only) {
  if (q < 1) throw PreconditionError("fraction_neighbourhoods: q must be >= 1");
  Rational w = psi(q) / q;
  std::vector<std::pair<Rational, Rational>> pieces;
  long a_lo = reduced_only ? 1 : 0;
  for (long a = a_lo; a <= q; ++a) {
    if (reduced_only && std::gcd(a, q) != 1) continue;
    Rational center = make_ratio(a, q);
    Rational lo = center - w;
    Rational hi = center + w;
    if (lo < 0) lo = 0;
    if (hi > 1) hi = 1;
    if (lo <= hi) pieces.emplace_back(lo, hi);
  }
  return IntervalUnion(std::move(pieces));
}

}  // namespace

IntervalUnion a_q_set(const PsiFunction& psi, long q) {
  return fraction_neighbourhoods(psi, q, true);
}

IntervalUnion k_q_set(const PsiFunction& psi, long q) {
  return fraction_neighbourhoods(psi, q, false);
}

OverlapReport overlap_report(const PsiFunction& psi, long q, long r) {
  if (q == r) throw PreconditionError("overlap_report: q and r must differ");
  Rational half(1, 2);
  if (psi(q) > half || psi(r) > half)
    throw PreconditionError("overlap_report: psi must be bounded by 1/2");

  OverlapReport rep;
  IntervalUnion aq = a_q_set(psi, q), ar = a_q_set(psi, r);
  rep.intersection_measure = aq.intersect(ar).measure();
  Rational denom = aq.measure() * ar.measure();
  rep.zero_denominator = denom == 0;
  rep.lhs = rep.zero_denominator ? Rational(0) : rep.intersection_measure / denom;

  long g = std::gcd(q, r);
  Rational m = std::max(Rational(r) * psi(q), Rational(q) * psi(r));
  rep.indicator = m >= g;
  rep.rhs_core = Rational(1);
  FactoredInt fq = FactoredInt::from_integer(q);
  FactoredInt fr = FactoredInt::from_integer(r);
  for (const BigInt& p : asymmetric_primes(fq, fr))
    if (Rational(p) * g > m) rep.rhs_core *= Rational(p + 1, p);
  return rep;
}

std::optional<ChooseY> choose_y(const PsiFunction& psi, long x, long cap) {
  if (x < 1) throw PreconditionError("choose_y: X must be >= 1");
  ChooseY out;
  Rational sum(0);
  if (psi.kind() == PsiFunction::Kind::Table) {
    // Only support points contribute; skipping the gaps changes nothing.
    for (const auto& [q, v] : psi.table_values()) {
      if (q < x || q > cap) continue;
      sum += v * FactoredInt::from_integer(q).phi_over_n();
      out.partial_sums.push_back(sum);
      if (sum >= 1) {
        if (sum > 2) return std::nullopt;
        out.y = q;
        out.sum = sum;
        return out;
      }
    }
    return std::nullopt;
  }
  for (long q = x; q <= cap; ++q) {
    sum += psi(q) * FactoredInt::from_integer(q).phi_over_n();
    out.partial_sums.push_back(sum);
    if (sum >= 1) {
      if (sum > 2) return std::nullopt;
      out.y = q;
      out.sum = sum;
      return out;
    }
  }
  return std::nullopt;
}

namespace {

// Integers in [x, y] where psi is positive; enumerable without walking the
// whole range when psi is a table.
std::vector<long> psi_support_in_range(const PsiFunction& psi, long x, long y) {
  std::vector<long> out;
  if (psi.kind() == PsiFunction::Kind::Table) {
    for (const auto& [n, v] : psi.table_values())
      if (n >= x && n <= y && v > 0) out.push_back(n);
    return out;
  }
  for (long n = x; n <= y; ++n)
    if (psi(n) > 0) out.push_back(n);
  return out;
}

bool edge_pair_ok(const PsiFunction& psi, const FactoredInt& fv, const FactoredInt& fw, long v,
                  long w, const Rational& t, const Rational& threshold) {
  Rational m = std::max(Rational(w) * psi(v), Rational(v) * psi(w));
  if (Rational(std::gcd(v, w)) * t < m) return false;
  return l_t(fv, fw, t) >= threshold;
}

}  // namespace

std::vector<EdgePair> build_edge_set(const PsiFunction& psi, long x, long y, const Rational& t,
                                     const Rational& threshold) {
  if (t < 1) throw PreconditionError("build_edge_set: t must be >= 1");
  if (x < 1 || y < x) throw PreconditionError("build_edge_set: bad range");
  std::vector<FactoredInt> cache;
  cache.reserve(y - x + 1);
  for (long n = x; n <= y; ++n) cache.push_back(FactoredInt::from_integer(n));
  std::vector<EdgePair> out;
  for (long v = x; v <= y; ++v)
    for (long w = x; w <= y; ++w)
      if (edge_pair_ok(psi, cache[v - x], cache[w - x], v, w, t, threshold))
        out.push_back({v, w});
  return out;
}

Rational second_moment(const PsiFunction& psi, long x, long y, const Rational& t,
                       const Rational& threshold) {
  if (t < 1) throw PreconditionError("second_moment: t must be >= 1");
  // Pairs with a zero psi value carry zero weight, so only support pairs
  // contribute.
  std::vector<long> support = psi_support_in_range(psi, x, y);
  std::map<long, FactoredInt> cache;
  for (long n : support) cache.emplace(n, FactoredInt::from_integer(n));
  Rational sum(0);
  for (long v : support) {
    Rational mv = psi(v) * cache.at(v).phi_over_n();
    for (long w : support) {
      if (!edge_pair_ok(psi, cache.at(v), cache.at(w), v, w, t, threshold)) continue;
      sum += mv * psi(w) * cache.at(w).phi_over_n();
    }
  }
  return sum;
}

GcdGraph mu_graph_from_psi(const PsiFunction& psi, long x, long y, const Rational& t,
                           const Rational& threshold) {
  if (t < 1) throw PreconditionError("mu_graph_from_psi: t must be >= 1");
  std::vector<long> support = psi_support_in_range(psi, x, y);
  if (support.empty()) throw PreconditionError("mu_graph_from_psi: empty support");

  std::map<VertexId, Rational> mu;
  std::vector<std::pair<VertexId, FactoredInt>> left, right;
  std::map<long, FactoredInt> cache;
  for (long n : support) {
    FactoredInt f = FactoredInt::from_integer(n);
    Rational w = psi(n) * f.phi_over_n();
    mu["v:" + std::to_string(n)] = w;
    mu["w:" + std::to_string(n)] = w;
    left.emplace_back("v:" + std::to_string(n), f);
    right.emplace_back("w:" + std::to_string(n), f);
    cache.emplace(n, std::move(f));
  }
  std::vector<std::pair<VertexId, VertexId>> edges;
  for (long v : support)
    for (long w : support)
      if (edge_pair_ok(psi, cache.at(v), cache.at(w), v, w, t, threshold))
        edges.emplace_back("v:" + std::to_string(v), "w:" + std::to_string(w));
  return GcdGraph(Measure(std::move(mu)), std::move(left), std::move(right), std::move(edges),
                  {});
}

CatlinValue catlin_star(const PsiFunction& psi, long q, long n_cap) {
  if (q < 1 || n_cap < q) throw PreconditionError("catlin_star: need n_cap >= q >= 1");
  Rational phi_q = FactoredInt::from_integer(q).phi_over_n() * q;
  switch (psi.kind()) {
    case PsiFunction::Kind::Reciprocal:
      // psi(n)/n = scale/n^2 is decreasing; the supremum sits at n = q.
      return {phi_q * psi(q) / q, true};
    case PsiFunction::Kind::Constant: {
      // psi(n)/n decreasing on the support: the first multiple of q wins.
      for (long n = q; n <= n_cap || psi.support_end() < 0; n += q) {
        if (psi(n) > 0) return {phi_q * psi(n) / n, true};
        if (n > n_cap) break;
        long end = psi.support_end();
        if (end >= 0 && n > end) break;
      }
      return {Rational(0), true};
    }
    case PsiFunction::Kind::Table: {
      Rational best(0);
      bool truncated = false;
      for (const auto& [n, v] : psi.table_values()) {
        if (n % q != 0 || v == 0) continue;
        if (n > n_cap) {
          truncated = true;
          continue;
        }
        Rational val = v / n;
        if (val > best) best = val;
      }
      return {phi_q * best, !truncated};
    }
  }
  return {Rational(0), true};
}

AnatomyReport anatomy_count(long x, const Rational& t, const Rational& c) {
  if (x < 1 || t < 1) throw PreconditionError("anatomy_count: need x, t >= 1");
  if (c < 1 || c > 10) throw PreconditionError("anatomy_count: need 1 <= c <= 10");
  // Smallest-prime-factor sieve; each n is then read off as distinct primes.
  std::vector<int32_t> spf(x + 1, 0);
  for (long i = 2; i <= x; ++i) {
    if (spf[i] != 0) continue;
    for (long j = i; j <= x; j += i)
      if (spf[j] == 0) spf[j] = static_cast<int32_t>(i);
  }
  AnatomyReport rep;
  for (long n = 2; n <= x; ++n) {
    Rational s(0);
    long m = n;
    while (m > 1) {
      long p = spf[m];
      if (Rational(p) >= t) s += Rational(1, p);
      while (m % p == 0) m /= p;
    }
    if (s >= c) ++rep.count;
  }
  double td = mpq_get_d(t.get_mpq_t());
  double cd = mpq_get_d(c.get_mpq_t());
  rep.bound_diagnostic = static_cast<double>(x) * std::exp(-std::pow(td, std::exp(cd - 1)));
  return rep;
}

BigInt next_prime_at_least(const BigInt& lo) {
  BigInt p;
  BigInt start = lo - 1;
  if (start < 1) start = 1;
  mpz_nextprime(p.get_mpz_t(), start.get_mpz_t());
  return p;
}

nlohmann::json CounterexampleDiagnostics::to_json() const {
  return {{"n", n},
          {"x_scale", x_scale},
          {"p", p.get_str()},
          {"window_lo", rational_to_string(window_lo)},
          {"window_hi", rational_to_string(window_hi)},
          {"window_widened", window_widened},
          {"x", x.get_str()},
          {"size", size},
          {"gcd_threshold", rational_to_string(gcd_threshold)},
          {"all_in_range", all_in_range},
          {"all_pairwise_gcds_ok", all_pairwise_gcds_ok},
          {"max_divisor_fraction", rational_to_string(max_divisor_fraction)},
          {"max_divisor", max_divisor.get_str()},
          {"benchmark_fraction", rational_to_string(benchmark_fraction)},
          {"reported_slack", rational_to_string(reported_slack)},
          {"class_coverage_bound", rational_to_string(class_coverage_bound)},
          {"weighted_mass", rational_to_string(weighted_mass)},
          {"mass_per_log_n", mass_per_log_n}};
}

Counterexample model_counterexample(long n, long x_scale) {
  if (n < 4) throw PreconditionError("model_counterexample: n must be >= 4");
  if (x_scale < 3 * n) throw PreconditionError("model_counterexample: scale too small");

  BigInt fact = 1;
  for (long i = 2; i <= n; ++i) fact *= i;

  Counterexample out;
  auto& d = out.diag;
  d.n = n;
  d.x_scale = x_scale;

  // Prime window; at desk scale the lower edge is floored above n^2 so that
  // divisors of n! alone cannot reach the gcd threshold.
  Rational w_lo = Rational(x_scale) * powz(BigInt(n), 3) / fact;
  if (w_lo < n * n + 1) w_lo = Rational(n * n + 1);
  d.window_lo = w_lo;
  d.window_hi = w_lo * Rational(9, 8);
  BigInt lo_int = w_lo.get_num() / w_lo.get_den() + 1;
  d.p = next_prime_at_least(lo_int);
  d.window_widened = Rational(d.p) > d.window_hi;

  // x = x_scale * p * n! / n^2; every element then lands in [x, 2x].
  Rational x = Rational(x_scale) * d.p * fact / (BigInt(n) * n);
  d.gcd_threshold = Rational(d.p) * fact / (BigInt(n) * n);

  long j_lo = (3 * n + 3) / 4;
  long m_lo = (x_scale + n - 1) / n;
  long m_hi = (4 * x_scale) / (3 * n);
  std::vector<long> js;
  std::map<BigInt, std::vector<size_t>> by_j_class;  // n!/j -> element indices
  std::vector<BigInt> magnitudes;
  for (long j = j_lo; j <= n; ++j) {
    js.push_back(j);
    for (long m = m_lo; m <= m_hi; ++m) {
      if (std::gcd(m, j) != 1) continue;
      FactoredInt v = mul(mul(FactoredInt::from_integer(fact / j),
                              FactoredInt::prime_power(d.p, 1)),
                          FactoredInt::from_integer(m));
      BigInt mag = *v.magnitude();
      bool dup = false;
      for (const BigInt& prev : magnitudes)
        if (prev == mag) {
          dup = true;
          break;
        }
      if (dup) continue;
      by_j_class[fact / j].push_back(out.elements.size());
      out.elements.push_back(std::move(v));
      magnitudes.push_back(mag);
    }
  }
  d.size = out.elements.size();
  if (d.size < 2) throw PreconditionError("model_counterexample: set came out too small");

  d.all_in_range = true;
  for (const BigInt& mag : magnitudes)
    if (Rational(mag) < x || Rational(mag) > 2 * x) d.all_in_range = false;
  d.x = x.get_num() / x.get_den();

  d.all_pairwise_gcds_ok = true;
  std::map<BigInt, bool> divisor_candidates;
  for (size_t i = 0; i < magnitudes.size(); ++i) {
    for (size_t j = i + 1; j < magnitudes.size(); ++j) {
      BigInt g;
      mpz_gcd(g.get_mpz_t(), magnitudes[i].get_mpz_t(), magnitudes[j].get_mpz_t());
      if (Rational(g) < d.gcd_threshold) d.all_pairwise_gcds_ok = false;
      else divisor_candidates[g] = true;
    }
  }
  for (long j : js) divisor_candidates[d.p * (fact / j)] = true;

  d.max_divisor_fraction = 0;
  for (const auto& [div, unused] : divisor_candidates) {
    (void)unused;
    if (Rational(div) < d.gcd_threshold) continue;
    long cnt = 0;
    for (const BigInt& mag : magnitudes)
      if (mag % div == 0) ++cnt;
    Rational frac = make_ratio(cnt, static_cast<long>(d.size));
    if (frac > d.max_divisor_fraction) {
      d.max_divisor_fraction = frac;
      d.max_divisor = div;
    }
  }
  d.benchmark_fraction = Rational(1, (n + 3) / 4);
  d.reported_slack = d.max_divisor_fraction > d.benchmark_fraction
                         ? d.max_divisor_fraction - d.benchmark_fraction
                         : Rational(0);

  // Best coverage explainable by a structured divisor p * n!/lcm(j1, j2)
  // above the threshold.
  d.class_coverage_bound = 0;
  for (long j1 : js) {
    for (long j2 : js) {
      BigInt l = std::lcm(j1, j2);
      if (l > n * n) continue;
      BigInt div = d.p * (fact / l);
      if (Rational(div) < d.gcd_threshold) continue;
      long cnt = 0;
      for (const BigInt& mag : magnitudes)
        if (mag % div == 0) ++cnt;
      Rational frac = make_ratio(cnt, static_cast<long>(d.size));
      if (frac > d.class_coverage_bound) d.class_coverage_bound = frac;
    }
  }

  d.weighted_mass = 0;
  for (const auto& v : out.elements) d.weighted_mass += v.phi_over_n();
  d.mass_per_log_n = static_cast<double>(d.size) / std::log(static_cast<double>(n));
  return out;
}

}  // namespace gcdq
