#ifndef GCDQ_HARNESS_HPP
#define GCDQ_HARNESS_HPP

#include "gcdq/graph.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <vector>

namespace gcdq {

// Approximation function psi on the positive integers: an explicit table, a
// constant on a support range, or q -> scale/q.
class PsiFunction {
 public:
  enum class Kind { Table, Constant, Reciprocal };

  static PsiFunction table(std::map<long, Rational> values);
  static PsiFunction constant(const Rational& value, long support_lo = 1,
                              long support_hi = -1);  // hi < 0: unbounded
  static PsiFunction reciprocal(const Rational& scale = Rational(1));

  Rational operator()(long q) const;
  Kind kind() const { return kind_; }
  bool bounded_by_half_on(long lo, long hi) const;
  // Largest key of a table; -1 for unbounded kinds.
  long support_end() const;
  const std::map<long, Rational>& table_values() const { return table_; }

 private:
  Kind kind_ = Kind::Constant;
  std::map<long, Rational> table_;
  Rational value_ = Rational(0);
  long lo_ = 1, hi_ = -1;
};

// Finite union of closed subintervals of [0,1] with rational endpoints,
// normalized: sorted, touching pieces merged.
class IntervalUnion {
 public:
  IntervalUnion() = default;
  explicit IntervalUnion(std::vector<std::pair<Rational, Rational>> pieces);

  const std::vector<std::pair<Rational, Rational>>& pieces() const { return pieces_; }
  Rational measure() const;
  IntervalUnion intersect(const IntervalUnion& o) const;
  bool empty() const { return pieces_.empty(); }

 private:
  std::vector<std::pair<Rational, Rational>> pieces_;  // disjoint, ascending
};

// Union of the psi(q)/q-neighbourhoods of the reduced fractions a/q in [0,1].
IntervalUnion a_q_set(const PsiFunction& psi, long q);
// Non-reduced analogue over all 0 <= a <= q.
IntervalUnion k_q_set(const PsiFunction& psi, long q);

struct OverlapReport {
  Rational lhs;          // lambda(A_q n A_r) / (lambda(A_q) lambda(A_r))
  Rational rhs_core;     // prod over p | qr/gcd^2, p > M/gcd of (1 + 1/p)
  bool indicator;        // M(q, r) >= gcd(q, r)
  bool zero_denominator; // lambda(A_q) lambda(A_r) = 0 (lhs reported as 0)
  Rational intersection_measure;
};
OverlapReport overlap_report(const PsiFunction& psi, long q, long r);

// Minimal Y with sum_{X <= q <= Y} psi(q) phi(q) / q in [1, 2].
struct ChooseY {
  long y = 0;
  Rational sum;
  std::vector<Rational> partial_sums;  // one entry per q in [X, Y]
};
std::optional<ChooseY> choose_y(const PsiFunction& psi, long x, long cap = 2000000);

struct EdgePair {
  long v, w;
};
// Pairs (v, w) in ([X, Y] n Z)^2 with gcd(v, w) >= M(v, w)/t and
// L_t(v, w) >= threshold.
std::vector<EdgePair> build_edge_set(const PsiFunction& psi, long x, long y, const Rational& t,
                                     const Rational& threshold = Rational(10));

// sum over the edge set of mu(v) mu(w) with mu(q) = psi(q) phi(q) / q.
Rational second_moment(const PsiFunction& psi, long x, long y, const Rational& t,
                       const Rational& threshold = Rational(10));

// The weighted graph on the support of psi in [X, Y] with those edges and an
// empty accounted-prime set.
GcdGraph mu_graph_from_psi(const PsiFunction& psi, long x, long y, const Rational& t,
                           const Rational& threshold = Rational(10));

struct CatlinValue {
  Rational value;
  bool exact;  // false when only a truncated lower bound is available
};
// phi(q) * sup over multiples n of q of psi(n)/n, scanned up to n_cap.
CatlinValue catlin_star(const PsiFunction& psi, long q, long n_cap);

struct AnatomyReport {
  long count = 0;
  double bound_diagnostic = 0;  // x * exp(-t^{e^{c-1}}), unspecified constant
};
// #{n <= x : sum over p | n, p >= t of 1/p >= c}.
AnatomyReport anatomy_count(long x, const Rational& t, const Rational& c);

struct CounterexampleDiagnostics {
  long n = 0;
  long x_scale = 0;
  BigInt p;
  Rational window_lo, window_hi;
  bool window_widened = false;
  BigInt x;  // floor of the exact range anchor
  size_t size = 0;
  Rational gcd_threshold;
  bool all_in_range = false;
  bool all_pairwise_gcds_ok = false;
  Rational max_divisor_fraction;
  BigInt max_divisor;
  Rational benchmark_fraction;   // 1 / ceil(n/4)
  Rational reported_slack;       // max(0, max fraction - benchmark)
  Rational class_coverage_bound; // best multi-class coverage explaining it
  Rational weighted_mass;        // sum of phi(v)/v over S
  double mass_per_log_n = 0;     // #S / log n, for the reported deficit
  nlohmann::json to_json() const;
};

struct Counterexample {
  std::vector<FactoredInt> elements;
  CounterexampleDiagnostics diag;
};
// The structured set whose pairwise gcds are all large while no single large
// divisor covers more than a couple of index classes.
Counterexample model_counterexample(long n, long x_scale);

// Smallest prime >= lo (probabilistic test, same policy as FactoredInt).
BigInt next_prime_at_least(const BigInt& lo);

}  // namespace gcdq

#endif
