#include "gcdq/engine.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cassert>

namespace gcdq::engine {

namespace {

RationalInterval eval_qfe_product(const Rational& exact, const std::vector<BigInt>& primes,
                                  const ConstantsProfile& prof, unsigned bits) {
  RationalInterval r = RationalInterval::point(exact);
  for (const auto& p : primes)
    r = r * power_deficit_factor_enclosure(p, prof.trans_exponent, prof.density_exponent, bits);
  return r;
}

bool rel_holds(const RationalInterval& l, const std::string& rel, const RationalInterval& r) {
  if (rel == "GE") return certainly_ge(l, r);
  if (rel == "GT") return certainly_gt(l, r);
  if (rel == "LE") return certainly_le(l, r);
  if (rel == "LT") return certainly_lt(l, r);
  throw PreconditionError("unknown relation " + rel);
}

bool rel_refuted(const RationalInterval& l, const std::string& rel, const RationalInterval& r) {
  if (rel == "GE") return certainly_lt(l, r);
  if (rel == "GT") return certainly_le(l, r);
  if (rel == "LE") return certainly_gt(l, r);
  if (rel == "LT") return certainly_ge(l, r);
  throw PreconditionError("unknown relation " + rel);
}

struct ProbeOutcome {
  CheckResult result;
  RationalInterval lhs, rhs;
  unsigned bits = 0;
};

ProbeOutcome probe(const Config& cfg, const LazyInterval& lhs, const std::string& rel,
                   const LazyInterval& rhs) {
  unsigned bits = cfg.precision_bits;
  for (;;) {
    RationalInterval l = lhs(bits), r = rhs(bits);
    if (rel_holds(l, rel, r)) return {CheckResult::Certified, l, r, bits};
    if (rel_refuted(l, rel, r)) return {CheckResult::Refuted, l, r, bits};
    if ((l.is_point() && r.is_point()) || bits >= cfg.precision_ceiling)
      return {CheckResult::Indeterminate, l, r, bits};
    bits = std::min(bits * 2, cfg.precision_ceiling);
  }
}

std::string describe_row(const std::string& name, const ProbeOutcome& o,
                         const std::string& rel) {
  return name + ": [" + rational_to_string(o.lhs.lo) + "," + rational_to_string(o.lhs.hi) +
         "] " + rel + " [" + rational_to_string(o.rhs.lo) + "," + rational_to_string(o.rhs.hi) +
         "]";
}

}  // namespace

LazyInterval lazy_point(const Rational& x) {
  return [x](unsigned) { return RationalInterval::point(x); };
}

LazyInterval lazy_ratio(const Rational& exact, std::vector<BigInt> qfe_primes,
                        const ConstantsProfile& profile) {
  return [exact, primes = std::move(qfe_primes), profile](unsigned bits) {
    return eval_qfe_product(exact, primes, profile, bits);
  };
}

CheckResult certify(StepCertificate& cert, const Config& cfg, const std::string& name,
                    const LazyInterval& lhs, const std::string& rel, const LazyInterval& rhs) {
  ProbeOutcome o = probe(cfg, lhs, rel, rhs);
  CertIneq row{name, o.lhs, rel, o.rhs, o.result == CheckResult::Certified, o.bits};
  cert.inequalities.push_back(row);
  return o.result;
}

namespace {

// Records the row and throws unless it certifies.
void certify_or_throw(StepCertificate& cert, const Config& cfg, const std::string& name,
                      const LazyInterval& lhs, const std::string& rel,
                      const LazyInterval& rhs) {
  ProbeOutcome o = probe(cfg, lhs, rel, rhs);
  CertIneq row{name, o.lhs, rel, o.rhs, o.result == CheckResult::Certified, o.bits};
  cert.inequalities.push_back(row);
  if (o.result == CheckResult::Certified) return;
  std::string msg = cert.lemma_id + ": " + describe_row(name, o, rel);
  if (o.result == CheckResult::Indeterminate)
    throw IndeterminateError("unresolved at precision ceiling: " + msg);
  throw InconsistencyError("required inequality refuted: " + msg);
}

// lhs.lo >= 10^{-floor_exp10}, recorded with a concrete rational right side
// 10^{-proved} for a proved exponent <= floor_exp10.
void certify_floor_row(StepCertificate& cert, const Config& cfg, const std::string& name,
                       const LazyInterval& lhs, const BigInt& floor_exp10) {
  RationalInterval l = lhs(cfg.precision_bits);
  if (!at_least_pow10_floor(l.lo, floor_exp10)) {
    unsigned bits = cfg.precision_bits;
    bool ok = false;
    while (bits < cfg.precision_ceiling) {
      bits = std::min(bits * 2, cfg.precision_ceiling);
      l = lhs(bits);
      if (at_least_pow10_floor(l.lo, floor_exp10)) {
        ok = true;
        break;
      }
    }
    if (!ok)
      throw InconsistencyError(cert.lemma_id + ": " + name +
                               " fell below the certified stage floor");
  }
  Rational lo = l.lo;
  lo.canonicalize();
  long nn = static_cast<long>(mpz_sizeinbase(lo.get_num().get_mpz_t(), 10));
  long dn = static_cast<long>(mpz_sizeinbase(lo.get_den().get_mpz_t(), 10));
  long proved = std::max(0L, dn - nn + 1);
  BigInt proved_z(proved);
  if (proved_z > floor_exp10) {
    // Boundary case; the floor exponent is small enough to materialize.
    proved_z = floor_exp10;
  }
  Rational rhs(1, pow10z(proved_z.get_ui()));
  if (l.lo < rhs) throw InconsistencyError(cert.lemma_id + ": floor row construction failed");
  CertIneq row{name, l, "GE", RationalInterval::point(rhs), true, cfg.precision_bits};
  cert.inequalities.push_back(row);
  cert.params["floor_exp10"] = floor_exp10.get_str();
  cert.params["proved_exp10"] = proved_z.get_str();
}

Rational side_mass(const GcdGraph& g, Side s) {
  return s == Side::Left ? g.mu_left() : g.mu_right();
}

}  // namespace

Rational same_prime_quality_ratio(const GcdGraph& sub, const GcdGraph& sup, unsigned e) {
  if (sup.mu_edges() == 0)
    throw PreconditionError("same_prime_quality_ratio: trivial base graph");
  if (sub.mu_edges() == 0) return Rational(0);
  Rational r = pow_int(sub.mu_edges() / sup.mu_edges(), e);
  r *= pow_int(sup.mu_left() / sub.mu_left(), e - 1);
  r *= pow_int(sup.mu_right() / sub.mu_right(), e - 1);
  return r;
}

Rational added_prime_quality_ratio_exact(const GcdGraph& cand, const GcdGraph& base,
                                         const BigInt& p, const ConstantsProfile& profile) {
  if (base.primes().count(p))
    throw PreconditionError("added_prime_quality_ratio_exact: p already accounted in base");
  auto it = cand.primes().find(p);
  if (it == cand.primes().end())
    throw PreconditionError("added_prime_quality_ratio_exact: p not accounted in candidate");
  if (base.mu_edges() == 0)
    throw PreconditionError("added_prime_quality_ratio_exact: trivial base graph");
  if (cand.mu_edges() == 0) return Rational(0);
  unsigned e = profile.density_exponent;
  Rational r = pow_int(cand.mu_edges() / base.mu_edges(), e);
  r *= pow_int(base.mu_left() / cand.mu_left(), e - 1);
  r *= pow_int(base.mu_right() / cand.mu_right(), e - 1);
  auto [k, l] = it->second;
  unsigned diff = k > l ? k - l : l - k;
  if (diff > 0) r *= Rational(powz(p, diff));
  if (k == l && k >= 1) r /= pow_int(Rational(p - 1, p), 2);
  return r;
}

// --- high degree -----------------------------------------------------------

HighDegreeOutcome high_degree_step(const GcdGraph& g, const Config& cfg) {
  if (!g.non_trivial()) throw PreconditionError("high_degree_step: trivial graph");
  const unsigned e = cfg.profile.density_exponent;
  Rational delta = g.edge_density();
  Rational bound_l = cfg.profile.degree_fraction * delta * g.mu_right();
  Rational bound_r = cfg.profile.degree_fraction * delta * g.mu_left();

  struct Violator {
    Side side;
    size_t index;
    Rational nbhd;
  };
  std::vector<Violator> violators;
  Rational min_left_nbhd(-1), min_right_nbhd(-1);
  std::string argmin_left, argmin_right;
  for (size_t i = 0; i < g.left().size(); ++i) {
    Rational m = g.neighborhood_mass(Side::Left, i);
    if (min_left_nbhd < 0 || m < min_left_nbhd) {
      min_left_nbhd = m;
      argmin_left = g.left()[i].id;
    }
    if (m < bound_l) violators.push_back({Side::Left, i, m});
  }
  for (size_t j = 0; j < g.right().size(); ++j) {
    Rational m = g.neighborhood_mass(Side::Right, j);
    if (min_right_nbhd < 0 || m < min_right_nbhd) {
      min_right_nbhd = m;
      argmin_right = g.right()[j].id;
    }
    if (m < bound_r) violators.push_back({Side::Right, j, m});
  }

  HighDegreeOutcome out;
  out.cert.lemma_id = "high_degree_step";
  out.cert.input_digest = g.digest();
  if (violators.empty()) {
    out.all_high_degree = true;
    out.cert.branch = "ALL_HIGH_DEGREE";
    out.cert.output_digest = out.cert.input_digest;
    out.cert.params["min_left_neighbourhood_at"] = argmin_left;
    out.cert.params["min_right_neighbourhood_at"] = argmin_right;
    certify_or_throw(out.cert, cfg, "left-degree-bound", lazy_point(min_left_nbhd), "GE",
                     lazy_point(bound_l));
    certify_or_throw(out.cert, cfg, "right-degree-bound", lazy_point(min_right_nbhd), "GE",
                     lazy_point(bound_r));
    return out;
  }

  // Deleting any degree violator keeps density and quality from dropping;
  // take the deletion with the best exact quality ratio.
  std::optional<GcdGraph> best;
  Rational best_ratio(-1), best_dratio;
  Violator chosen{Side::Left, 0, Rational(0)};
  for (const auto& v : violators) {
    GcdGraph cand = g.drop_vertex(v.side, v.index);
    Rational ratio = same_prime_quality_ratio(cand, g, e);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_dratio = cand.edge_density() / delta;
      best = std::move(cand);
      chosen = v;
    }
  }
  out.all_high_degree = false;
  out.cert.branch = "VERTEX_REMOVED";
  out.cert.params["removed_side"] = chosen.side == Side::Left ? "left" : "right";
  out.cert.params["removed_id"] = g.side(chosen.side)[chosen.index].id;
  certify_or_throw(out.cert, cfg, "degree-violation", lazy_point(chosen.nbhd), "LT",
                   lazy_point(chosen.side == Side::Left ? bound_l : bound_r));
  certify_or_throw(out.cert, cfg, "density-ratio", lazy_point(best_dratio), "GE",
                   lazy_point(Rational(1)));
  certify_or_throw(out.cert, cfg, "quality-ratio", lazy_point(best_ratio), "GE",
                   lazy_point(Rational(1)));
  out.cert.output_digest = best->digest();
  out.graph = std::move(best);
  return out;
}

LoopOutcome high_degree_subgraph(const GcdGraph& g, const Config& cfg) {
  LoopOutcome out{g, {}};
  size_t fuel = g.left().size() + g.right().size() + 1;
  for (;;) {
    if (fuel-- == 0) throw InconsistencyError("high_degree_subgraph: loop did not terminate");
    HighDegreeOutcome step = high_degree_step(out.graph, cfg);
    if (step.all_high_degree) {
      const unsigned e = cfg.profile.density_exponent;
      certify_or_throw(step.cert, cfg, "quality-ratio-total",
                       lazy_point(same_prime_quality_ratio(out.graph, g, e)), "GE",
                       lazy_point(Rational(1)));
      certify_or_throw(step.cert, cfg, "density-ratio-total",
                       lazy_point(out.graph.edge_density() / g.edge_density()), "GE",
                       lazy_point(Rational(1)));
      out.steps.push_back(std::move(step.cert));
      return out;
    }
    out.steps.push_back(std::move(step.cert));
    out.graph = std::move(*step.graph);
  }
}

// --- pigeonhole ------------------------------------------------------------

PigeonholeOutcome pigeonhole(const GcdGraph& g,
                             const std::vector<std::vector<size_t>>& left_cells,
                             const std::vector<std::vector<size_t>>& right_cells,
                             const Config& cfg) {
  if (!g.non_trivial()) throw PreconditionError("pigeonhole: trivial graph");
  auto check_partition = [](const std::vector<std::vector<size_t>>& cells, size_t n) {
    std::vector<char> seen(n, 0);
    for (const auto& c : cells)
      for (size_t i : c) {
        if (i >= n || seen[i]) throw PreconditionError("pigeonhole: not a partition");
        seen[i] = 1;
      }
    for (char s : seen)
      if (!s) throw PreconditionError("pigeonhole: partition does not cover a side");
  };
  check_partition(left_cells, g.left().size());
  check_partition(right_cells, g.right().size());

  const unsigned e = cfg.profile.density_exponent;
  const size_t I = left_cells.size(), J = right_cells.size();
  Rational q_floor = pow_int(Rational(1, BigInt(I * J)), e);
  Rational d_floor = Rational(1, BigInt(I * J));
  Rational delta = g.edge_density();

  std::optional<GcdGraph> best;
  Rational best_ratio(-1), best_dratio;
  size_t best_i = 0, best_j = 0;
  for (size_t i = 0; i < I; ++i) {
    for (size_t j = 0; j < J; ++j) {
      GcdGraph cand = g.restrict_vertices(left_cells[i], right_cells[j]);
      if (cand.mu_edges() == 0) continue;
      Rational ratio = same_prime_quality_ratio(cand, g, e);
      Rational dratio = cand.edge_density() / delta;
      if (ratio < q_floor || dratio < d_floor) continue;
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best_dratio = dratio;
        best = std::move(cand);
        best_i = i;
        best_j = j;
      }
    }
  }
  if (!best)
    throw InconsistencyError("pigeonhole: no cell pair met the mass floor");

  PigeonholeOutcome out{std::move(*best), best_i, best_j, {}};
  out.cert.lemma_id = "pigeonhole";
  out.cert.branch = "CELL_SELECTED";
  out.cert.input_digest = g.digest();
  out.cert.output_digest = out.graph.digest();
  out.cert.params["cells_left"] = std::to_string(I);
  out.cert.params["cells_right"] = std::to_string(J);
  out.cert.params["cell_i"] = std::to_string(best_i);
  out.cert.params["cell_j"] = std::to_string(best_j);
  certify_or_throw(out.cert, cfg, "quality-ratio", lazy_point(best_ratio), "GE",
                   lazy_point(q_floor));
  certify_or_throw(out.cert, cfg, "density-ratio", lazy_point(best_dratio), "GE",
                   lazy_point(d_floor));
  return out;
}

// --- unbalanced sets ---------------------------------------------------------

UnbalancedOutcome unbalanced_check(const GcdGraph& g, const BigInt& p, unsigned k, unsigned r,
                                   Side concentrated_side, const Config& cfg) {
  const ConstantsProfile& prof = cfg.profile;
  if (!g.non_trivial()) throw PreconditionError("unbalanced_check: trivial graph");
  if (!g.r_set().count(p))
    throw PreconditionError("unbalanced_check: p is not a residual prime");
  if (r < 1 || powz(p, r) <= prof.small_prime_bound)
    throw PreconditionError("unbalanced_check: p^r must exceed the small-prime bound");
  Rational conc = g.class_mass(concentrated_side, p, k) / side_mass(g, concentrated_side);
  Rational conc_need = Rational(1) - make_ratio(prof.sharp_threshold, p);
  if (conc < conc_need)
    throw PreconditionError("unbalanced_check: concentration hypothesis fails");

  unsigned maxval = g.max_valuation(p);
  auto far_classes = [&]() {
    std::vector<unsigned> out;
    for (unsigned l = 0; l <= maxval; ++l) {
      unsigned diff = l > k ? l - k : k - l;
      if (diff >= r + 1) out.push_back(l);
    }
    return out;
  }();

  auto class_edge_mass = [&](unsigned far) {
    return concentrated_side == Side::Right ? g.edge_class_mass(p, k, far)
                                            : g.edge_class_mass(p, far, k);
  };

  Rational tail(0);
  for (unsigned l : far_classes) tail += class_edge_mass(l);

  UnbalancedOutcome out{UnbalancedBranch::SmallTail, std::nullopt, 0, {}};
  out.cert.lemma_id = "unbalanced_check";
  out.cert.input_digest = g.digest();
  out.cert.params["p"] = p.get_str();
  out.cert.params["k"] = std::to_string(k);
  out.cert.params["r"] = std::to_string(r);
  out.cert.params["side"] = concentrated_side == Side::Right ? "right" : "left";

  // tail <= mu(E) / (4 p^{a/b})
  Rational a = prof.trans_exponent.get_num(), b = prof.trans_exponent.get_den();
  LazyInterval tail_rhs = [mu_e = g.mu_edges(), p, an = a.get_num().get_ui(),
                           bn = b.get_num().get_ui()](unsigned bits) {
    RationalInterval root = nth_root_enclosure(Rational(powz(p, an)), bn, bits);
    return root.reciprocal() * (mu_e / 4);
  };
  ProbeOutcome tail_probe = probe(cfg, lazy_point(tail), "LE", tail_rhs);
  if (tail_probe.result == CheckResult::Certified) {
    out.branch = UnbalancedBranch::SmallTail;
    out.cert.branch = "SMALL_TAIL";
    out.cert.output_digest = out.cert.input_digest;
    certify_or_throw(out.cert, cfg, "concentration", lazy_point(conc), "GE",
                     lazy_point(conc_need));
    certify_or_throw(out.cert, cfg, "far-tail", lazy_point(tail), "LE", tail_rhs);
    return out;
  }

  // Tail not certifiably small: some far class must give a quality jump.
  Rational delta = g.edge_density();
  std::optional<GcdGraph> best;
  Rational best_lo(-1);
  unsigned best_l = 0;
  Rational best_exact, best_dratio;
  bool saw_indeterminate = tail_probe.result == CheckResult::Indeterminate;
  for (unsigned l : far_classes) {
    if (class_edge_mass(l) == 0) continue;
    GcdGraph cand = concentrated_side == Side::Right ? g.restrict_prime(p, k, l)
                                                     : g.restrict_prime(p, l, k);
    Rational exact = added_prime_quality_ratio_exact(cand, g, p, prof);
    Rational dratio = cand.edge_density() / delta;
    LazyInterval ratio = lazy_ratio(exact, {p}, prof);
    LazyInterval dq = lazy_ratio(exact * dratio, {p}, prof);
    ProbeOutcome p1 = probe(cfg, ratio, "GT", lazy_point(Rational(2)));
    ProbeOutcome p2 = probe(cfg, dq, "GT", lazy_point(Rational(2)));
    if (p1.result == CheckResult::Indeterminate || p2.result == CheckResult::Indeterminate)
      saw_indeterminate = true;
    if (p1.result == CheckResult::Certified && p2.result == CheckResult::Certified) {
      Rational lo = p1.lhs.lo;
      if (lo > best_lo) {
        best_lo = lo;
        best = std::move(cand);
        best_l = l;
        best_exact = exact;
        best_dratio = dratio;
      }
    }
  }
  if (!best) {
    if (saw_indeterminate)
      throw IndeterminateError("unbalanced_check: dichotomy unresolved at precision ceiling");
    throw InconsistencyError(
        "unbalanced_check: neither branch certified; this contradicts the unbalanced-set "
        "dichotomy under its preconditions");
  }
  out.branch = UnbalancedBranch::Increment;
  out.far_class = best_l;
  out.cert.branch = "INCREMENT";
  out.cert.params["far_class"] = std::to_string(best_l);
  out.cert.output_digest = best->digest();
  certify_or_throw(out.cert, cfg, "concentration", lazy_point(conc), "GE",
                   lazy_point(conc_need));
  certify_or_throw(out.cert, cfg, "quality-ratio", lazy_ratio(best_exact, {p}, prof), "GT",
                   lazy_point(Rational(2)));
  certify_or_throw(out.cert, cfg, "density-quality-ratio",
                   lazy_ratio(best_exact * best_dratio, {p}, prof), "GT",
                   lazy_point(Rational(2)));
  out.graph = std::move(best);
  return out;
}

// --- small sets --------------------------------------------------------------

namespace {

struct SubsetCandidate {
  std::vector<size_t> indices;
  Rational mass;
  std::string label;
};

std::vector<SubsetCandidate> side_candidates(const GcdGraph& g, Side s, const Rational& cap,
                                             bool exhaustive) {
  const auto& vs = g.side(s);
  std::vector<SubsetCandidate> out;
  if (exhaustive) {
    size_t n = vs.size();
    for (size_t mask = 1; mask + 1 < (size_t(1) << n) + 1; ++mask) {
      SubsetCandidate c;
      for (size_t i = 0; i < n; ++i)
        if (mask & (size_t(1) << i)) {
          c.indices.push_back(i);
          c.mass += vs[i].mu;
        }
      if (c.mass <= cap && c.indices.size() < vs.size()) {
        c.label = "mask:" + std::to_string(mask);
        out.push_back(std::move(c));
      }
    }
    return out;
  }
  // Structured family: exact valuation classes of residual primes, their
  // complements and window complements. These are the sets the sharp-prime
  // argument later interrogates.
  auto push = [&](std::vector<size_t> idx, std::string label) {
    if (idx.empty() || idx.size() >= vs.size()) return;
    SubsetCandidate c;
    c.indices = std::move(idx);
    for (size_t i : c.indices) c.mass += vs[i].mu;
    if (c.mass > cap) return;
    c.label = std::move(label);
    out.push_back(std::move(c));
  };
  for (const BigInt& p : g.r_set()) {
    unsigned maxval = g.max_valuation(p);
    for (unsigned k = 0; k <= maxval; ++k) {
      std::vector<size_t> cls = g.valuation_class(s, p, k), comp, wincomp;
      for (size_t i = 0; i < vs.size(); ++i) {
        unsigned v = vs[i].n.valuation(p);
        if (v != k) comp.push_back(i);
        if (v + 1 < k || v > k + 1) wincomp.push_back(i);
      }
      std::string base = "p=" + p.get_str() + ",k=" + std::to_string(k);
      push(std::move(cls), "class:" + base);
      push(std::move(comp), "complement:" + base);
      push(std::move(wincomp), "window-complement:" + base);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SubsetCandidate& a, const SubsetCandidate& b) { return a.label < b.label; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const SubsetCandidate& a, const SubsetCandidate& b) {
                          return a.indices == b.indices;
                        }),
            out.end());
  return out;
}

}  // namespace

SmallSetOutcome small_set_step(const GcdGraph& g, const Rational& eta, const Config& cfg) {
  if (!g.non_trivial()) throw PreconditionError("small_set_step: trivial graph");
  if (eta <= 0 || eta >= 1) throw PreconditionError("small_set_step: eta must lie in (0,1)");
  const ConstantsProfile& prof = cfg.profile;
  const unsigned e = prof.density_exponent;

  // mass threshold eta^{2(e-1)/e} * mu(E)
  LazyInterval rhs = [eta, e, mu_e = g.mu_edges()](unsigned bits) {
    return nth_root_enclosure(pow_int(eta, 2 * (static_cast<long>(e) - 1)), e, bits) * mu_e;
  };

  bool exhaustive = g.left().size() <= 8 && g.right().size() <= 8;
  auto lcands = side_candidates(g, Side::Left, eta * g.mu_left(), exhaustive);
  auto rcands = side_candidates(g, Side::Right, eta * g.mu_right(), exhaustive);

  SmallSetOutcome out{SmallSetBranch::NoDensePair, std::nullopt, {}};
  out.cert.lemma_id = "small_set_step";
  out.cert.input_digest = g.digest();
  out.cert.params["eta"] = rational_to_string(eta);
  out.cert.params["search"] = exhaustive ? "exhaustive" : "structured";
  out.cert.params["candidates_left"] = std::to_string(lcands.size());
  out.cert.params["candidates_right"] = std::to_string(rcands.size());

  // A pair is a witness only if its edge mass certifiably exceeds the
  // threshold; among witnesses the best exact quality ratio wins.
  Rational max_pair_mass(0);
  const SubsetCandidate* bestA = nullptr;
  const SubsetCandidate* bestB = nullptr;
  Rational best_ratio(-1);
  Rational best_mass(0);
  std::vector<Rational> row(g.right().size());
  for (const auto& A : lcands) {
    std::fill(row.begin(), row.end(), Rational(0));
    std::vector<char> inA(g.left().size(), 0);
    for (size_t i : A.indices) inA[i] = 1;
    for (const auto& [i, j] : g.edges())
      if (inA[i]) row[j] += g.left()[i].mu * g.right()[j].mu;
    for (const auto& B : rcands) {
      Rational mass(0);
      for (size_t j : B.indices) mass += row[j];
      if (mass > max_pair_mass) max_pair_mass = mass;
      if (mass == 0) continue;
      Rational ratio = pow_int(mass / g.mu_edges(), e) *
                       pow_int(g.mu_left() / A.mass, e - 1) *
                       pow_int(g.mu_right() / B.mass, e - 1);
      if (ratio <= best_ratio) continue;
      if (probe(cfg, lazy_point(mass), "GT", rhs).result != CheckResult::Certified) continue;
      best_ratio = ratio;
      best_mass = mass;
      bestA = &A;
      bestB = &B;
    }
  }

  if (bestA) {
    GcdGraph sub = g.restrict_vertices(bestA->indices, bestB->indices);
    out.branch = SmallSetBranch::Restricted;
    out.cert.branch = "RESTRICTED";
    out.cert.params["A"] = bestA->label;
    out.cert.params["B"] = bestB->label;
    certify_or_throw(out.cert, cfg, "left-set-mass", lazy_point(bestA->mass), "LE",
                     lazy_point(eta * g.mu_left()));
    certify_or_throw(out.cert, cfg, "right-set-mass", lazy_point(bestB->mass), "LE",
                     lazy_point(eta * g.mu_right()));
    certify_or_throw(out.cert, cfg, "small-pair-mass", lazy_point(best_mass), "GT", rhs);
    certify_or_throw(out.cert, cfg, "quality-ratio",
                     lazy_point(same_prime_quality_ratio(sub, g, e)), "GT",
                     lazy_point(Rational(1)));
    out.cert.output_digest = sub.digest();
    out.graph = std::move(sub);
    return out;
  }

  out.cert.branch = "NO_DENSE_SMALL_PAIR";
  out.cert.output_digest = out.cert.input_digest;
  certify_or_throw(out.cert, cfg, "max-small-pair-mass", lazy_point(max_pair_mass), "LE", rhs);
  return out;
}

LoopOutcome no_small_set_edges(const GcdGraph& g, const Rational& eta, const Config& cfg) {
  LoopOutcome out{g, {}};
  size_t fuel = g.left().size() + g.right().size() + 1;
  for (;;) {
    if (fuel-- == 0) throw InconsistencyError("no_small_set_edges: loop did not terminate");
    SmallSetOutcome step = small_set_step(out.graph, eta, cfg);
    out.steps.push_back(step.cert);
    if (step.branch == SmallSetBranch::NoDensePair) return out;
    out.graph = std::move(*step.graph);
  }
}

// --- edge class pick ---------------------------------------------------------

EdgeSetsPick edge_sets_pick(const GcdGraph& g, const BigInt& p, const Config& cfg) {
  const ConstantsProfile& prof = cfg.profile;
  if (!g.non_trivial()) throw PreconditionError("edge_sets_pick: trivial graph");
  if (!g.r_set().count(p)) throw PreconditionError("edge_sets_pick: p not residual");

  unsigned maxval = g.max_valuation(p);
  std::vector<Rational> alpha(maxval + 1), beta(maxval + 1);
  for (unsigned k = 0; k <= maxval; ++k) {
    alpha[k] = g.class_mass(Side::Left, p, k) / g.mu_left();
    beta[k] = g.class_mass(Side::Right, p, k) / g.mu_right();
  }

  unsigned long sig_num = prof.pigeon_exponent.get_num().get_ui();
  unsigned long sig_den = prof.pigeon_exponent.get_den().get_ui();

  struct Qualifier {
    unsigned k, l;
    std::string tag;
    Rational lhs;
    LazyInterval rhs;
    Rational ratio_lo;
  };
  std::vector<Qualifier> qualifiers;
  bool saw_indeterminate = false;

  for (unsigned k = 0; k <= maxval; ++k) {
    for (unsigned l = 0; l <= maxval; ++l) {
      if (alpha[k] == 0 || beta[l] == 0) continue;
      Rational lhs = g.edge_class_mass(p, k, l) / g.mu_edges();
      LazyInterval rhs;
      std::string tag;
      if (k == l) {
        tag = "diagonal";
        Rational base = pow_int(alpha[k] * beta[k], static_cast<long>(sig_num));
        rhs = [base, sig_den](unsigned bits) {
          return nth_root_enclosure(base, sig_den, bits);
        };
      } else {
        tag = "off-diagonal";
        Rational s = alpha[k] * (1 - beta[k]) + beta[k] * (1 - alpha[k]) +
                     alpha[l] * (1 - beta[l]) + beta[l] * (1 - alpha[l]);
        unsigned diff = k > l ? k - l : l - k;
        Rational decay_exp = prof.decay * diff;
        decay_exp.canonicalize();
        unsigned long dn = decay_exp.get_num().get_ui();
        unsigned long dd = decay_exp.get_den().get_ui();
        Rational scale = s / prof.edge_sets_denominator;
        rhs = [scale, dn, dd](unsigned bits) {
          return nth_root_enclosure(Rational(pow2z(dn)), dd, bits).reciprocal() * scale;
        };
      }
      ProbeOutcome pr = probe(cfg, lazy_point(lhs), "GE", rhs);
      if (pr.result == CheckResult::Indeterminate) saw_indeterminate = true;
      if (pr.result != CheckResult::Certified) continue;
      Rational ratio_lo(0);
      if (lhs > 0)
        ratio_lo = g.quality_ratio(p, k, l, prof, cfg.precision_bits).lo;
      qualifiers.push_back({k, l, tag, lhs, rhs, ratio_lo});
    }
  }
  if (qualifiers.empty()) {
    if (saw_indeterminate)
      throw IndeterminateError("edge_sets_pick: unresolved at precision ceiling");
    throw InconsistencyError(
        "edge_sets_pick: no class pair met the bound; this contradicts the edge-set bound "
        "lemma");
  }
  const Qualifier* best = &qualifiers.front();
  for (const auto& q : qualifiers)
    if (q.ratio_lo > best->ratio_lo) best = &q;

  EdgeSetsPick out;
  out.k = best->k;
  out.l = best->l;
  out.bound_tag = best->tag;
  out.cert.lemma_id = "edge_sets_pick";
  out.cert.branch = best->tag;
  out.cert.input_digest = g.digest();
  out.cert.output_digest = out.cert.input_digest;
  out.cert.params["p"] = p.get_str();
  out.cert.params["k"] = std::to_string(best->k);
  out.cert.params["l"] = std::to_string(best->l);
  out.cert.params["alpha_k"] = rational_to_string(alpha[best->k]);
  out.cert.params["beta_l"] = rational_to_string(beta[best->l]);
  certify_or_throw(out.cert, cfg, "edge-class-bound", lazy_point(best->lhs), "GE", best->rhs);
  return out;
}

// --- main increment dichotomies ----------------------------------------------

namespace {

struct IncrementProbe {
  bool ok = false;
  bool indeterminate = false;
  GcdGraph graph;
  Rational exact;   // exact part of q'/q
  Rational dratio;  // delta'/delta
  Rational lo;      // certified lower endpoint of the ratio
};

IncrementProbe try_increment(const GcdGraph& g, const BigInt& p, unsigned k, unsigned l,
                             const Rational& target, const Config& cfg) {
  IncrementProbe out;
  if (g.edge_class_mass(p, k, l) == 0) return out;
  GcdGraph cand = g.restrict_prime(p, k, l);
  Rational exact = added_prime_quality_ratio_exact(cand, g, p, cfg.profile);
  Rational dratio = cand.edge_density() / g.edge_density();
  ProbeOutcome p1 = probe(cfg, lazy_ratio(exact, {p}, cfg.profile), "GE", lazy_point(target));
  ProbeOutcome p2 =
      probe(cfg, lazy_ratio(exact * dratio, {p}, cfg.profile), "GE", lazy_point(target));
  out.indeterminate = p1.result == CheckResult::Indeterminate ||
                      p2.result == CheckResult::Indeterminate;
  if (p1.result == CheckResult::Certified && p2.result == CheckResult::Certified) {
    out.ok = true;
    out.graph = std::move(cand);
    out.exact = exact;
    out.dratio = dratio;
    out.lo = p1.lhs.lo;
  }
  return out;
}

MainStepOutcome increment_or_concentrate(const GcdGraph& g, const BigInt& p, const Config& cfg,
                                         const std::string& lemma_id,
                                         const std::function<Rational(bool)>& target_for,
                                         const Rational& conc_floor) {
  const ConstantsProfile& prof = cfg.profile;
  if (!g.non_trivial()) throw PreconditionError(lemma_id + ": trivial graph");
  if (!g.r_set().count(p)) throw PreconditionError(lemma_id + ": p not residual");

  MainStepOutcome out;
  out.cert.lemma_id = lemma_id;
  out.cert.input_digest = g.digest();
  out.cert.params["p"] = p.get_str();

  // A concentrated exponent is an exact-rational condition; branch on it
  // first so that fully concentrated inputs resolve without any enclosure.
  unsigned maxval = g.max_valuation(p);
  Rational need_l = conc_floor * g.mu_left();
  Rational need_r = conc_floor * g.mu_right();
  for (unsigned k = 0; k <= maxval; ++k) {
    Rational ml = g.class_mass(Side::Left, p, k);
    Rational mr = g.class_mass(Side::Right, p, k);
    if (ml >= need_l && mr >= need_r) {
      out.branch = MainBranch::Concentrated;
      out.concentrated_k = k;
      out.cert.branch = "CONCENTRATED";
      out.cert.params["k"] = std::to_string(k);
      out.cert.output_digest = out.cert.input_digest;
      certify_or_throw(out.cert, cfg, "left-concentration", lazy_point(ml), "GE",
                       lazy_point(need_l));
      certify_or_throw(out.cert, cfg, "right-concentration", lazy_point(mr), "GE",
                       lazy_point(need_r));
      return out;
    }
  }

  EdgeSetsPick pick = edge_sets_pick(g, p, cfg);
  out.cert.params["pick_k"] = std::to_string(pick.k);
  out.cert.params["pick_l"] = std::to_string(pick.l);
  out.cert.params["pick_tag"] = pick.bound_tag;

  bool saw_indeterminate = false;
  auto finish_increment = [&](unsigned k, unsigned l, IncrementProbe&& inc) {
    out.branch = MainBranch::Increment;
    out.n_flag = k != l ? 1 : 0;
    out.cert.branch = "INCREMENT";
    out.cert.params["k"] = std::to_string(k);
    out.cert.params["l"] = std::to_string(l);
    out.cert.params["n_flag"] = std::to_string(out.n_flag);
    Rational target = target_for(k != l);
    certify_or_throw(out.cert, cfg, "quality-ratio", lazy_ratio(inc.exact, {p}, prof), "GE",
                     lazy_point(target));
    certify_or_throw(out.cert, cfg, "density-quality-ratio",
                     lazy_ratio(inc.exact * inc.dratio, {p}, prof), "GE", lazy_point(target));
    out.cert.output_digest = inc.graph.digest();
    out.graph = std::move(inc.graph);
    return out;
  };

  // First the pigeonholed pair, then a full deterministic scan.
  {
    IncrementProbe inc = try_increment(g, p, pick.k, pick.l, target_for(pick.k != pick.l), cfg);
    saw_indeterminate |= inc.indeterminate;
    if (inc.ok) return finish_increment(pick.k, pick.l, std::move(inc));
  }
  std::optional<IncrementProbe> best;
  unsigned best_k = 0, best_l = 0;
  for (unsigned k = 0; k <= maxval; ++k) {
    for (unsigned l = 0; l <= maxval; ++l) {
      if (k == pick.k && l == pick.l) continue;
      IncrementProbe inc = try_increment(g, p, k, l, target_for(k != l), cfg);
      saw_indeterminate |= inc.indeterminate;
      if (inc.ok && (!best || inc.lo > best->lo)) {
        best = std::move(inc);
        best_k = k;
        best_l = l;
      }
    }
  }
  if (best) return finish_increment(best_k, best_l, std::move(*best));
  if (saw_indeterminate)
    throw IndeterminateError(lemma_id + ": dichotomy unresolved at precision ceiling");
  throw InconsistencyError(lemma_id +
                           ": neither an increment nor a concentrated exponent certified; "
                           "this contradicts the dichotomy under its preconditions");
}

}  // namespace

MainStepOutcome main_step(const GcdGraph& g, const BigInt& p, const Config& cfg) {
  if (p <= cfg.profile.sharp_threshold)
    throw PreconditionError("main_step: p must exceed the sharp threshold");
  Rational conc = Rational(1) - make_ratio(cfg.profile.sharp_threshold, p);
  return increment_or_concentrate(
      g, p, cfg, "main_step",
      [](bool off_diagonal) { return Rational(off_diagonal ? 2 : 1); }, conc);
}

MainStepOutcome small_prime_step(const GcdGraph& g, const BigInt& p, const Config& cfg) {
  Rational floor = cfg.profile.small_loss_floor;
  return increment_or_concentrate(
      g, p, cfg, "small_prime_step", [floor](bool) { return floor; },
      cfg.profile.concentration_fraction);
}

// --- sharp prime step ----------------------------------------------------------

SubgraphChain main_step_sharp(const GcdGraph& g, const BigInt& p, const Config& cfg) {
  const ConstantsProfile& prof = cfg.profile;
  const unsigned e = prof.density_exponent;
  if (!g.non_trivial()) throw PreconditionError("main_step_sharp: trivial graph");
  if (!g.r_set().count(p)) throw PreconditionError("main_step_sharp: p not residual");
  if (p < prof.small_prime_bound)
    throw PreconditionError("main_step_sharp: p must be at least the small-prime bound");

  SubgraphChain out{g, {}};
  Rational eta = make_ratio(prof.sharp_threshold, p);
  if (eta >= 1) throw PreconditionError("main_step_sharp: threshold ratio not below 1");

  LoopOutcome nse = no_small_set_edges(g, eta, cfg);
  for (auto& s : nse.steps) out.steps.push_back(std::move(s));
  GcdGraph base = std::move(nse.graph);
  Rational base_ratio = same_prime_quality_ratio(base, g, e);

  auto vanished = [&](const GcdGraph& h) { return !h.r_set().count(p); };

  auto finish = [&](GcdGraph&& final_graph, const std::string& via) {
    StepCertificate cert;
    cert.lemma_id = "main_step_sharp";
    cert.branch = via;
    cert.input_digest = base.digest();
    cert.output_digest = final_graph.digest();
    cert.params["p"] = p.get_str();
    Rational exact = base_ratio * added_prime_quality_ratio_exact(final_graph, base, p, prof);
    certify_or_throw(cert, cfg, "overall-quality-ratio", lazy_ratio(exact, {p}, prof), "GE",
                     lazy_point(Rational(1)));
    out.steps.push_back(std::move(cert));
    out.graph = std::move(final_graph);
    return std::move(out);
  };

  // The small-set restriction can remove every edge whose gcd carries p; the
  // prime is then accounted at exponent 0 on both sides.
  if (vanished(base)) return finish(base.with_prime_accounted(p, 0, 0), "VANISHED_RESIDUAL");

  MainStepOutcome ms = main_step(base, p, cfg);
  out.steps.push_back(ms.cert);
  if (ms.branch == MainBranch::Increment) return finish(std::move(*ms.graph), "MAIN_INCREMENT");
  unsigned k = ms.concentrated_k;

  UnbalancedOutcome ub_r = unbalanced_check(base, p, k, 1, Side::Right, cfg);
  out.steps.push_back(ub_r.cert);
  if (ub_r.branch == UnbalancedBranch::Increment)
    return finish(std::move(*ub_r.graph), "UNBALANCED_INCREMENT");
  UnbalancedOutcome ub_l = unbalanced_check(base, p, k, 1, Side::Left, cfg);
  out.steps.push_back(ub_l.cert);
  if (ub_l.branch == UnbalancedBranch::Increment)
    return finish(std::move(*ub_l.graph), "UNBALANCED_INCREMENT");

  // Core edges: one endpoint pinned at valuation k, the other within one.
  std::vector<size_t> core_edges;
  for (size_t idx = 0; idx < base.edges().size(); ++idx) {
    auto [i, j] = base.edges()[idx];
    unsigned vi = base.left()[i].n.valuation(p);
    unsigned wj = base.right()[j].n.valuation(p);
    bool left_core = vi == k && (wj + 1 >= k && wj <= k + 1);
    bool right_core = wj == k && (vi + 1 >= k && vi <= k + 1);
    if (left_core || right_core) core_edges.push_back(idx);
  }
  GcdGraph star = base.restrict_edges(core_edges);

  struct Candidate {
    std::string name;
    GcdGraph graph;
  };
  std::vector<Candidate> cands;
  {
    // Both sides within {k, k+1}; every core edge between them pins p^k.
    std::vector<size_t> vplus, wplus;
    for (size_t i = 0; i < star.left().size(); ++i) {
      unsigned v = star.left()[i].n.valuation(p);
      if (v == k || v == k + 1) vplus.push_back(i);
    }
    for (size_t j = 0; j < star.right().size(); ++j) {
      unsigned v = star.right()[j].n.valuation(p);
      if (v == k || v == k + 1) wplus.push_back(j);
    }
    GcdGraph plus = star.restrict_vertices(vplus, wplus).with_prime_accounted(p, k, k);
    cands.push_back({"PLUS", std::move(plus)});
  }
  if (k >= 1) {
    cands.push_back({"DOWN_RIGHT", star.restrict_prime(p, k, k - 1)});
    cands.push_back({"DOWN_LEFT", star.restrict_prime(p, k - 1, k)});
  }

  std::optional<size_t> best;
  Rational best_lo(-1);
  std::vector<Rational> exacts(cands.size());
  bool saw_indeterminate = false;
  for (size_t c = 0; c < cands.size(); ++c) {
    if (cands[c].graph.mu_edges() == 0) continue;
    exacts[c] = base_ratio * added_prime_quality_ratio_exact(cands[c].graph, base, p, prof);
    ProbeOutcome pr =
        probe(cfg, lazy_ratio(exacts[c], {p}, prof), "GE", lazy_point(Rational(1)));
    if (pr.result == CheckResult::Indeterminate) saw_indeterminate = true;
    if (pr.result == CheckResult::Certified && pr.lhs.lo > best_lo) {
      best_lo = pr.lhs.lo;
      best = c;
    }
  }
  if (!best) {
    if (saw_indeterminate)
      throw IndeterminateError("main_step_sharp: unresolved at precision ceiling");
    throw InconsistencyError(
        "main_step_sharp: no candidate subgraph kept the quality; this contradicts the "
        "sharp-prime increment under its preconditions");
  }
  StepCertificate cert;
  cert.lemma_id = "main_step_sharp";
  cert.branch = cands[*best].name;
  cert.input_digest = base.digest();
  cert.output_digest = cands[*best].graph.digest();
  cert.params["p"] = p.get_str();
  cert.params["k"] = std::to_string(k);
  cert.params["core_edge_mass"] = rational_to_string(star.mu_edges());
  certify_or_throw(cert, cfg, "overall-quality-ratio",
                   lazy_ratio(exacts[*best], {p}, prof), "GE", lazy_point(Rational(1)));
  out.steps.push_back(std::move(cert));
  out.graph = std::move(cands[*best].graph);
  return out;
}

// --- small prime iteration ------------------------------------------------------

namespace {

void certify_end_to_end(StepCertificate& cert, const Config& cfg, const GcdGraph& from,
                        const GcdGraph& to, const std::vector<BigInt>& new_primes,
                        const Rational& exact_ratio, const Rational& floor) {
  Rational dratio = to.edge_density() / from.edge_density();
  Rational scaled = dratio < 1 ? exact_ratio * dratio : exact_ratio;
  certify_or_throw(cert, cfg, "end-to-end-loss", lazy_ratio(scaled, new_primes, cfg.profile),
                   "GE", lazy_point(floor));
}

}  // namespace

SubgraphChain small_prime_iteration(const GcdGraph& g, const BigInt& p, const Config& cfg) {
  const ConstantsProfile& prof = cfg.profile;
  const unsigned e = prof.density_exponent;
  if (!g.non_trivial()) throw PreconditionError("small_prime_iteration: trivial graph");
  if (!g.r_set().count(p)) throw PreconditionError("small_prime_iteration: p not residual");
  if (p > prof.small_prime_bound)
    throw PreconditionError("small_prime_iteration: p exceeds the small-prime bound");

  SubgraphChain out{g, {}};
  LoopOutcome hd = high_degree_subgraph(g, cfg);
  for (auto& s : hd.steps) out.steps.push_back(std::move(s));
  GcdGraph base = std::move(hd.graph);
  Rational base_ratio = same_prime_quality_ratio(base, g, e);

  auto finish = [&](GcdGraph&& final_graph, const std::string& via) {
    StepCertificate cert;
    cert.lemma_id = "small_prime_iteration";
    cert.branch = via;
    cert.input_digest = final_graph.digest();
    cert.output_digest = cert.input_digest;
    cert.params["p"] = p.get_str();
    cert.params["baseline_digest"] = g.digest();
    Rational exact = base_ratio * added_prime_quality_ratio_exact(final_graph, base, p, prof);
    certify_end_to_end(cert, cfg, g, final_graph, {p}, exact, prof.iteration_floor);
    out.steps.push_back(std::move(cert));
    out.graph = std::move(final_graph);
    return std::move(out);
  };

  // Degree cleanup can strip every edge whose gcd carries p.
  if (!base.r_set().count(p))
    return finish(base.with_prime_accounted(p, 0, 0), "VANISHED_RESIDUAL");

  MainStepOutcome sps = small_prime_step(base, p, cfg);
  out.steps.push_back(sps.cert);
  if (sps.branch == MainBranch::Increment)
    return finish(std::move(*sps.graph), "SMALL_STEP_INCREMENT");
  unsigned k = sps.concentrated_k;

  if (p > 10 * prof.sharp_threshold) {
    MainStepOutcome ms = main_step(base, p, cfg);
    out.steps.push_back(ms.cert);
    if (ms.branch == MainBranch::Increment)
      return finish(std::move(*ms.graph), "MAIN_INCREMENT");
    if (ms.concentrated_k != k)
      throw InconsistencyError(
          "small_prime_iteration: two disjoint concentrated exponents of mass >= 9/10");
  }

  unsigned r = 1;
  {
    BigInt q = p;
    while (q <= prof.small_prime_bound) {
      q *= p;
      ++r;
    }
  }

  UnbalancedOutcome ub = unbalanced_check(base, p, k, r, Side::Right, cfg);
  out.steps.push_back(ub.cert);
  if (ub.branch == UnbalancedBranch::Increment)
    return finish(std::move(*ub.graph), "UNBALANCED_INCREMENT");

  // Window restriction: left side pinned at k, right side within r of k.
  std::vector<size_t> vk, wtilde;
  for (size_t i = 0; i < base.left().size(); ++i)
    if (base.left()[i].n.valuation(p) == k) vk.push_back(i);
  for (size_t j = 0; j < base.right().size(); ++j) {
    unsigned v = base.right()[j].n.valuation(p);
    if (v + r >= k && v <= k + r) wtilde.push_back(j);
  }
  GcdGraph window = base.restrict_vertices(vk, wtilde);
  {
    StepCertificate cert;
    cert.lemma_id = "small_prime_iteration";
    cert.branch = "WINDOW";
    cert.input_digest = base.digest();
    cert.output_digest = window.digest();
    cert.params["p"] = p.get_str();
    cert.params["k"] = std::to_string(k);
    cert.params["r"] = std::to_string(r);
    certify_or_throw(cert, cfg, "window-edge-mass", lazy_point(window.mu_edges()), "GE",
                     lazy_point(Rational(14, 25) * base.mu_edges()));
    out.steps.push_back(std::move(cert));
  }

  // Partition the window's right side by exact valuation and pigeonhole.
  std::map<unsigned, std::vector<size_t>> classes;
  for (size_t j = 0; j < window.right().size(); ++j)
    classes[window.right()[j].n.valuation(p)].push_back(j);
  std::vector<std::vector<size_t>> right_cells;
  std::vector<unsigned> cell_val;
  for (auto& [val, cell] : classes) {
    cell_val.push_back(val);
    right_cells.push_back(std::move(cell));
  }
  if (right_cells.size() > 2 * static_cast<size_t>(r) + 1)
    throw InconsistencyError("small_prime_iteration: window has too many classes");
  std::vector<size_t> all_left(window.left().size());
  for (size_t i = 0; i < all_left.size(); ++i) all_left[i] = i;

  PigeonholeOutcome ph = pigeonhole(window, {all_left}, right_cells, cfg);
  unsigned l0 = cell_val[ph.cell_right];
  out.steps.push_back(ph.cert);

  GcdGraph final_graph = ph.graph.with_prime_accounted(p, k, l0);
  StepCertificate cert;
  cert.lemma_id = "small_prime_iteration";
  cert.branch = "WINDOW_PIGEONHOLE";
  cert.input_digest = ph.graph.digest();
  cert.output_digest = final_graph.digest();
  cert.params["p"] = p.get_str();
  cert.params["k"] = std::to_string(k);
  cert.params["l"] = std::to_string(l0);
  cert.params["baseline_digest"] = g.digest();
  Rational exact = base_ratio * added_prime_quality_ratio_exact(final_graph, base, p, prof);
  certify_end_to_end(cert, cfg, g, final_graph, {p}, exact, prof.iteration_floor);
  out.steps.push_back(std::move(cert));
  out.graph = std::move(final_graph);
  return out;
}

// --- the three iteration drivers -------------------------------------------------

namespace {

void require_large_residuals(const GcdGraph& g, const ConstantsProfile& prof,
                             const std::string& who) {
  for (const BigInt& p : g.r_set())
    if (p <= prof.small_prime_bound)
      throw PreconditionError(who + ": residual primes must exceed the small-prime bound");
}

}  // namespace

SubgraphChain prop_flat(const GcdGraph& g, const Config& cfg) {
  const ConstantsProfile& prof = cfg.profile;
  if (!g.non_trivial()) throw PreconditionError("prop_flat: trivial graph");
  require_large_residuals(g, prof, "prop_flat");
  std::set<BigInt> flat = g.r_flat(prof);
  if (flat.empty()) throw PreconditionError("prop_flat: no unconcentrated residual prime");
  BigInt p = *flat.begin();

  MainStepOutcome ms = main_step(g, p, cfg);
  if (ms.branch != MainBranch::Increment)
    throw InconsistencyError(
        "prop_flat: main step concentrated on a prime classified as unconcentrated");
  SubgraphChain out{std::move(*ms.graph), {}};
  out.steps.push_back(std::move(ms.cert));

  StepCertificate cert;
  cert.lemma_id = "prop_flat";
  cert.branch = "INCREMENT";
  cert.input_digest = out.graph.digest();
  cert.output_digest = cert.input_digest;
  cert.params["p"] = p.get_str();
  cert.params["new_diff_primes"] = std::to_string(ms.n_flag);
  cert.params["baseline_digest"] = g.digest();
  Rational exact = added_prime_quality_ratio_exact(out.graph, g, p, prof);
  Rational dratio = out.graph.edge_density() / g.edge_density();
  Rational scaled = dratio < 1 ? exact * dratio : exact;
  certify_or_throw(cert, cfg, "loss-bound", lazy_ratio(scaled, {p}, prof), "GE",
                   lazy_point(pow_int(Rational(2), ms.n_flag)));
  out.steps.push_back(std::move(cert));
  return out;
}

SubgraphChain prop_sharp(const GcdGraph& g, const Config& cfg) {
  const ConstantsProfile& prof = cfg.profile;
  if (!g.non_trivial()) throw PreconditionError("prop_sharp: trivial graph");
  require_large_residuals(g, prof, "prop_sharp");
  if (!g.r_flat(prof).empty())
    throw PreconditionError("prop_sharp: an unconcentrated residual prime remains");
  std::set<BigInt> sharp = g.r_sharp(prof);
  if (sharp.empty()) throw PreconditionError("prop_sharp: no residual prime");
  return main_step_sharp(g, *sharp.begin(), cfg);
}

SubgraphChain prop_small(const GcdGraph& g, const Config& cfg) {
  const ConstantsProfile& prof = cfg.profile;
  if (!g.primes().empty()) throw PreconditionError("prop_small: accounted set must be empty");
  if (!g.non_trivial()) throw PreconditionError("prop_small: trivial graph");

  SubgraphChain out{g, {}};
  std::vector<BigInt> accounted;
  for (;;) {
    std::set<BigInt> rs = out.graph.r_set();
    BigInt p(-1);
    for (const BigInt& q : rs)
      if (q <= prof.small_prime_bound) {
        p = q;
        break;
      }
    if (p < 0) break;
    SubgraphChain it = small_prime_iteration(out.graph, p, cfg);
    for (auto& s : it.steps) out.steps.push_back(std::move(s));
    out.graph = std::move(it.graph);
    accounted.push_back(p);
  }

  StepCertificate cert;
  cert.lemma_id = "prop_small";
  cert.branch = accounted.empty() ? "NOOP" : "SMALL_PRIMES_ACCOUNTED";
  cert.input_digest = out.graph.digest();
  cert.output_digest = cert.input_digest;
  cert.params["baseline_digest"] = g.digest();
  cert.params["accounted_count"] = std::to_string(accounted.size());
  // q(out)/q(g) = vertex/edge part times the per-prime part; every accounted
  // prime is new because the input started with a trivial accounted set.
  std::vector<BigInt> new_primes;
  Rational base_exact = pow_int(out.graph.mu_edges() / g.mu_edges(), prof.density_exponent);
  base_exact *= pow_int(g.mu_left() / out.graph.mu_left(), prof.density_exponent - 1);
  base_exact *= pow_int(g.mu_right() / out.graph.mu_right(), prof.density_exponent - 1);
  for (const auto& [q, fg] : out.graph.primes()) {
    new_primes.push_back(q);
    unsigned diff = fg.first > fg.second ? fg.first - fg.second : fg.second - fg.first;
    if (diff > 0) base_exact *= Rational(powz(q, diff));
    if (fg.first == fg.second && fg.first >= 1) base_exact /= pow_int(Rational(q - 1, q), 2);
  }
  Rational dratio = out.graph.edge_density() / g.edge_density();
  Rational scaled = dratio < 1 ? base_exact * dratio : base_exact;
  certify_floor_row(cert, cfg, "stage-floor",
                    lazy_ratio(scaled, new_primes, prof), prof.stage_floor_exp10);
  out.steps.push_back(std::move(cert));
  return out;
}

// --- cosmetic trim -----------------------------------------------------------------

TrimOutcome cosmetic_trim(const GcdGraph& g, const Rational& t, const Config& cfg) {
  const ConstantsProfile& prof = cfg.profile;
  const unsigned e = prof.density_exponent;
  if (!g.non_trivial()) throw PreconditionError("cosmetic_trim: trivial graph");
  if (t < prof.cosmetic_min_t) throw PreconditionError("cosmetic_trim: t below the minimum");
  if (!g.r_flat(prof).empty())
    throw PreconditionError("cosmetic_trim: unconcentrated residual primes remain");
  if (g.edge_density() < pow_int(Rational(10) / t, prof.t_power))
    throw PreconditionError("cosmetic_trim: edge density below (10/t)^power");

  std::set<BigInt> residual = g.r_set();
  Rational t_pow = pow_int(t, prof.t_power);

  std::vector<size_t> keep;
  Rational worst_retained(-1);
  std::string worst_edge;
  for (size_t idx = 0; idx < g.edges().size(); ++idx) {
    auto [i, j] = g.edges()[idx];
    const FactoredInt& v = g.left()[i].n;
    const FactoredInt& w = g.right()[j].n;
    if (l_t(v, w, t) < prof.anatomy_threshold)
      throw PreconditionError("cosmetic_trim: an edge violates the anatomy floor");
    Rational excess(0), retained(0);
    for (const BigInt& p : asymmetric_primes(v, w)) {
      Rational pr(p);
      if (residual.count(p)) {
        if (pr >= t_pow) excess += Rational(1, p);
      } else if (pr >= t) {
        retained += Rational(1, p);
      }
    }
    if (excess <= prof.trim_excess_cap) {
      keep.push_back(idx);
      if (worst_retained < 0 || retained < worst_retained) {
        worst_retained = retained;
        worst_edge = g.left()[i].id + "," + g.right()[j].id;
      }
    }
  }

  GcdGraph trimmed = g.restrict_edges(keep);
  TrimOutcome out{std::move(trimmed), {}};
  out.cert.lemma_id = "cosmetic_trim";
  out.cert.branch = "TRIMMED";
  out.cert.input_digest = g.digest();
  out.cert.output_digest = out.graph.digest();
  out.cert.params["t"] = rational_to_string(t);
  out.cert.params["edges_dropped"] = std::to_string(g.edges().size() - keep.size());
  out.cert.params["min_retained_at"] = worst_edge;
  certify_or_throw(out.cert, cfg, "quality-ratio",
                   lazy_point(same_prime_quality_ratio(out.graph, g, e)), "GE",
                   lazy_point(Rational(1, 2)));
  certify_or_throw(out.cert, cfg, "retained-edge-anatomy", lazy_point(worst_retained), "GE",
                   lazy_point(prof.trim_retained_threshold));
  return out;
}

// --- the full pipeline ---------------------------------------------------------------

PipelineTrace good_subgraph_pipeline(const GcdGraph& g, const Rational& t, const Config& cfg) {
  const ConstantsProfile& prof = cfg.profile;
  const unsigned e = prof.density_exponent;
  if (!g.primes().empty())
    throw PreconditionError("pipeline: the accounted prime set must start empty");
  if (!g.non_trivial()) throw PreconditionError("pipeline: edge density must be positive");
  if (t <= Rational(prof.small_prime_bound))
    throw PreconditionError("pipeline: t must exceed the small-prime bound");
  // Guard for the differing-prime count: t must dominate 100*log(t), which
  // holds from 648 on.
  if (t < 648) throw PreconditionError("pipeline: t too small for the bookkeeping bound");
  Rational delta = g.edge_density();
  if (pow_int(t / 10, prof.t_power) * delta < 1)
    throw PreconditionError("pipeline: t^power must dominate 1/delta");
  for (const auto& [i, j] : g.edges())
    if (l_t(g.left()[i].n, g.right()[j].n, t) < prof.anatomy_threshold)
      throw PreconditionError("pipeline: an edge violates the anatomy floor");

  PipelineTrace trace;
  trace.profile_name = prof.name;
  trace.precision_bits = cfg.precision_bits;
  trace.t = t;
  trace.input_digest = g.digest();

  auto append = [&trace](std::vector<StepCertificate>&& steps, const std::string& stage) {
    for (auto& s : steps) {
      s.stage = stage;
      trace.steps.push_back(std::move(s));
    }
  };

  // Stage 1: account every small residual prime with bounded loss.
  SubgraphChain s1 = prop_small(g, cfg);
  append(std::move(s1.steps), "stage-1");
  GcdGraph cur = std::move(s1.graph);

  // Stage 2: unconcentrated large primes give strict quality gains.
  long n_diff = 0;
  while (!cur.r_flat(prof).empty()) {
    SubgraphChain step = prop_flat(cur, cfg);
    for (const auto& s : step.steps)
      if (s.lemma_id == "prop_flat") n_diff += std::stol(s.params.at("new_diff_primes"));
    append(std::move(step.steps), "stage-2");
    cur = std::move(step.graph);
  }
  GcdGraph g2 = cur;

  // Route on the accumulated quality ratio against (t/10)^power * delta
  // over the stage floor.
  auto ratio_vs_input = [&](const GcdGraph& h, unsigned bits) {
    QualityValue qh = h.quality(prof, bits);
    QualityValue qg = g.quality(prof, bits);
    return qh.product * qg.product.reciprocal();
  };
  bool case_i;
  {
    Rational scale = pow_int(Rational(10) / t, prof.t_power) / delta;
    unsigned bits = cfg.precision_bits;
    for (;;) {
      RationalInterval ratio = ratio_vs_input(g2, bits) * scale;
      if (at_least_pow10_floor(ratio.lo, prof.stage_floor_exp10)) {
        case_i = true;
        break;
      }
      if (!at_least_pow10_floor(ratio.hi, prof.stage_floor_exp10)) {
        case_i = false;
        break;
      }
      if (bits >= cfg.precision_ceiling)
        throw IndeterminateError("pipeline: case split unresolved at precision ceiling");
      bits = std::min(bits * 2, cfg.precision_ceiling);
    }
  }

  if (case_i) {
    // Stage 3a: clear the remaining residual primes outright.
    while (!cur.r_set().empty()) {
      SubgraphChain step = cur.r_flat(prof).empty() ? prop_sharp(cur, cfg)
                                                    : prop_flat(cur, cfg);
      append(std::move(step.steps), "stage-3a");
      cur = std::move(step.graph);
    }
  } else {
    if (Rational(n_diff) > t)
      throw InconsistencyError("pipeline: differing-prime count exceeded t");
    TrimOutcome trim = cosmetic_trim(cur, t, cfg);
    trim.cert.stage = "stage-3b";
    trace.steps.push_back(std::move(trim.cert));
    cur = std::move(trim.graph);
    // Stage 4b: clear the remaining residual primes.
    while (!cur.r_set().empty()) {
      SubgraphChain step = cur.r_flat(prof).empty() ? prop_sharp(cur, cfg)
                                                    : prop_flat(cur, cfg);
      append(std::move(step.steps), "stage-4b");
      cur = std::move(step.graph);
    }
  }

  // High-degree cleanup preserves an empty residual set and the quality.
  LoopOutcome hd = high_degree_subgraph(cur, cfg);
  append(std::move(hd.steps), "high-degree");
  cur = std::move(hd.graph);

  if (!cur.r_set().empty())
    throw InconsistencyError("pipeline: residual primes survived the iteration");

  StepCertificate tag;
  tag.lemma_id = "good_subgraph_pipeline";
  tag.stage = "final";
  tag.input_digest = cur.digest();
  tag.output_digest = tag.input_digest;
  tag.params["baseline_digest"] = g.digest();
  tag.params["n_diff"] = std::to_string(n_diff);

  unsigned bits = cfg.precision_bits;
  RationalInterval overall = ratio_vs_input(cur, bits);
  if (case_i) {
    trace.case_tag = "case-i";
    tag.branch = "case-i";
    Rational scale = pow_int(t / 10, prof.t_power) * delta;
    Rational achieved_c = overall.lo / scale;
    tag.params["achieved_constant"] = rational_to_string(achieved_c);
    certify_or_throw(tag, cfg, "case-i-quality-ratio",
                     [&](unsigned b) { return ratio_vs_input(cur, b); }, "GE",
                     lazy_point(achieved_c * scale));
  } else {
    trace.case_tag = "case-ii";
    tag.branch = "case-ii";
    tag.params["achieved_constant"] = rational_to_string(overall.lo);
    certify_or_throw(tag, cfg, "case-ii-quality-ratio",
                     [&](unsigned b) { return ratio_vs_input(cur, b); }, "GE",
                     lazy_point(overall.lo));
    // Each surviving edge keeps anatomy mass after the fixed parts divide out.
    FactoredInt left_fixed, right_fixed;
    for (const auto& [p, fg] : cur.primes()) {
      if (fg.first > 0) left_fixed = mul(left_fixed, FactoredInt::prime_power(p, fg.first));
      if (fg.second > 0) right_fixed = mul(right_fixed, FactoredInt::prime_power(p, fg.second));
    }
    Rational worst(-1);
    std::string worst_edge = "none";
    for (const auto& [i, j] : cur.edges()) {
      FactoredInt vp = cur.left()[i].n.divide_exact(left_fixed);
      FactoredInt wp = cur.right()[j].n.divide_exact(right_fixed);
      Rational s = l_t(vp, wp, t);
      if (worst < 0 || s < worst) {
        worst = s;
        worst_edge = cur.left()[i].id + "," + cur.right()[j].id;
      }
    }
    tag.params["min_reduced_anatomy_at"] = worst_edge;
    certify_or_throw(tag, cfg, "reduced-edge-anatomy", lazy_point(worst), "GE",
                     lazy_point(prof.final_edge_threshold));
  }
  trace.steps.push_back(std::move(tag));
  trace.final_graph = std::move(cur);
  return trace;
}

}  // namespace gcdq::engine
