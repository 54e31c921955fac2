#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gcdq/engine.hpp"
#include "gcdq/harness.hpp"
#include "support.hpp"

#include <nlohmann/json.hpp>

using namespace gcdq;
using namespace gcdq::testing;
using namespace gcdq::engine;

namespace {

Config scaled_cfg() {
  Config cfg;
  cfg.profile = ConstantsProfile::scaled();
  return cfg;
}

Config paper_cfg() {
  Config cfg;
  cfg.profile = ConstantsProfile::paper();
  return cfg;
}

const BigInt kPrime41 = pow10z(40) + 121;
const BigInt kPrime2001 = pow10z(2000) + 4561;

bool chain_is_certified(const std::vector<StepCertificate>& steps) {
  for (const auto& s : steps)
    if (!s.all_certified()) return false;
  return true;
}

}  // namespace

TEST_CASE("high_degree_step accepts complete graphs outright") {
  GcdGraph g = make_graph({{{{2, 1}}, Rational(1)}, {{{3, 1}}, Rational(1)}},
                          {{{{5, 1}}, Rational(1)}, {{{7, 1}}, Rational(1)}},
                          {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  HighDegreeOutcome out = high_degree_step(g, scaled_cfg());
  CHECK(out.all_high_degree);
  CHECK(out.cert.branch == "ALL_HIGH_DEGREE");
  CHECK(out.cert.all_certified());
}

TEST_CASE("high_degree_step removes an isolated-ish vertex and improves both stats") {
  GcdGraph g = make_graph({{{{2, 1}}, Rational(1)}, {{{3, 1}}, Rational(1)}},
                          {{{{5, 1}}, Rational(1)}}, {{0, 0}});
  CHECK(g.edge_density() == Rational(1, 2));
  HighDegreeOutcome out = high_degree_step(g, scaled_cfg());
  REQUIRE(!out.all_high_degree);
  CHECK(out.graph->edge_density() == 1);
  CHECK(out.cert.all_certified());
  LoopOutcome fix = high_degree_subgraph(g, scaled_cfg());
  CHECK(fix.graph.edge_density() == 1);
  CHECK(fix.graph.left().size() == 1);
  CHECK(fix.graph.is_subgraph_of(g));
}

TEST_CASE("high_degree_subgraph conclusions on random graphs") {
  Rng rng(31);
  Config cfg = scaled_cfg();
  int done = 0;
  while (done < 40) {
    GcdGraph g = random_valid_graph(rng, false);
    if (!g.non_trivial()) continue;
    LoopOutcome out = high_degree_subgraph(g, cfg);
    CHECK(chain_is_certified(out.steps));
    CHECK(out.graph.is_subgraph_of(g));
    CHECK(out.graph.edge_density() >= g.edge_density());
    Rational bound = cfg.profile.degree_fraction * out.graph.edge_density();
    for (size_t i = 0; i < out.graph.left().size(); ++i)
      CHECK(out.graph.neighborhood_mass(Side::Left, i) >= bound * out.graph.mu_right());
    for (size_t j = 0; j < out.graph.right().size(); ++j)
      CHECK(out.graph.neighborhood_mass(Side::Right, j) >= bound * out.graph.mu_left());
    ++done;
  }
}

TEST_CASE("pigeonhole with trivial partitions returns the graph itself") {
  Rng rng(32);
  GcdGraph g = random_valid_graph(rng, false);
  while (!g.non_trivial()) g = random_valid_graph(rng, false);
  std::vector<size_t> all_l(g.left().size()), all_r(g.right().size());
  for (size_t i = 0; i < all_l.size(); ++i) all_l[i] = i;
  for (size_t j = 0; j < all_r.size(); ++j) all_r[j] = j;
  PigeonholeOutcome out = pigeonhole(g, {all_l}, {all_r}, scaled_cfg());
  CHECK(out.graph.is_subgraph_of(g));
  CHECK(g.is_subgraph_of(out.graph));
  CHECK(out.cert.all_certified());
}

TEST_CASE("pigeonhole picks the cell holding all edges") {
  GcdGraph g = make_graph({{{{2, 1}}, Rational(1)}, {{{3, 1}}, Rational(1)}},
                          {{{{5, 1}}, Rational(1)}, {{{7, 1}}, Rational(1)}},
                          {{0, 0}});
  PigeonholeOutcome out = pigeonhole(g, {{0}, {1}}, {{0}, {1}}, scaled_cfg());
  CHECK(out.cell_left == 0);
  CHECK(out.cell_right == 0);
  CHECK(out.graph.mu_edges() == g.mu_edges());
  CHECK(out.graph.quality(ConstantsProfile::scaled(), 64).exact_part >=
        g.quality(ConstantsProfile::scaled(), 64).exact_part);
}

TEST_CASE("pigeonhole certified bounds on random partitions") {
  Rng rng(33);
  Config cfg = scaled_cfg();
  int done = 0;
  while (done < 40) {
    GcdGraph g = random_valid_graph(rng, false);
    if (!g.non_trivial()) continue;
    auto part = [&](size_t n) {
      std::vector<std::vector<size_t>> cells(1 + rand_in(rng, 0, 1));
      for (size_t i = 0; i < n; ++i) cells[rand_in(rng, 0, cells.size() - 1)].push_back(i);
      std::vector<std::vector<size_t>> out;
      for (auto& c : cells)
        if (!c.empty()) out.push_back(std::move(c));
      return out;
    };
    auto lc = part(g.left().size()), rc = part(g.right().size());
    PigeonholeOutcome out = pigeonhole(g, lc, rc, cfg);
    CHECK(out.cert.all_certified());
    CHECK(out.graph.is_subgraph_of(g));
    ++done;
  }
}

TEST_CASE("unbalanced_check: all vertices inside the window means a small tail") {
  BigInt p = 1009;
  GcdGraph g = make_graph({{{{1009, 1}, {17, 1}}, Rational(1)}},
                          {{{{1009, 1}, {19, 1}}, Rational(1)}}, {{0, 0}});
  UnbalancedOutcome out = unbalanced_check(g, p, 1, 1, Side::Right, scaled_cfg());
  CHECK(out.branch == UnbalancedBranch::SmallTail);
  CHECK(out.cert.all_certified());
  REQUIRE(out.cert.inequalities.size() >= 2);
  CHECK(out.cert.inequalities[1].lhs.hi == 0);  // the tail itself
}

TEST_CASE("unbalanced_check: a heavy far class forces the quality jump") {
  BigInt p = 1009;
  Rational eps = make_ratio(1, p);
  GcdGraph g = make_graph(
      {{{{1009, 1}, {17, 1}}, Rational(1)}},
      {{{{1009, 1}, {19, 1}}, Rational(1)}, {{{1009, 3}, {23, 1}}, eps}},
      {{0, 0}, {0, 1}});
  UnbalancedOutcome out = unbalanced_check(g, p, 1, 1, Side::Right, scaled_cfg());
  CHECK(out.branch == UnbalancedBranch::Increment);
  CHECK(out.far_class == 3);
  CHECK(out.cert.all_certified());
  CHECK(out.graph->is_subgraph_of(g));
  CHECK(out.graph->primes().count(p));
}

TEST_CASE("unbalanced_check at the paper profile") {
  Config cfg = paper_cfg();
  const BigInt& p = kPrime2001;
  Rational eps = make_ratio(1, pow10z(1970));
  // Vertices carrying the 2001-digit prime are assembled directly.
  std::map<VertexId, Rational> mu{{"v0", Rational(1)}, {"w0", Rational(1)}, {"w1", eps}};
  std::vector<std::pair<VertexId, FactoredInt>> l, r;
  l.emplace_back("v0", mul(FactoredInt::prime_power(p, 1), FactoredInt::prime_power(17, 1)));
  r.emplace_back("w0", mul(FactoredInt::prime_power(p, 1), FactoredInt::prime_power(19, 1)));
  r.emplace_back("w1", mul(FactoredInt::prime_power(p, 3), FactoredInt::prime_power(23, 1)));
  GcdGraph g(Measure(std::move(mu)), std::move(l), std::move(r), {{"v0", "w0"}, {"v0", "w1"}},
             {});
  UnbalancedOutcome out = unbalanced_check(g, p, 1, 1, Side::Right, cfg);
  CHECK(out.branch == UnbalancedBranch::Increment);
  CHECK(out.cert.all_certified());
}

TEST_CASE("small_set_step: a single edge leaves nothing below the cap") {
  GcdGraph g = make_graph({{{{2, 1}}, Rational(1)}}, {{{{3, 1}}, Rational(1)}}, {{0, 0}});
  SmallSetOutcome out = small_set_step(g, Rational(1, 2), scaled_cfg());
  CHECK(out.branch == SmallSetBranch::NoDensePair);
  CHECK(out.cert.all_certified());
}

TEST_CASE("small_set_step: dense small block is restricted to") {
  // One light vertex pair holds every edge.
  GcdGraph g = make_graph(
      {{{{2, 1}}, Rational(1)}, {{{3, 1}}, Rational(3)}},
      {{{{5, 1}}, Rational(1)}, {{{7, 1}}, Rational(3)}}, {{0, 0}});
  SmallSetOutcome out = small_set_step(g, Rational(1, 4), scaled_cfg());
  CHECK(out.branch == SmallSetBranch::Restricted);
  CHECK(out.graph->left().size() == 1);
  CHECK(out.graph->right().size() == 1);
  CHECK(out.cert.all_certified());
  CHECK_THROWS_AS(small_set_step(g, Rational(1), scaled_cfg()), PreconditionError);
  LoopOutcome loop = no_small_set_edges(g, Rational(1, 4), scaled_cfg());
  CHECK(loop.graph.is_subgraph_of(g));
  CHECK(chain_is_certified(loop.steps));
}

TEST_CASE("edge_sets_pick: one edge with both valuations 1") {
  GcdGraph g = make_graph({{{{17, 1}, {101, 1}}, Rational(1)}},
                          {{{{19, 1}, {101, 1}}, Rational(1)}}, {{0, 0}});
  EdgeSetsPick pick = edge_sets_pick(g, 101, scaled_cfg());
  CHECK(pick.k == 1);
  CHECK(pick.l == 1);
  CHECK(pick.bound_tag == "diagonal");
  CHECK(pick.cert.all_certified());
}

TEST_CASE("edge_sets_pick: split left side, uniform edges") {
  GcdGraph g = make_graph(
      {{{{17, 1}}, Rational(1)}, {{{19, 1}, {101, 1}}, Rational(1)}},
      {{{{23, 1}, {101, 1}}, Rational(1)}}, {{0, 0}, {1, 0}});
  EdgeSetsPick pick = edge_sets_pick(g, 101, scaled_cfg());
  CHECK(pick.cert.all_certified());
}

TEST_CASE("edge_sets_pick always finds a qualifying pair on random graphs") {
  Rng rng(34);
  Config cfg = scaled_cfg();
  int done = 0;
  while (done < 60) {
    GcdGraph g = random_graph_with_residual_prime(rng, 101, 2);
    if (!g.non_trivial() || !g.r_set().count(101)) continue;
    EdgeSetsPick pick = edge_sets_pick(g, 101, cfg);
    CHECK(pick.cert.all_certified());
    ++done;
  }
}

TEST_CASE("main_step: shared valuation everywhere concentrates") {
  GcdGraph g = make_graph({{{{101, 2}, {17, 1}}, Rational(1)}},
                          {{{{101, 2}, {19, 1}}, Rational(1)}}, {{0, 0}});
  MainStepOutcome out = main_step(g, 101, scaled_cfg());
  CHECK(out.branch == MainBranch::Concentrated);
  CHECK(out.concentrated_k == 2);
  CHECK(out.cert.all_certified());
}

TEST_CASE("main_step: 41-digit prime with balanced 0/1 classes gives a doubling") {
  // For p just above the sharp threshold the concentration floor 1 - T/p is
  // around 1.2e-38, so the opposite class on each side has to fall below
  // that for the increment branch to be forced.
  Config cfg = paper_cfg();
  Rational tiny = make_ratio(1, pow10z(39));
  std::map<VertexId, Rational> mu{{"v0", Rational(1)},
                                  {"v1", tiny},
                                  {"w0", tiny},
                                  {"w1", Rational(1)}};
  std::vector<std::pair<VertexId, FactoredInt>> l, r;
  l.emplace_back("v0", FactoredInt::prime_power(17, 1));
  l.emplace_back("v1",
                 mul(FactoredInt::prime_power(kPrime41, 1), FactoredInt::prime_power(23, 1)));
  r.emplace_back("w0", FactoredInt::prime_power(19, 1));
  r.emplace_back("w1",
                 mul(FactoredInt::prime_power(kPrime41, 1), FactoredInt::prime_power(29, 1)));
  GcdGraph g(Measure(std::move(mu)), std::move(l), std::move(r),
             {{"v0", "w0"}, {"v0", "w1"}, {"v1", "w0"}, {"v1", "w1"}}, {});
  MainStepOutcome out = main_step(g, kPrime41, cfg);
  REQUIRE(out.branch == MainBranch::Increment);
  CHECK(out.n_flag == 1);
  CHECK(out.cert.all_certified());
  for (const auto& iq : out.cert.inequalities)
    if (iq.name == "quality-ratio") CHECK(iq.rhs.lo == 2);
  CHECK(out.graph->primes().count(kPrime41));
  CHECK(!out.graph->r_set().count(kPrime41));
}

TEST_CASE("main_step_sharp: fully pinned exponent keeps the quality") {
  Config cfg = paper_cfg();
  const BigInt& p = kPrime2001;
  for (unsigned k : {1u, 2u}) {
    std::map<VertexId, Rational> mu{{"v0", Rational(1)}, {"w0", Rational(1)}};
    std::vector<std::pair<VertexId, FactoredInt>> l, r;
    l.emplace_back("v0", mul(FactoredInt::prime_power(p, k), FactoredInt::prime_power(17, 1)));
    r.emplace_back("w0", mul(FactoredInt::prime_power(p, k), FactoredInt::prime_power(19, 1)));
    GcdGraph g(Measure(std::move(mu)), std::move(l), std::move(r), {{"v0", "w0"}}, {});
    SubgraphChain out = main_step_sharp(g, p, cfg);
    CHECK(chain_is_certified(out.steps));
    CHECK(out.graph.primes().count(p));
    CHECK(out.graph.r_set().empty());
    CHECK(out.steps.back().branch == "PLUS");
  }
}

TEST_CASE("main_step_sharp: light shifted class selects a down branch") {
  Config cfg = paper_cfg();
  const BigInt& p = kPrime2001;
  Rational eps = make_ratio(1, pow10z(1970));
  std::map<VertexId, Rational> mu{{"v0", Rational(1)}, {"w0", Rational(1)}, {"w1", eps}};
  std::vector<std::pair<VertexId, FactoredInt>> l, r;
  l.emplace_back("v0", mul(FactoredInt::prime_power(p, 1), FactoredInt::prime_power(17, 1)));
  r.emplace_back("w0", mul(FactoredInt::prime_power(p, 1), FactoredInt::prime_power(19, 1)));
  r.emplace_back("w1", FactoredInt::prime_power(23, 1));
  GcdGraph g(Measure(std::move(mu)), std::move(l), std::move(r), {{"v0", "w0"}, {"v0", "w1"}},
             {});
  SubgraphChain out = main_step_sharp(g, p, cfg);
  CHECK(chain_is_certified(out.steps));
  CHECK(out.steps.back().branch == "DOWN_RIGHT");
  CHECK(out.graph.primes().at(p) == std::pair<unsigned, unsigned>{1, 0});
}

TEST_CASE("small_prime_step: shared single valuation concentrates") {
  GcdGraph g = make_graph({{{{2, 1}, {17, 1}}, Rational(1)}},
                          {{{{2, 1}, {19, 1}}, Rational(1)}}, {{0, 0}});
  MainStepOutcome out = small_prime_step(g, 2, scaled_cfg());
  CHECK(out.branch == MainBranch::Concentrated);
  CHECK(out.concentrated_k == 1);
}

TEST_CASE("small_prime_step dichotomy on random instances") {
  Rng rng(35);
  Config cfg = scaled_cfg();
  int done = 0;
  while (done < 60) {
    GcdGraph g = random_graph_with_residual_prime(rng, 2, 3);
    if (!g.non_trivial() || !g.r_set().count(2)) continue;
    MainStepOutcome out = small_prime_step(g, 2, cfg);
    CHECK(out.cert.all_certified());
    if (out.branch == MainBranch::Increment) {
      CHECK(out.graph->is_subgraph_of(g));
      CHECK(!out.graph->r_set().count(2));
    }
    ++done;
  }
}

TEST_CASE("small_prime_iteration: concentrated prime lands in the window path") {
  GcdGraph g = make_graph(
      {{{{2, 1}, {17, 1}}, Rational(1)}, {{{2, 1}, {19, 1}}, Rational(1)}},
      {{{{2, 1}, {23, 1}}, Rational(1)}, {{{2, 1}, {29, 1}}, Rational(1)}},
      {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  SubgraphChain out = small_prime_iteration(g, 2, scaled_cfg());
  CHECK(chain_is_certified(out.steps));
  CHECK(out.graph.primes().count(2));
  CHECK(out.graph.primes().at(2) == std::pair<unsigned, unsigned>{1, 1});
  CHECK(!out.graph.r_set().count(2));
  CHECK(out.graph.is_subgraph_of(g));
  bool saw_window = false;
  for (const auto& s : out.steps)
    if (s.branch == "WINDOW" || s.branch == "WINDOW_PIGEONHOLE") saw_window = true;
  CHECK(saw_window);
}

TEST_CASE("small_prime_iteration on mixed valuations") {
  Rng rng(36);
  Config cfg = scaled_cfg();
  int done = 0;
  while (done < 30) {
    GcdGraph g = random_graph_with_residual_prime(rng, 2, 2);
    if (!g.non_trivial() || !g.r_set().count(2)) continue;
    SubgraphChain out = small_prime_iteration(g, 2, cfg);
    CHECK(chain_is_certified(out.steps));
    CHECK(out.graph.primes().count(2));
    CHECK(!out.graph.r_set().count(2));
    CHECK(out.graph.is_subgraph_of(g));
    ++done;
  }
}

TEST_CASE("window exponent and partition size at the paper profile") {
  BigInt bound = ConstantsProfile::paper().small_prime_bound;
  unsigned r = 1;
  BigInt q = 2;
  while (q <= bound) {
    q *= 2;
    ++r;
  }
  CHECK(r == 6644);
  CHECK(2 * r + 1 <= 15000);
}

TEST_CASE("prop_small is a no-op when only large primes remain") {
  GcdGraph g = make_graph({{{{1009, 1}, {17, 1}}, Rational(1)}},
                          {{{{1009, 1}, {19, 1}}, Rational(1)}}, {{0, 0}});
  SubgraphChain out = prop_small(g, scaled_cfg());
  CHECK(out.graph.is_subgraph_of(g));
  CHECK(g.is_subgraph_of(out.graph));
  CHECK(out.steps.size() == 1);
  CHECK(out.steps.back().branch == "NOOP");
  CHECK(chain_is_certified(out.steps));
}

TEST_CASE("prop_small clears the small primes with a certified floor") {
  GcdGraph g = make_graph(
      {{{{2, 2}, {3, 1}, {17, 1}}, Rational(1)}, {{{2, 2}, {3, 1}, {19, 1}}, Rational(1)}},
      {{{{2, 2}, {3, 1}, {23, 1}}, Rational(1)}, {{{2, 2}, {3, 1}, {29, 1}}, Rational(1)}},
      {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  SubgraphChain out = prop_small(g, scaled_cfg());
  CHECK(chain_is_certified(out.steps));
  for (const auto& [p, fg] : out.graph.primes())
    CHECK(p <= ConstantsProfile::scaled().small_prime_bound);
  for (const auto& p : out.graph.r_set())
    CHECK(p > ConstantsProfile::scaled().small_prime_bound);
}

TEST_CASE("prop_flat strictly shrinks the residual set with a doubling per new prime") {
  GcdGraph g = [] {
    // Two groups sharing different large primes, spread so neither
    // concentrates: both 1009-classes hold half the mass.
    std::map<VertexId, Rational> mu;
    std::vector<std::pair<VertexId, FactoredInt>> l, r;
    std::vector<std::pair<VertexId, VertexId>> e;
    auto add = [&](const std::string& id, long shared, long tag,
                   std::vector<std::pair<VertexId, FactoredInt>>& side) {
      mu[id] = Rational(1);
      side.emplace_back(id, mul(FactoredInt::prime_power(shared, 1),
                                FactoredInt::prime_power(tag, 1)));
    };
    add("v0", 1009, 17, l);
    add("v1", 1013, 19, l);
    add("w0", 1009, 23, r);
    add("w1", 1013, 29, r);
    e = {{"v0", "w0"}, {"v1", "w1"}, {"v0", "w1"}, {"v1", "w0"}};
    return GcdGraph(Measure(std::move(mu)), std::move(l), std::move(r), std::move(e), {});
  }();
  Config cfg = scaled_cfg();
  CHECK(g.r_flat(cfg.profile).size() == 2);
  SubgraphChain out = prop_flat(g, cfg);
  CHECK(chain_is_certified(out.steps));
  CHECK(out.graph.r_set().size() < g.r_set().size());
  CHECK(out.graph.is_subgraph_of(g));
}

TEST_CASE("prop_sharp accounts a concentrated large prime without loss") {
  // 95% of both sides shares 1009 exactly once.
  std::map<VertexId, Rational> mu{{"v0", Rational(19)}, {"v1", Rational(1)},
                                  {"w0", Rational(19)}, {"w1", Rational(1)}};
  std::vector<std::pair<VertexId, FactoredInt>> l, r;
  l.emplace_back("v0", mul(FactoredInt::prime_power(1009, 1), FactoredInt::prime_power(17, 1)));
  l.emplace_back("v1", FactoredInt::prime_power(19, 1));
  r.emplace_back("w0", mul(FactoredInt::prime_power(1009, 1), FactoredInt::prime_power(23, 1)));
  r.emplace_back("w1", FactoredInt::prime_power(29, 1));
  GcdGraph g(Measure(std::move(mu)), std::move(l), std::move(r),
             {{"v0", "w0"}, {"v0", "w1"}, {"v1", "w0"}, {"v1", "w1"}}, {});
  Config cfg = scaled_cfg();
  REQUIRE(g.r_flat(cfg.profile).empty());
  REQUIRE(!g.r_sharp(cfg.profile).empty());
  SubgraphChain out = prop_sharp(g, cfg);
  CHECK(chain_is_certified(out.steps));
  CHECK(out.graph.primes().count(1009));
  CHECK(!out.graph.r_set().count(1009));
}

TEST_CASE("cosmetic_trim: empty residual set never drops an edge") {
  // Tag primes above t on each side keep the anatomy mass without entering
  // any gcd.
  std::map<VertexId, Rational> mu{{"v0", Rational(1)}, {"w0", Rational(1)}};
  std::vector<std::pair<VertexId, FactoredInt>> l, r;
  l.emplace_back("v0", mul(FactoredInt::prime_power(1051, 1), FactoredInt::prime_power(17, 1)));
  r.emplace_back("w0", mul(FactoredInt::prime_power(1061, 1), FactoredInt::prime_power(17, 1)));
  GcdGraph g(Measure(std::move(mu)), std::move(l), std::move(r), {{"v0", "w0"}}, {});
  TrimOutcome out = cosmetic_trim(g, Rational(1009), scaled_cfg());
  CHECK(out.graph.edges().size() == 1);
  CHECK(out.cert.all_certified());
}

TEST_CASE("cosmetic_trim drops an edge loaded with residual primes") {
  // Lower the trim exponent so a dozen residual primes can exceed the cap.
  Config cfg = scaled_cfg();
  cfg.profile.t_power = 1;
  cfg.profile.trim_excess_cap = Rational(1, 100);
  std::vector<long> shared;
  {
    BigInt q = 1050;
    while (shared.size() < 12) {
      q = next_prime_at_least(q + 1);
      shared.push_back(q.get_si());
    }
  }
  FactoredInt bundle = FactoredInt::one();
  for (long q : shared) bundle = mul(bundle, FactoredInt::prime_power(q, 1));
  std::map<VertexId, Rational> mu{{"v0", Rational(99)}, {"v1", Rational(1)},
                                  {"w0", Rational(99)}, {"w1", Rational(1)}};
  std::vector<std::pair<VertexId, FactoredInt>> l, r;
  // Edge (v0, w0) carries the bundle symmetrically; edge (v1, w1) has it on
  // one side only, so every bundle prime counts toward its excess.
  l.emplace_back("v0", mul(bundle, FactoredInt::prime_power(1951, 1)));
  r.emplace_back("w0", mul(bundle, FactoredInt::prime_power(1973, 1)));
  l.emplace_back("v1", mul(bundle, FactoredInt::prime_power(1979, 1)));
  r.emplace_back("w1", FactoredInt::prime_power(1987, 1));
  GcdGraph g(Measure(std::move(mu)), std::move(l), std::move(r),
             {{"v0", "w0"}, {"v1", "w1"}}, {});
  REQUIRE(g.r_flat(cfg.profile).empty());
  TrimOutcome out = cosmetic_trim(g, Rational(1009), cfg);
  CHECK(out.graph.edges().size() == 1);
  CHECK(out.cert.params.at("edges_dropped") == "1");
  CHECK(out.cert.all_certified());
}

TEST_CASE("pipeline end to end on a structured instance") {
  Rng rng(37);
  Config cfg = scaled_cfg();
  PipelineInstance inst = pipeline_instance(rng, 14, 4, 1);
  REQUIRE(inst.graph.non_trivial());
  PipelineTrace trace = good_subgraph_pipeline(inst.graph, Rational(1009), cfg);
  CHECK(trace.final_graph.r_set().empty());
  CHECK((trace.case_tag == "case-i" || trace.case_tag == "case-ii"));
  for (const auto& s : trace.steps) CHECK(s.all_certified());
  // Degree bounds on the final graph.
  const GcdGraph& fg = trace.final_graph;
  Rational bound = cfg.profile.degree_fraction * fg.edge_density();
  for (size_t i = 0; i < fg.left().size(); ++i)
    CHECK(fg.neighborhood_mass(Side::Left, i) >= bound * fg.mu_right());
  // Replay round trip.
  nlohmann::json j = trace.to_json();
  TraceVerifyResult ok = verify_trace_json(j);
  CHECK(ok.ok);
  // Any single-field mutation must be rejected.
  nlohmann::json tampered = j;
  tampered["steps"][0]["inequalities"][0]["rhs"]["lo"] = "0/1";
  CHECK(!verify_trace_json(tampered).ok);
}

TEST_CASE("pipeline rejects an edgeless input") {
  GcdGraph g = make_graph({{{{1051, 1}}, Rational(1)}}, {{{{1061, 1}}, Rational(1)}}, {});
  CHECK_THROWS_AS(good_subgraph_pipeline(g, Rational(1009), scaled_cfg()), PreconditionError);
}

TEST_CASE("pipeline reaches the large-gain tag under a softer exponent") {
  Rng rng(38);
  Config cfg = scaled_cfg();
  cfg.profile.t_power = 3;
  PipelineInstance inst = pipeline_instance(rng, 10, 3, 0);
  PipelineTrace trace = good_subgraph_pipeline(inst.graph, Rational(1009), cfg);
  CHECK(trace.case_tag == "case-i");
  for (const auto& s : trace.steps) CHECK(s.all_certified());
}

TEST_CASE("pipeline is deterministic") {
  Rng rng1(39), rng2(39);
  Config cfg = scaled_cfg();
  PipelineInstance a = pipeline_instance(rng1, 12, 3, 1);
  PipelineInstance b = pipeline_instance(rng2, 12, 3, 1);
  PipelineTrace ta = good_subgraph_pipeline(a.graph, Rational(1009), cfg);
  PipelineTrace tb = good_subgraph_pipeline(b.graph, Rational(1009), cfg);
  CHECK(ta.to_json().dump() == tb.to_json().dump());
}
