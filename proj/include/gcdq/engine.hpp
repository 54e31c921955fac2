#ifndef GCDQ_ENGINE_HPP
#define GCDQ_ENGINE_HPP

#include "gcdq/certificate.hpp"
#include "gcdq/graph.hpp"
#include "gcdq/profile.hpp"

#include <functional>
#include <optional>

namespace gcdq::engine {

struct Config {
  ConstantsProfile profile = ConstantsProfile::scaled();
  unsigned precision_bits = 128;
  unsigned precision_ceiling = 4096;
};

enum class CheckResult { Certified, Refuted, Indeterminate };

using LazyInterval = std::function<RationalInterval(unsigned bits)>;

LazyInterval lazy_point(const Rational& x);
// exact * product of (1 - p^{-a/b})^{-e} over the listed primes.
LazyInterval lazy_ratio(const Rational& exact, std::vector<BigInt> qfe_primes,
                        const ConstantsProfile& profile);

// Evaluates an inequality at doubling precision until it resolves, and
// appends the row (with the enclosures that settled it) to the certificate.
CheckResult certify(StepCertificate& cert, const Config& cfg, const std::string& name,
                    const LazyInterval& lhs, const std::string& rel, const LazyInterval& rhs);

// Exact q(sub)/q(sup) for a subgraph with the same accounted primes.
Rational same_prime_quality_ratio(const GcdGraph& sub, const GcdGraph& sup, unsigned e);

// Exact part of q(cand)/q(base) when cand additionally accounts p; the
// transcendental factor gained is (1 - p^{-a/b})^{-e}.
Rational added_prime_quality_ratio_exact(const GcdGraph& cand, const GcdGraph& base,
                                         const BigInt& p, const ConstantsProfile& profile);

// --- Lemma dichotomies -----------------------------------------------------

struct HighDegreeOutcome {
  bool all_high_degree = false;
  std::optional<GcdGraph> graph;  // set on the removal branch
  StepCertificate cert;
};
HighDegreeOutcome high_degree_step(const GcdGraph& g, const Config& cfg);

struct LoopOutcome {
  GcdGraph graph;
  std::vector<StepCertificate> steps;
};
LoopOutcome high_degree_subgraph(const GcdGraph& g, const Config& cfg);

struct PigeonholeOutcome {
  GcdGraph graph;
  size_t cell_left = 0, cell_right = 0;
  StepCertificate cert;
};
PigeonholeOutcome pigeonhole(const GcdGraph& g, const std::vector<std::vector<size_t>>& left_cells,
                             const std::vector<std::vector<size_t>>& right_cells,
                             const Config& cfg);

enum class UnbalancedBranch { Increment, SmallTail };
struct UnbalancedOutcome {
  UnbalancedBranch branch;
  std::optional<GcdGraph> graph;  // on Increment
  unsigned far_class = 0;
  StepCertificate cert;
};
// Concentration (mass fraction >= 1 - T/p at valuation k) is hypothesized on
// concentrated_side; that side is scanned over classes |l - k| >= r + 1 while
// the other side is fixed at class k.
UnbalancedOutcome unbalanced_check(const GcdGraph& g, const BigInt& p, unsigned k, unsigned r,
                                   Side concentrated_side, const Config& cfg);

enum class SmallSetBranch { NoDensePair, Restricted };
struct SmallSetOutcome {
  SmallSetBranch branch;
  std::optional<GcdGraph> graph;
  StepCertificate cert;
};
SmallSetOutcome small_set_step(const GcdGraph& g, const Rational& eta, const Config& cfg);
LoopOutcome no_small_set_edges(const GcdGraph& g, const Rational& eta, const Config& cfg);

struct EdgeSetsPick {
  unsigned k = 0, l = 0;
  std::string bound_tag;  // "diagonal" | "off-diagonal"
  StepCertificate cert;
};
EdgeSetsPick edge_sets_pick(const GcdGraph& g, const BigInt& p, const Config& cfg);

enum class MainBranch { Increment, Concentrated };
struct MainStepOutcome {
  MainBranch branch;
  std::optional<GcdGraph> graph;  // on Increment
  unsigned concentrated_k = 0;
  int n_flag = 0;  // 1 when the accounted exponents differ
  StepCertificate cert;
};
MainStepOutcome main_step(const GcdGraph& g, const BigInt& p, const Config& cfg);
MainStepOutcome small_prime_step(const GcdGraph& g, const BigInt& p, const Config& cfg);

struct SubgraphChain {
  GcdGraph graph;
  std::vector<StepCertificate> steps;
};
SubgraphChain main_step_sharp(const GcdGraph& g, const BigInt& p, const Config& cfg);
SubgraphChain small_prime_iteration(const GcdGraph& g, const BigInt& p, const Config& cfg);

SubgraphChain prop_flat(const GcdGraph& g, const Config& cfg);
SubgraphChain prop_sharp(const GcdGraph& g, const Config& cfg);
SubgraphChain prop_small(const GcdGraph& g, const Config& cfg);

struct TrimOutcome {
  GcdGraph graph;
  StepCertificate cert;
};
TrimOutcome cosmetic_trim(const GcdGraph& g, const Rational& t, const Config& cfg);

PipelineTrace good_subgraph_pipeline(const GcdGraph& g, const Rational& t, const Config& cfg);

}  // namespace gcdq::engine

#endif
