#ifndef GCDQ_TESTS_SUPPORT_HPP
#define GCDQ_TESTS_SUPPORT_HPP

#include "gcdq/engine.hpp"
#include "gcdq/graph.hpp"
#include "gcdq/harness.hpp"

#include <random>
#include <string>
#include <vector>

namespace gcdq::testing {

using Rng = std::mt19937_64;

inline long rand_in(Rng& rng, long lo, long hi) {
  return std::uniform_int_distribution<long>(lo, hi)(rng);
}

inline Rational rand_positive_rational(Rng& rng, long num_max = 20, long den_max = 9) {
  return make_ratio(rand_in(rng, 1, num_max), rand_in(rng, 1, den_max));
}

// Builds a graph from explicit vertex specs: each vertex is a list of
// (prime, exponent) plus a weight. Ids are assigned v0, v1, ... / w0, w1, ...
struct VertexSpec {
  std::vector<std::pair<long, unsigned>> factors;
  Rational mu = Rational(1);
};

GcdGraph make_graph(const std::vector<VertexSpec>& left, const std::vector<VertexSpec>& right,
                    const std::vector<std::pair<size_t, size_t>>& edges,
                    const std::map<BigInt, std::pair<unsigned, unsigned>>& primes = {});

// Valuation-controlled random graph over a small prime pool; valid by
// construction (accounted primes respect the three graph conditions).
GcdGraph random_valid_graph(Rng& rng, bool with_accounted = true);

// Mutations that break exactly one graph condition; returns the raw JSON so
// the invalid object can still be represented.
nlohmann::json break_divisibility(const GcdGraph& g, Rng& rng);
nlohmann::json break_gcd_valuation(const GcdGraph& g, Rng& rng);
nlohmann::json break_exact_valuation(const GcdGraph& g, Rng& rng);

// Independent magnitude-based re-implementation of the validity conditions,
// reading the serialized form only.
bool brute_force_valid(const nlohmann::json& graph_json);

// Random non-trivial graph guaranteed to carry p in some edge gcd, with
// class structure on both sides. Weights positive.
GcdGraph random_graph_with_residual_prime(Rng& rng, const BigInt& p, unsigned max_extra_val);

// Instance families for the dichotomy suites.
GcdGraph concentrated_instance(Rng& rng, const BigInt& p, unsigned k, const Rational& stray_mass);
GcdGraph spread_complete_instance(Rng& rng, const BigInt& p, unsigned k0, unsigned k1);

// psi-derived pipeline input on engineered integers; every edge carries
// distinct tag primes above t so the anatomy floor holds.
struct PipelineInstance {
  PsiFunction psi;
  long x = 0, y = 0;
  GcdGraph graph;
};
PipelineInstance pipeline_instance(Rng& rng, size_t n_vertices, size_t n_shared, int generation);

}  // namespace gcdq::testing

#endif
