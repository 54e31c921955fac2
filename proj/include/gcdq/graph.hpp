#ifndef GCDQ_GRAPH_HPP
#define GCDQ_GRAPH_HPP

#include "gcdq/factored.hpp"
#include "gcdq/interval.hpp"
#include "gcdq/profile.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace gcdq {

using VertexId = std::string;

// Vertex weights, shared unchanged by every subgraph of a graph.
class Measure {
 public:
  Measure() : table_(std::make_shared<std::map<VertexId, Rational>>()) {}
  explicit Measure(std::map<VertexId, Rational> table);

  const Rational& of(const VertexId& id) const;
  bool same_table(const Measure& o) const { return table_ == o.table_ || *table_ == *o.table_; }
  const std::map<VertexId, Rational>& table() const { return *table_; }

  nlohmann::json to_json() const;
  static Measure from_json(const nlohmann::json& j);

 private:
  std::shared_ptr<const std::map<VertexId, Rational>> table_;
};

enum class Side { Left, Right };

struct Violation {
  std::string condition;  // "vertex-weight", "divisibility", "gcd-valuation", "exact-valuation"
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

// Weighted bipartite graph on factored-integer vertices together with a set
// of accounted primes and the exact power each accounted prime takes on each
// side. Immutable; restriction operations return new values.
class GcdGraph {
 public:
  struct Vertex {
    VertexId id;
    FactoredInt n;
    Rational mu;  // cached measure weight
  };

  GcdGraph() = default;
  GcdGraph(Measure mu, std::vector<std::pair<VertexId, FactoredInt>> left,
           std::vector<std::pair<VertexId, FactoredInt>> right,
           std::vector<std::pair<VertexId, VertexId>> edges,
           std::map<BigInt, std::pair<unsigned, unsigned>> primes);

  const std::vector<Vertex>& left() const { return left_; }
  const std::vector<Vertex>& right() const { return right_; }
  const std::vector<Vertex>& side(Side s) const { return s == Side::Left ? left_ : right_; }
  const std::vector<std::pair<size_t, size_t>>& edges() const { return edges_; }
  const std::map<BigInt, std::pair<unsigned, unsigned>>& primes() const { return primes_; }
  const Measure& measure() const { return mu_; }

  const Rational& mu_left() const { return mu_left_; }
  const Rational& mu_right() const { return mu_right_; }
  const Rational& mu_edges() const { return mu_edges_; }

  Rational edge_density() const;  // 0 when a side has zero measure
  bool non_trivial() const { return mu_edges_ > 0; }

  ValidationReport validate() const;

  QualityValue quality(const ConstantsProfile& profile, unsigned precision_bits) const;

  // Primes outside the accounted set dividing some edge gcd, and its split
  // into concentrated ("sharp") and unconcentrated ("flat") parts.
  std::set<BigInt> r_set() const;
  std::set<BigInt> r_sharp(const ConstantsProfile& profile) const;
  std::set<BigInt> r_flat(const ConstantsProfile& profile) const;
  bool prime_is_sharp(const BigInt& p, const ConstantsProfile& profile) const;

  // Vertices on one side whose valuation at p is exactly k.
  std::vector<size_t> valuation_class(Side s, const BigInt& p, unsigned k) const;
  Rational class_mass(Side s, const BigInt& p, unsigned k) const;
  unsigned max_valuation(const BigInt& p) const;  // over both sides

  // Mass of the edges between the two exact-valuation classes.
  Rational edge_class_mass(const BigInt& p, unsigned k, unsigned l) const;

  // The subgraph fixing the valuation of p to k on the left and l on the
  // right, with p added to the accounted set. Requires p not accounted yet.
  GcdGraph restrict_prime(const BigInt& p, unsigned k, unsigned l) const;

  // Adds p to the accounted set with the given exponents without touching
  // vertices or edges; the result must validate, otherwise this throws.
  GcdGraph with_prime_accounted(const BigInt& p, unsigned k, unsigned l) const;

  // The subgraph induced by subsets of the two sides (accounted data kept).
  GcdGraph restrict_vertices(const std::vector<size_t>& left_keep,
                             const std::vector<size_t>& right_keep) const;
  GcdGraph restrict_vertices_by_id(const std::set<VertexId>& left_keep,
                                   const std::set<VertexId>& right_keep) const;

  // Same vertex sets, edge set restricted to the given edge indices.
  GcdGraph restrict_edges(const std::vector<size_t>& edge_keep) const;

  // Drop one vertex (and its edges) from the given side.
  GcdGraph drop_vertex(Side s, size_t index) const;

  bool is_subgraph_of(const GcdGraph& g) const;

  std::vector<size_t> neighborhood(Side s, size_t index) const;  // neighbour indices
  Rational neighborhood_mass(Side s, size_t index) const;

  // Certified enclosure of quality(restriction)/quality(*this) computed from
  // the closed-form ratio, not from two quality evaluations.
  RationalInterval quality_ratio(const BigInt& p, unsigned k, unsigned l,
                                 const ConstantsProfile& profile,
                                 unsigned precision_bits) const;

  // Exact rational part of the same ratio (everything except the enclosed
  // (1-p^{-a/b})^{-e} factor gained by accounting p).
  Rational quality_ratio_exact_part(const BigInt& p, unsigned k, unsigned l,
                                    const ConstantsProfile& profile) const;

  nlohmann::json to_json() const;
  static GcdGraph from_json(const nlohmann::json& j);
  std::string digest() const;

 private:
  void recompute_masses();

  Measure mu_;
  std::vector<Vertex> left_, right_;              // sorted by id
  std::vector<std::pair<size_t, size_t>> edges_;  // sorted index pairs
  std::map<BigInt, std::pair<unsigned, unsigned>> primes_;
  Rational mu_left_, mu_right_, mu_edges_;
};

// FNV-1a over a canonical serialization; stable across runs and platforms.
std::string fnv1a_digest(const std::string& payload);

}  // namespace gcdq

#endif
