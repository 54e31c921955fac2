#include "gcdq/graph.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <sstream>

namespace gcdq {

Measure::Measure(std::map<VertexId, Rational> table) {
  for (const auto& [id, w] : table)
    if (w < 0) throw PreconditionError("Measure: negative weight at '" + id + "'");
  table_ = std::make_shared<std::map<VertexId, Rational>>(std::move(table));
}

const Rational& Measure::of(const VertexId& id) const {
  auto it = table_->find(id);
  if (it == table_->end())
    throw PreconditionError("Measure: no weight for vertex '" + id + "'");
  return it->second;
}

nlohmann::json Measure::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, w] : *table_) j[id] = rational_to_string(w);
  return j;
}

Measure Measure::from_json(const nlohmann::json& j) {
  std::map<VertexId, Rational> t;
  for (auto it = j.begin(); it != j.end(); ++it)
    t[it.key()] = parse_rational(it.value().get<std::string>());
  return Measure(std::move(t));
}

std::string ValidationReport::to_string() const {
  if (ok()) return "valid";
  std::ostringstream os;
  for (const auto& v : violations) os << v.condition << ": " << v.detail << "\n";
  return os.str();
}

GcdGraph::GcdGraph(Measure mu, std::vector<std::pair<VertexId, FactoredInt>> left,
                   std::vector<std::pair<VertexId, FactoredInt>> right,
                   std::vector<std::pair<VertexId, VertexId>> edges,
                   std::map<BigInt, std::pair<unsigned, unsigned>> primes)
    : mu_(std::move(mu)), primes_(std::move(primes)) {
  auto build_side = [&](std::vector<std::pair<VertexId, FactoredInt>>& in,
                        std::vector<Vertex>& out) {
    std::sort(in.begin(), in.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (size_t i = 1; i < in.size(); ++i)
      if (in[i].first == in[i - 1].first)
        throw PreconditionError("GcdGraph: duplicate vertex id '" + in[i].first + "'");
    out.reserve(in.size());
    for (auto& [id, n] : in) out.push_back(Vertex{id, std::move(n), mu_.of(id)});
  };
  build_side(left, left_);
  build_side(right, right_);

  std::map<VertexId, size_t> lidx, ridx;
  for (size_t i = 0; i < left_.size(); ++i) lidx[left_[i].id] = i;
  for (size_t i = 0; i < right_.size(); ++i) ridx[right_[i].id] = i;
  edges_.reserve(edges.size());
  for (const auto& [v, w] : edges) {
    auto vi = lidx.find(v);
    auto wi = ridx.find(w);
    if (vi == lidx.end() || wi == ridx.end())
      throw PreconditionError("GcdGraph: edge endpoint not a vertex: (" + v + "," + w + ")");
    edges_.emplace_back(vi->second, wi->second);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  recompute_masses();
}

void GcdGraph::recompute_masses() {
  mu_left_ = 0;
  mu_right_ = 0;
  mu_edges_ = 0;
  for (const auto& v : left_) mu_left_ += v.mu;
  for (const auto& w : right_) mu_right_ += w.mu;
  for (const auto& [i, j] : edges_) mu_edges_ += left_[i].mu * right_[j].mu;
}

Rational GcdGraph::edge_density() const {
  if (mu_left_ == 0 || mu_right_ == 0) return Rational(0);
  return mu_edges_ / (mu_left_ * mu_right_);
}

ValidationReport GcdGraph::validate() const {
  ValidationReport rep;
  for (const auto& side : {&left_, &right_})
    for (const auto& v : *side)
      if (v.mu < 0)
        rep.violations.push_back({"vertex-weight", "negative weight at " + v.id});
  for (const auto& [p, fg] : primes_) {
    const auto& [fp, gp] = fg;
    for (const auto& v : left_) {
      unsigned val = v.n.valuation(p);
      if (val < fp)
        rep.violations.push_back(
            {"divisibility", "p=" + p.get_str() + " vertex " + v.id + " has valuation " +
                                 std::to_string(val) + " < " + std::to_string(fp)});
      if (fp != gp && val != fp)
        rep.violations.push_back(
            {"exact-valuation", "p=" + p.get_str() + " vertex " + v.id + " has valuation " +
                                    std::to_string(val) + " != " + std::to_string(fp)});
    }
    for (const auto& w : right_) {
      unsigned val = w.n.valuation(p);
      if (val < gp)
        rep.violations.push_back(
            {"divisibility", "p=" + p.get_str() + " vertex " + w.id + " has valuation " +
                                 std::to_string(val) + " < " + std::to_string(gp)});
      if (fp != gp && val != gp)
        rep.violations.push_back(
            {"exact-valuation", "p=" + p.get_str() + " vertex " + w.id + " has valuation " +
                                    std::to_string(val) + " != " + std::to_string(gp)});
    }
    unsigned want = std::min(fp, gp);
    for (const auto& [i, j] : edges_) {
      unsigned got = std::min(left_[i].n.valuation(p), right_[j].n.valuation(p));
      if (got != want)
        rep.violations.push_back(
            {"gcd-valuation", "p=" + p.get_str() + " edge (" + left_[i].id + "," +
                                  right_[j].id + ") carries p^" + std::to_string(got) +
                                  " in its gcd, expected p^" + std::to_string(want)});
    }
  }
  return rep;
}

QualityValue GcdGraph::quality(const ConstantsProfile& profile,
                               unsigned precision_bits) const {
  QualityValue q;
  q.trans_part = RationalInterval::point(Rational(1));
  if (mu_edges_ == 0) {
    q.exact_part = 0;
    q.product = RationalInterval::point(Rational(0));
    return q;
  }
  unsigned e = profile.density_exponent;
  Rational delta = edge_density();
  q.exact_part = pow_int(delta, e) * mu_left_ * mu_right_;
  for (const auto& [p, fg] : primes_) {
    const auto& [fp, gp] = fg;
    unsigned diff = fp > gp ? fp - gp : gp - fp;
    if (diff > 0) q.exact_part *= Rational(powz(p, diff));
    if (fp == gp && fp >= 1) q.exact_part /= pow_int(Rational(p - 1, p), 2);
    q.trans_part = q.trans_part *
                   power_deficit_factor_enclosure(p, profile.trans_exponent, e, precision_bits);
  }
  q.product = q.trans_part * q.exact_part;
  return q;
}

std::set<BigInt> GcdGraph::r_set() const {
  std::set<BigInt> out;
  for (const auto& [i, j] : edges_) {
    FactoredInt g = gcd(left_[i].n, right_[j].n);
    for (const auto& f : g.factors())
      if (!primes_.count(f.first)) out.insert(f.first);
  }
  return out;
}

bool GcdGraph::prime_is_sharp(const BigInt& p, const ConstantsProfile& profile) const {
  // Classes above the top valuation are empty, hence carry no mass.
  Rational bound = Rational(1) - make_ratio(profile.sharp_threshold, p);
  Rational need_l = bound * mu_left_;
  Rational need_r = bound * mu_right_;
  for (unsigned k = 0; k <= max_valuation(p); ++k) {
    if (class_mass(Side::Left, p, k) >= need_l && class_mass(Side::Right, p, k) >= need_r)
      return true;
  }
  return false;
}

std::set<BigInt> GcdGraph::r_sharp(const ConstantsProfile& profile) const {
  std::set<BigInt> out;
  for (const BigInt& p : r_set())
    if (prime_is_sharp(p, profile)) out.insert(p);
  return out;
}

std::set<BigInt> GcdGraph::r_flat(const ConstantsProfile& profile) const {
  std::set<BigInt> out;
  for (const BigInt& p : r_set())
    if (!prime_is_sharp(p, profile)) out.insert(p);
  return out;
}

std::vector<size_t> GcdGraph::valuation_class(Side s, const BigInt& p, unsigned k) const {
  std::vector<size_t> out;
  const auto& vs = side(s);
  for (size_t i = 0; i < vs.size(); ++i)
    if (vs[i].n.valuation(p) == k) out.push_back(i);
  return out;
}

Rational GcdGraph::class_mass(Side s, const BigInt& p, unsigned k) const {
  Rational m(0);
  for (const auto& v : side(s))
    if (v.n.valuation(p) == k) m += v.mu;
  return m;
}

unsigned GcdGraph::max_valuation(const BigInt& p) const {
  unsigned m = 0;
  for (const auto& v : left_) m = std::max(m, v.n.valuation(p));
  for (const auto& w : right_) m = std::max(m, w.n.valuation(p));
  return m;
}

Rational GcdGraph::edge_class_mass(const BigInt& p, unsigned k, unsigned l) const {
  Rational m(0);
  for (const auto& [i, j] : edges_)
    if (left_[i].n.valuation(p) == k && right_[j].n.valuation(p) == l)
      m += left_[i].mu * right_[j].mu;
  return m;
}

GcdGraph GcdGraph::restrict_prime(const BigInt& p, unsigned k, unsigned l) const {
  if (primes_.count(p))
    throw PreconditionError("restrict_prime: " + p.get_str() + " already accounted");
  GcdGraph g;
  g.mu_ = mu_;
  g.primes_ = primes_;
  g.primes_[p] = {k, l};
  std::vector<size_t> lmap(left_.size(), SIZE_MAX), rmap(right_.size(), SIZE_MAX);
  for (size_t i = 0; i < left_.size(); ++i)
    if (left_[i].n.valuation(p) == k) {
      lmap[i] = g.left_.size();
      g.left_.push_back(left_[i]);
    }
  for (size_t j = 0; j < right_.size(); ++j)
    if (right_[j].n.valuation(p) == l) {
      rmap[j] = g.right_.size();
      g.right_.push_back(right_[j]);
    }
  for (const auto& [i, j] : edges_)
    if (lmap[i] != SIZE_MAX && rmap[j] != SIZE_MAX) g.edges_.emplace_back(lmap[i], rmap[j]);
  g.recompute_masses();
  return g;
}

GcdGraph GcdGraph::with_prime_accounted(const BigInt& p, unsigned k, unsigned l) const {
  if (primes_.count(p))
    throw PreconditionError("with_prime_accounted: " + p.get_str() + " already accounted");
  GcdGraph g(*this);
  g.primes_[p] = {k, l};
  ValidationReport rep = g.validate();
  if (!rep.ok())
    throw PreconditionError("with_prime_accounted: result is not a valid graph: " +
                            rep.to_string());
  return g;
}

GcdGraph GcdGraph::restrict_vertices(const std::vector<size_t>& left_keep,
                                     const std::vector<size_t>& right_keep) const {
  GcdGraph g;
  g.mu_ = mu_;
  g.primes_ = primes_;
  std::vector<size_t> lmap(left_.size(), SIZE_MAX), rmap(right_.size(), SIZE_MAX);
  auto lk = left_keep;
  auto rk = right_keep;
  std::sort(lk.begin(), lk.end());
  std::sort(rk.begin(), rk.end());
  for (size_t i : lk) {
    if (i >= left_.size()) throw PreconditionError("restrict_vertices: bad left index");
    if (lmap[i] != SIZE_MAX) continue;
    lmap[i] = g.left_.size();
    g.left_.push_back(left_[i]);
  }
  for (size_t j : rk) {
    if (j >= right_.size()) throw PreconditionError("restrict_vertices: bad right index");
    if (rmap[j] != SIZE_MAX) continue;
    rmap[j] = g.right_.size();
    g.right_.push_back(right_[j]);
  }
  for (const auto& [i, j] : edges_)
    if (lmap[i] != SIZE_MAX && rmap[j] != SIZE_MAX) g.edges_.emplace_back(lmap[i], rmap[j]);
  g.recompute_masses();
  return g;
}

GcdGraph GcdGraph::restrict_vertices_by_id(const std::set<VertexId>& left_keep,
                                           const std::set<VertexId>& right_keep) const {
  std::vector<size_t> lk, rk;
  for (size_t i = 0; i < left_.size(); ++i)
    if (left_keep.count(left_[i].id)) lk.push_back(i);
  for (size_t j = 0; j < right_.size(); ++j)
    if (right_keep.count(right_[j].id)) rk.push_back(j);
  if (lk.size() != left_keep.size() || rk.size() != right_keep.size())
    throw PreconditionError("restrict_vertices_by_id: unknown vertex id");
  return restrict_vertices(lk, rk);
}

GcdGraph GcdGraph::restrict_edges(const std::vector<size_t>& edge_keep) const {
  GcdGraph g;
  g.mu_ = mu_;
  g.primes_ = primes_;
  g.left_ = left_;
  g.right_ = right_;
  for (size_t e : edge_keep) {
    if (e >= edges_.size()) throw PreconditionError("restrict_edges: bad edge index");
    g.edges_.push_back(edges_[e]);
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());
  g.recompute_masses();
  return g;
}

GcdGraph GcdGraph::drop_vertex(Side s, size_t index) const {
  std::vector<size_t> lk, rk;
  for (size_t i = 0; i < left_.size(); ++i)
    if (s != Side::Left || i != index) lk.push_back(i);
  for (size_t j = 0; j < right_.size(); ++j)
    if (s != Side::Right || j != index) rk.push_back(j);
  return restrict_vertices(lk, rk);
}

bool GcdGraph::is_subgraph_of(const GcdGraph& g) const {
  if (!mu_.same_table(g.mu_)) return false;
  auto side_subset = [](const std::vector<Vertex>& sub, const std::vector<Vertex>& sup) {
    size_t j = 0;
    for (const auto& v : sub) {
      while (j < sup.size() && sup[j].id < v.id) ++j;
      if (j == sup.size() || sup[j].id != v.id || !(sup[j].n == v.n)) return false;
    }
    return true;
  };
  if (!side_subset(left_, g.left_) || !side_subset(right_, g.right_)) return false;
  // Edge containment via ids (indices differ between the two graphs).
  std::set<std::pair<VertexId, VertexId>> sup_edges;
  for (const auto& [i, j] : g.edges_) sup_edges.insert({g.left_[i].id, g.right_[j].id});
  for (const auto& [i, j] : edges_)
    if (!sup_edges.count({left_[i].id, right_[j].id})) return false;
  for (const auto& [p, fg] : g.primes_) {
    auto it = primes_.find(p);
    if (it == primes_.end() || it->second != fg) return false;
  }
  return true;
}

std::vector<size_t> GcdGraph::neighborhood(Side s, size_t index) const {
  std::vector<size_t> out;
  for (const auto& [i, j] : edges_) {
    if (s == Side::Left && i == index) out.push_back(j);
    if (s == Side::Right && j == index) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Rational GcdGraph::neighborhood_mass(Side s, size_t index) const {
  Rational m(0);
  const auto& other = s == Side::Left ? right_ : left_;
  for (size_t i : neighborhood(s, index)) m += other[i].mu;
  return m;
}

Rational GcdGraph::quality_ratio_exact_part(const BigInt& p, unsigned k, unsigned l,
                                            const ConstantsProfile& profile) const {
  if (!non_trivial()) throw PreconditionError("quality_ratio: trivial graph");
  Rational vk = class_mass(Side::Left, p, k);
  Rational wl = class_mass(Side::Right, p, l);
  if (vk == 0 || wl == 0)
    throw PreconditionError("quality_ratio: empty valuation class");
  unsigned e = profile.density_exponent;
  Rational ratio = pow_int(edge_class_mass(p, k, l) / mu_edges_, e);
  ratio *= pow_int(mu_left_ / vk, e - 1);
  ratio *= pow_int(mu_right_ / wl, e - 1);
  unsigned diff = k > l ? k - l : l - k;
  if (diff > 0) ratio *= Rational(powz(p, diff));
  if (k == l && k >= 1) ratio /= pow_int(Rational(p - 1, p), 2);
  return ratio;
}

RationalInterval GcdGraph::quality_ratio(const BigInt& p, unsigned k, unsigned l,
                                         const ConstantsProfile& profile,
                                         unsigned precision_bits) const {
  if (!r_set().count(p)) throw PreconditionError("quality_ratio: p not in the residual set");
  Rational exact = quality_ratio_exact_part(p, k, l, profile);
  return power_deficit_factor_enclosure(p, profile.trans_exponent, profile.density_exponent,
                                        precision_bits) *
         exact;
}

nlohmann::json GcdGraph::to_json() const {
  nlohmann::json jv = nlohmann::json::array(), jw = nlohmann::json::array(),
                 je = nlohmann::json::array(), jp = nlohmann::json::array();
  nlohmann::json jf = nlohmann::json::object(), jg = nlohmann::json::object();
  for (const auto& v : left_) jv.push_back({{"id", v.id}, {"n", v.n.to_json()}});
  for (const auto& w : right_) jw.push_back({{"id", w.id}, {"n", w.n.to_json()}});
  for (const auto& [i, j] : edges_) je.push_back({left_[i].id, right_[j].id});
  for (const auto& [p, fg] : primes_) {
    jp.push_back(p.get_str());
    jf[p.get_str()] = fg.first;
    jg[p.get_str()] = fg.second;
  }
  return {{"mu", mu_.to_json()}, {"V", jv}, {"W", jw}, {"E", je},
          {"P", jp},             {"f", jf}, {"g", jg}};
}

GcdGraph GcdGraph::from_json(const nlohmann::json& j) {
  Measure mu = Measure::from_json(j.at("mu"));
  std::vector<std::pair<VertexId, FactoredInt>> left, right;
  for (const auto& v : j.at("V"))
    left.emplace_back(v.at("id").get<std::string>(), FactoredInt::from_json(v.at("n")));
  for (const auto& w : j.at("W"))
    right.emplace_back(w.at("id").get<std::string>(), FactoredInt::from_json(w.at("n")));
  std::vector<std::pair<VertexId, VertexId>> edges;
  for (const auto& e : j.at("E"))
    edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  std::map<BigInt, std::pair<unsigned, unsigned>> primes;
  const auto& jf = j.at("f");
  const auto& jg = j.at("g");
  for (const auto& p : j.at("P")) {
    std::string ps = p.get<std::string>();
    primes[BigInt(ps)] = {jf.at(ps).get<unsigned>(), jg.at(ps).get<unsigned>()};
  }
  return GcdGraph(std::move(mu), std::move(left), std::move(right), std::move(edges),
                  std::move(primes));
}

std::string fnv1a_digest(const std::string& payload) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : payload) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string GcdGraph::digest() const { return fnv1a_digest(to_json().dump()); }

}  // namespace gcdq
