#include "support.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

namespace gcdq::testing {

GcdGraph make_graph(const std::vector<VertexSpec>& left, const std::vector<VertexSpec>& right,
                    const std::vector<std::pair<size_t, size_t>>& edges,
                    const std::map<BigInt, std::pair<unsigned, unsigned>>& primes) {
  std::map<VertexId, Rational> mu;
  std::vector<std::pair<VertexId, FactoredInt>> l, r;
  auto build = [&](const std::vector<VertexSpec>& specs, const std::string& prefix,
                   std::vector<std::pair<VertexId, FactoredInt>>& out) {
    for (size_t i = 0; i < specs.size(); ++i) {
      std::vector<FactoredInt::Factor> fs;
      for (auto [p, e] : specs[i].factors) fs.emplace_back(BigInt(p), e);
      std::sort(fs.begin(), fs.end());
      VertexId id = prefix + std::to_string(i);
      mu[id] = specs[i].mu;
      out.emplace_back(id, FactoredInt(std::move(fs)));
    }
  };
  build(left, "v", l);
  build(right, "w", r);
  std::vector<std::pair<VertexId, VertexId>> e;
  for (auto [i, j] : edges)
    e.emplace_back("v" + std::to_string(i), "w" + std::to_string(j));
  return GcdGraph(Measure(std::move(mu)), std::move(l), std::move(r), std::move(e), primes);
}

GcdGraph random_valid_graph(Rng& rng, bool with_accounted) {
  const long pool[] = {2, 3, 5, 7, 11, 13};
  std::map<BigInt, std::pair<unsigned, unsigned>> primes;
  if (with_accounted) {
    size_t n_acc = rand_in(rng, 0, 2);
    std::set<size_t> chosen;
    while (chosen.size() < n_acc) chosen.insert(rand_in(rng, 0, 5));
    for (size_t i : chosen)
      primes[BigInt(pool[i])] = {static_cast<unsigned>(rand_in(rng, 0, 2)),
                                 static_cast<unsigned>(rand_in(rng, 0, 2))};
  }

  size_t nl = rand_in(rng, 2, 5), nr = rand_in(rng, 2, 5);
  auto make_side = [&](size_t n, bool left_side) {
    std::vector<VertexSpec> out;
    for (size_t i = 0; i < n; ++i) {
      VertexSpec v;
      for (long p : pool) {
        auto it = primes.find(BigInt(p));
        unsigned val;
        if (it != primes.end()) {
          auto [fp, gp] = it->second;
          unsigned fixed = left_side ? fp : gp;
          // With differing exponents the valuation is pinned; otherwise it
          // may only exceed the common exponent.
          val = fp != gp ? fixed : fixed + static_cast<unsigned>(rand_in(rng, 0, 2));
        } else {
          val = static_cast<unsigned>(rand_in(rng, 0, 2));
        }
        if (val > 0) v.factors.emplace_back(p, val);
      }
      v.mu = rand_in(rng, 0, 9) == 0 ? Rational(0) : rand_positive_rational(rng);
      out.push_back(std::move(v));
    }
    return out;
  };
  std::vector<VertexSpec> left = make_side(nl, true), right = make_side(nr, false);

  auto valuation_of = [](const VertexSpec& v, long p) -> unsigned {
    for (auto [q, e] : v.factors)
      if (q == p) return e;
    return 0;
  };
  std::vector<std::pair<size_t, size_t>> allowed;
  for (size_t i = 0; i < nl; ++i) {
    for (size_t j = 0; j < nr; ++j) {
      bool ok = true;
      for (const auto& [p, fg] : primes) {
        unsigned want = std::min(fg.first, fg.second);
        unsigned got = std::min(valuation_of(left[i], p.get_si()),
                                valuation_of(right[j], p.get_si()));
        if (got != want) {
          ok = false;
          break;
        }
      }
      if (ok) allowed.push_back({i, j});
    }
  }
  std::vector<std::pair<size_t, size_t>> edges;
  for (const auto& e : allowed)
    if (rand_in(rng, 0, 1)) edges.push_back(e);
  if (edges.empty() && !allowed.empty()) edges.push_back(allowed[0]);
  return make_graph(left, right, edges, primes);
}

namespace {

nlohmann::json bump_vertex_factor(nlohmann::json j, const std::string& side, size_t index,
                                  const std::string& prime) {
  auto& v = j.at(side).at(index).at("n");
  for (auto& f : v) {
    if (f.at(0).get<std::string>() == prime) {
      f[1] = f.at(1).get<unsigned>() + 1;
      return j;
    }
  }
  // Insert keeping the prime order.
  nlohmann::json entry = {prime, 1};
  nlohmann::json out = nlohmann::json::array();
  bool placed = false;
  BigInt pz(prime);
  for (auto& f : v) {
    if (!placed && BigInt(f.at(0).get<std::string>()) > pz) {
      out.push_back(entry);
      placed = true;
    }
    out.push_back(f);
  }
  if (!placed) out.push_back(entry);
  j.at(side).at(index)["n"] = out;
  return j;
}

std::string some_accounted_prime(const nlohmann::json& j) {
  if (j.at("P").empty()) return "";
  return j.at("P").at(0).get<std::string>();
}

nlohmann::json add_accounted_prime(nlohmann::json j, const std::string& p, unsigned f,
                                   unsigned g) {
  j.at("P").push_back(p);
  j.at("f")[p] = f;
  j.at("g")[p] = g;
  return j;
}

}  // namespace

nlohmann::json break_divisibility(const GcdGraph& g, Rng& rng) {
  nlohmann::json j = g.to_json();
  std::string p = some_accounted_prime(j);
  if (p.empty() || j.at("V").empty()) {
    // No accounted prime to raise: demand a power of 17 nobody has.
    return add_accounted_prime(j, "17", 1, 0);
  }
  j.at("f")[p] = j.at("f").at(p).get<unsigned>() + 3;
  (void)rng;
  return j;
}

nlohmann::json break_gcd_valuation(const GcdGraph& g, Rng& rng) {
  nlohmann::json j = g.to_json();
  if (j.at("E").empty() || j.at("P").empty()) {
    // Give both endpoints of a fresh prime so an edge would be required to
    // carry it; with no edges the divisibility condition is hit instead.
    return add_accounted_prime(j, "17", 1, 0);
  }
  std::string p = some_accounted_prime(j);
  size_t e = rand_in(rng, 0, j.at("E").size() - 1);
  std::string vid = j.at("E").at(e).at(0), wid = j.at("E").at(e).at(1);
  auto index_of = [&](const char* side, const std::string& id) -> size_t {
    const auto& arr = j.at(side);
    for (size_t i = 0; i < arr.size(); ++i)
      if (arr.at(i).at("id").get<std::string>() == id) return i;
    throw Error("edge endpoint not found");
  };
  // Raising the valuation on both endpoints bumps the gcd's p-power above
  // min(f,g).
  j = bump_vertex_factor(std::move(j), "V", index_of("V", vid), p);
  j = bump_vertex_factor(std::move(j), "W", index_of("W", wid), p);
  return j;
}

nlohmann::json break_exact_valuation(const GcdGraph& g, Rng& rng) {
  nlohmann::json j = g.to_json();
  std::string diff_p;
  for (const auto& p : j.at("P")) {
    std::string ps = p.get<std::string>();
    if (j.at("f").at(ps).get<unsigned>() != j.at("g").at(ps).get<unsigned>()) {
      diff_p = ps;
      break;
    }
  }
  if (diff_p.empty() || j.at("V").empty()) {
    return add_accounted_prime(j, "17", 1, 0);
  }
  size_t i = rand_in(rng, 0, j.at("V").size() - 1);
  return bump_vertex_factor(std::move(j), "V", i, diff_p);
}

bool brute_force_valid(const nlohmann::json& j) {
  // Magnitude-based re-check of the three conditions, sharing no code with
  // the library's validator.
  auto magnitude = [](const nlohmann::json& n) {
    BigInt m = 1;
    for (const auto& f : n) {
      BigInt p(f.at(0).get<std::string>());
      unsigned e = f.at(1).get<unsigned>();
      for (unsigned i = 0; i < e; ++i) m *= p;
    }
    return m;
  };
  auto valuation = [](BigInt n, const BigInt& p) {
    unsigned v = 0;
    while (n % p == 0) {
      n /= p;
      ++v;
    }
    return v;
  };
  std::map<std::string, BigInt> vmag, wmag;
  for (const auto& v : j.at("V")) vmag[v.at("id").get<std::string>()] = magnitude(v.at("n"));
  for (const auto& w : j.at("W")) wmag[w.at("id").get<std::string>()] = magnitude(w.at("n"));
  for (const auto& pj : j.at("P")) {
    std::string ps = pj.get<std::string>();
    BigInt p(ps);
    unsigned fp = j.at("f").at(ps).get<unsigned>();
    unsigned gp = j.at("g").at(ps).get<unsigned>();
    for (const auto& [id, m] : vmag) {
      unsigned val = valuation(m, p);
      if (val < fp) return false;
      if (fp != gp && val != fp) return false;
    }
    for (const auto& [id, m] : wmag) {
      unsigned val = valuation(m, p);
      if (val < gp) return false;
      if (fp != gp && val != gp) return false;
    }
    for (const auto& e : j.at("E")) {
      BigInt gcd_vw;
      mpz_gcd(gcd_vw.get_mpz_t(), vmag.at(e.at(0).get<std::string>()).get_mpz_t(),
              wmag.at(e.at(1).get<std::string>()).get_mpz_t());
      if (valuation(gcd_vw, p) != std::min(fp, gp)) return false;
    }
  }
  return true;
}

GcdGraph random_graph_with_residual_prime(Rng& rng, const BigInt& p, unsigned max_extra_val) {
  const long tags[] = {17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  size_t nl = rand_in(rng, 2, 5), nr = rand_in(rng, 2, 5);
  auto make_side = [&](size_t n, size_t tag_off) {
    std::vector<VertexSpec> out;
    for (size_t i = 0; i < n; ++i) {
      VertexSpec v;
      unsigned val = static_cast<unsigned>(rand_in(rng, 0, max_extra_val));
      if (i == 0) val = std::max(val, 1u);  // guarantees p in some edge gcd
      // p may be huge; store as string-backed factor below.
      if (val > 0) v.factors.emplace_back(0, val);  // placeholder, fixed later
      v.factors.emplace_back(tags[(tag_off + i) % 10], 1);
      v.mu = rand_positive_rational(rng);
      out.push_back(std::move(v));
    }
    return out;
  };
  std::vector<VertexSpec> left = make_side(nl, 0), right = make_side(nr, 5);

  // Assemble directly; VertexSpec holds long primes only, so build the
  // factored values here with the big prime.
  std::map<VertexId, Rational> mu;
  std::vector<std::pair<VertexId, FactoredInt>> l, r;
  auto realize = [&](const std::vector<VertexSpec>& specs, const std::string& prefix,
                     std::vector<std::pair<VertexId, FactoredInt>>& out) {
    for (size_t i = 0; i < specs.size(); ++i) {
      FactoredInt n = FactoredInt::one();
      for (auto [q, e] : specs[i].factors)
        n = mul(n, FactoredInt::prime_power(q == 0 ? p : BigInt(q), e));
      VertexId id = prefix + std::to_string(i);
      mu[id] = specs[i].mu;
      out.emplace_back(id, std::move(n));
    }
  };
  realize(left, "v", l);
  realize(right, "w", r);
  std::vector<std::pair<VertexId, VertexId>> edges;
  edges.emplace_back("v0", "w0");
  for (size_t i = 0; i < nl; ++i)
    for (size_t j = 0; j < nr; ++j)
      if (!(i == 0 && j == 0) && rand_in(rng, 0, 1)) {
        edges.emplace_back("v" + std::to_string(i), "w" + std::to_string(j));
      }
  return GcdGraph(Measure(std::move(mu)), std::move(l), std::move(r), std::move(edges), {});
}

GcdGraph concentrated_instance(Rng& rng, const BigInt& p, unsigned k,
                               const Rational& stray_mass) {
  const long tags[] = {17, 19, 23, 29, 31, 37, 41, 43};
  std::map<VertexId, Rational> mu;
  std::vector<std::pair<VertexId, FactoredInt>> l, r;
  std::vector<std::pair<VertexId, VertexId>> edges;
  size_t per_side = rand_in(rng, 2, 4);
  auto add_vertex = [&](const std::string& prefix, size_t i, unsigned val, const Rational& m,
                        std::vector<std::pair<VertexId, FactoredInt>>& side, size_t tag_off) {
    FactoredInt n = FactoredInt::prime_power(tags[(tag_off + i) % 8], 1);
    if (val > 0) n = mul(n, FactoredInt::prime_power(p, val));
    VertexId id = prefix + std::to_string(i);
    mu[id] = m;
    side.emplace_back(id, std::move(n));
  };
  for (size_t i = 0; i < per_side; ++i) {
    add_vertex("v", i, k, rand_positive_rational(rng, 9, 3) + 1, l, 0);
    add_vertex("w", i, k, rand_positive_rational(rng, 9, 3) + 1, r, 4);
  }
  // One light stray vertex per side off the concentrated exponent. With
  // k = 0 the strays share p so the prime still appears in an edge gcd.
  add_vertex("v", per_side, k == 0 ? 1 : k - 1 + 2 * rand_in(rng, 0, 1), stray_mass, l, 2);
  add_vertex("w", per_side, k == 0 ? 1 : k - 1 + 2 * rand_in(rng, 0, 1), stray_mass, r, 6);
  for (size_t i = 0; i <= per_side; ++i)
    for (size_t j = 0; j <= per_side; ++j)
      edges.emplace_back("v" + std::to_string(i), "w" + std::to_string(j));
  return GcdGraph(Measure(std::move(mu)), std::move(l), std::move(r), std::move(edges), {});
}

GcdGraph spread_complete_instance(Rng& rng, const BigInt& p, unsigned k0, unsigned k1) {
  const long tags[] = {17, 19, 23, 29, 31, 37, 41, 43};
  std::map<VertexId, Rational> mu;
  std::vector<std::pair<VertexId, FactoredInt>> l, r;
  std::vector<std::pair<VertexId, VertexId>> edges;
  size_t idx = 0;
  auto add_class = [&](const std::string& prefix, unsigned val,
                       std::vector<std::pair<VertexId, FactoredInt>>& side) {
    for (size_t i = 0; i < 2; ++i) {
      FactoredInt n = FactoredInt::prime_power(tags[idx % 8], 1);
      ++idx;
      if (val > 0) n = mul(n, FactoredInt::prime_power(p, val));
      VertexId id = prefix + std::to_string(side.size());
      mu[id] = make_ratio(rand_in(rng, 2, 4), 2);  // masses within a factor 2
      side.emplace_back(id, std::move(n));
    }
  };
  add_class("v", k0, l);
  add_class("v", k1, l);
  add_class("w", k0, r);
  add_class("w", k1, r);
  for (size_t i = 0; i < l.size(); ++i)
    for (size_t j = 0; j < r.size(); ++j)
      edges.emplace_back(l[i].first, r[j].first);
  return GcdGraph(Measure(std::move(mu)), std::move(l), std::move(r), std::move(edges), {});
}

PipelineInstance pipeline_instance(Rng& rng, size_t n_vertices, size_t n_shared,
                                   int generation) {
  const long shared_pool[] = {1009, 1013, 1019, 1021, 1031, 1033, 1039, 1049};
  n_shared = std::min<size_t>(n_shared, 8);
  std::vector<long> tags;
  BigInt u = 1050;
  while (tags.size() < n_vertices) {
    u = next_prime_at_least(u + 1);
    tags.push_back(u.get_si());
  }

  std::map<long, Rational> table;
  std::vector<long> support;
  for (size_t i = 0; i < n_vertices; ++i) {
    long qa = shared_pool[rand_in(rng, 0, static_cast<long>(n_shared) - 1)];
    long n = 12 * qa * tags[i];
    if (generation >= 1 && rand_in(rng, 0, 2) == 0) {
      // A second shared prime deepens the residual chain; keep the tag so
      // the anatomy mass survives.
      long qb = shared_pool[rand_in(rng, 0, static_cast<long>(n_shared) - 1)];
      if (qb != qa) n = 12 * qa * qb * tags[i] / 1;
    }
    support.push_back(n);
  }
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  // Weights that keep the total vertex mass in [1, 2].
  Rational phi_sum(0);
  for (long n : support) phi_sum += FactoredInt::from_integer(n).phi_over_n();
  Rational c = Rational(3, 2) / phi_sum;
  if (c > Rational(1, 2)) c = Rational(1, 2);
  for (long n : support) table[n] = c;

  PipelineInstance out;
  out.psi = PsiFunction::table(std::move(table));
  out.x = support.front();
  out.y = support.back();
  out.graph = mu_graph_from_psi(out.psi, out.x, out.y, Rational(1009),
                                ConstantsProfile::scaled().anatomy_threshold);
  return out;
}

}  // namespace gcdq::testing
