#include "gcdq/certificate.hpp"
#include "gcdq/engine.hpp"
#include "gcdq/harness.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace gcdq;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitParse = 2;
constexpr int kExitIndeterminate = 3;
constexpr int kExitPrecondition = 4;

struct RunConfig {
  std::string profile = "scaled";
  unsigned precision = 128;
  unsigned ceiling = 4096;
  unsigned long seed = 1;
  std::string out_dir = ".";
};

ConstantsProfile resolve_profile(const std::string& name) {
  if (name == "paper" || name == "scaled") return ConstantsProfile::by_name(name);
  std::ifstream in(name);
  if (!in) throw PreconditionError("profile file not found: " + name);
  nlohmann::json j;
  in >> j;
  return ConstantsProfile::from_json(j);
}

engine::Config engine_config(const RunConfig& rc) {
  engine::Config cfg;
  cfg.profile = resolve_profile(rc.profile);
  if (rc.precision < 32) throw PreconditionError("precision must be >= 32");
  cfg.precision_bits = rc.precision;
  cfg.precision_ceiling = std::max(rc.ceiling, rc.precision);
  return cfg;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string csv_header(const RunConfig& rc, const std::string& extra = "") {
  std::ostringstream os;
  os << "# profile=" << rc.profile << " precision=" << rc.precision << " seed=" << rc.seed;
  if (!extra.empty()) os << " " << extra;
  os << "\n";
  return os.str();
}

PsiFunction parse_psi(const std::string& spec) {
  if (spec.rfind("const:", 0) == 0) {
    std::string rest = spec.substr(6);
    auto c1 = rest.find(':');
    Rational v = parse_rational(c1 == std::string::npos ? rest : rest.substr(0, c1));
    long lo = 1, hi = -1;
    if (c1 != std::string::npos) {
      std::string tail = rest.substr(c1 + 1);
      auto c2 = tail.find(':');
      lo = std::stol(c2 == std::string::npos ? tail : tail.substr(0, c2));
      if (c2 != std::string::npos) hi = std::stol(tail.substr(c2 + 1));
    }
    return PsiFunction::constant(v, lo, hi);
  }
  if (spec.rfind("recip", 0) == 0) {
    Rational scale(1);
    if (spec.size() > 6 && spec[5] == ':') scale = parse_rational(spec.substr(6));
    return PsiFunction::reciprocal(scale);
  }
  if (spec.rfind("table:", 0) == 0) {
    nlohmann::json j = load_json(spec.substr(6));
    std::map<long, Rational> t;
    for (auto it = j.begin(); it != j.end(); ++it)
      t[std::stol(it.key())] = parse_rational(it.value().get<std::string>());
    return PsiFunction::table(std::move(t));
  }
  throw PreconditionError("unrecognized psi spec '" + spec +
                          "' (use const:V[:lo[:hi]], recip[:scale], table:file.json)");
}

int cmd_graph_validate(const std::string& path) {
  nlohmann::json j;
  GcdGraph g;
  try {
    j = load_json(path);
    g = GcdGraph::from_json(j);
  } catch (const std::exception& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  }
  ValidationReport rep = g.validate();
  if (rep.ok()) {
    std::cout << "valid\n";
    return kExitOk;
  }
  std::cout << rep.to_string();
  return kExitInvalid;
}

int cmd_graph_quality(const std::string& path, const RunConfig& rc) {
  engine::Config cfg = engine_config(rc);
  GcdGraph g = GcdGraph::from_json(load_json(path));
  ValidationReport rep = g.validate();
  if (!rep.ok()) {
    std::cerr << rep.to_string();
    return kExitInvalid;
  }
  QualityValue q = g.quality(cfg.profile, cfg.precision_bits);
  std::cout << q.to_json().dump(2) << "\n";
  return kExitOk;
}

int cmd_pipeline_run(const std::string& path, const std::string& t_str, const RunConfig& rc) {
  engine::Config cfg = engine_config(rc);
  GcdGraph g = GcdGraph::from_json(load_json(path));
  ValidationReport rep = g.validate();
  if (!rep.ok()) {
    std::cerr << rep.to_string();
    return kExitInvalid;
  }
  Rational t = parse_rational(t_str);
  PipelineTrace trace;
  try {
    trace = engine::good_subgraph_pipeline(g, t, cfg);
  } catch (const PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const IndeterminateError& e) {
    std::cerr << "indeterminate: " << e.what() << "\n";
    return kExitIndeterminate;
  }
  std::string out_path = rc.out_dir + "/trace.json";
  write_text(out_path, trace.to_json().dump(2) + "\n");
  std::cout << "steps=" << trace.steps.size() << " case=" << trace.case_tag
            << " trace=" << out_path << "\n";
  return kExitOk;
}

int cmd_trace_verify(const std::string& path) {
  nlohmann::json j;
  try {
    j = load_json(path);
  } catch (const std::exception& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  }
  TraceVerifyResult r = verify_trace_json(j);
  std::cout << r.message << "\n";
  if (r.ok) return kExitOk;
  return r.indeterminate ? kExitIndeterminate : kExitInvalid;
}

int cmd_ds_measure(const RunConfig& rc, const std::string& psi_spec, long qmin, long qmax) {
  PsiFunction psi = parse_psi(psi_spec);
  std::ostringstream os;
  os << csv_header(rc, "psi=" + psi_spec);
  os << "q,psi,measure,two_psi_phi_over_q\n";
  for (long q = qmin; q <= qmax; ++q) {
    Rational m = a_q_set(psi, q).measure();
    Rational closed = 2 * psi(q) * FactoredInt::from_integer(q).phi_over_n();
    os << q << "," << rational_to_string(psi(q)) << "," << rational_to_string(m) << ","
       << rational_to_string(closed) << "\n";
  }
  write_text(rc.out_dir + "/measure.csv", os.str());
  std::cout << rc.out_dir + "/measure.csv\n";
  return kExitOk;
}

int cmd_ds_overlap(const RunConfig& rc, const std::string& psi_spec, long qmax) {
  PsiFunction psi = parse_psi(psi_spec);
  std::ostringstream os;
  os << csv_header(rc, "psi=" + psi_spec);
  os << "q,r,lhs,rhs_core,indicator\n";
  Rational sup(0);
  long sup_q = 0, sup_r = 0;
  for (long q = 1; q <= qmax; ++q) {
    for (long r = 1; r <= qmax; ++r) {
      if (q == r) continue;
      OverlapReport rep = overlap_report(psi, q, r);
      os << q << "," << r << "," << rational_to_string(rep.lhs) << ","
         << rational_to_string(rep.rhs_core) << "," << (rep.indicator ? 1 : 0) << "\n";
      if (rep.indicator && rep.rhs_core > 0) {
        Rational ratio = rep.lhs / rep.rhs_core;
        if (ratio > sup) {
          sup = ratio;
          sup_q = q;
          sup_r = r;
        }
      }
    }
  }
  os << "# sup lhs/rhs_core over indicator-true pairs: " << rational_to_string(sup) << " at ("
     << sup_q << "," << sup_r << ")\n";
  write_text(rc.out_dir + "/overlap.csv", os.str());
  std::cout << rc.out_dir + "/overlap.csv\n";
  return kExitOk;
}

int cmd_ds_second_moment(const RunConfig& rc, const std::string& psi_spec, long x,
                         const std::string& t_grid, const std::string& threshold_str) {
  PsiFunction psi = parse_psi(psi_spec);
  Rational threshold = parse_rational(threshold_str);
  std::ostringstream os;
  os << csv_header(rc, "psi=" + psi_spec + " x=" + std::to_string(x));
  os << "t,y,edges,sum,t_times_sum\n";
  auto y = choose_y(psi, x);
  if (!y) {
    std::cerr << "no Y below the cap: the weighted series does not reach 1\n";
    return kExitPrecondition;
  }
  std::stringstream grid(t_grid);
  std::string tok;
  while (std::getline(grid, tok, ',')) {
    Rational t = parse_rational(tok);
    auto edges = build_edge_set(psi, x, y->y, t, threshold);
    Rational s = second_moment(psi, x, y->y, t, threshold);
    os << rational_to_string(t) << "," << y->y << "," << edges.size() << ","
       << rational_to_string(s) << "," << rational_to_string(t * s) << "\n";
  }
  write_text(rc.out_dir + "/second_moment.csv", os.str());
  std::cout << rc.out_dir + "/second_moment.csv\n";
  return kExitOk;
}

int cmd_ds_anatomy(const RunConfig& rc, long x, const std::string& t_str,
                   const std::string& c_str) {
  Rational t = parse_rational(t_str), c = parse_rational(c_str);
  AnatomyReport rep = anatomy_count(x, t, c);
  std::ostringstream os;
  os << csv_header(rc);
  os << "x,t,c,count,bound_diagnostic\n";
  char buf[64];
  snprintf(buf, sizeof buf, "%.17g", rep.bound_diagnostic);
  os << x << "," << rational_to_string(t) << "," << rational_to_string(c) << "," << rep.count
     << "," << buf << "\n";
  write_text(rc.out_dir + "/anatomy.csv", os.str());
  std::cout << rep.count << "\n";
  return kExitOk;
}

int cmd_ds_counterexample(const RunConfig& rc, long n, long scale) {
  Counterexample ce = model_counterexample(n, scale);
  nlohmann::json j = ce.diag.to_json();
  j["profile"] = rc.profile;
  j["seed"] = rc.seed;
  write_text(rc.out_dir + "/counterexample.json", j.dump(2) + "\n");
  std::cout << "size=" << ce.diag.size
            << " pairwise_ok=" << (ce.diag.all_pairwise_gcds_ok ? 1 : 0)
            << " max_divisor_fraction=" << rational_to_string(ce.diag.max_divisor_fraction)
            << "\n";
  return ce.diag.all_pairwise_gcds_ok ? kExitOk : kExitInvalid;
}

int cmd_ds_catlin(const RunConfig& rc, const std::string& psi_spec, long q, long cap) {
  PsiFunction psi = parse_psi(psi_spec);
  CatlinValue v = catlin_star(psi, q, cap);
  std::ostringstream os;
  os << csv_header(rc, "psi=" + psi_spec);
  os << "q,value,exact\n";
  os << q << "," << rational_to_string(v.value) << "," << (v.exact ? 1 : 0) << "\n";
  write_text(rc.out_dir + "/catlin.csv", os.str());
  std::cout << rational_to_string(v.value) << (v.exact ? "" : " (truncated lower bound)")
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified gcd-graph compression and approximation scans"};
  app.require_subcommand(1);
  app.fallthrough();
  RunConfig rc;
  app.add_option("--profile", rc.profile, "constants profile: paper | scaled | json path");
  app.add_option("--precision", rc.precision, "interval precision bits (>= 32)");
  app.add_option("--ceiling", rc.ceiling, "precision ceiling for refinement");
  app.add_option("--seed", rc.seed, "seed recorded in outputs");
  app.add_option("--out", rc.out_dir, "output directory");

  auto* graph = app.add_subcommand("graph", "graph inspection");
  graph->fallthrough();
  std::string graph_path;
  auto* gvalidate = graph->add_subcommand("validate", "check the graph conditions");
  gvalidate->fallthrough();
  gvalidate->add_option("path", graph_path)->required();
  auto* gquality = graph->add_subcommand("quality", "print the certified quality");
  gquality->fallthrough();
  gquality->add_option("path", graph_path)->required();

  auto* pipeline = app.add_subcommand("pipeline", "compression pipeline");
  pipeline->fallthrough();
  std::string prun_path, prun_t;
  auto* prun = pipeline->add_subcommand("run", "run the full pipeline, emit a trace");
  prun->fallthrough();
  prun->add_option("path", prun_path)->required();
  prun->add_option("t", prun_t)->required();

  auto* tracecmd = app.add_subcommand("trace", "trace re-verification");
  tracecmd->fallthrough();
  std::string trace_path;
  auto* tverify = tracecmd->add_subcommand("verify", "re-check a serialized trace");
  tverify->fallthrough();
  tverify->add_option("path", trace_path)->required();

  auto* ds = app.add_subcommand("ds", "approximation-side scans");
  ds->fallthrough();
  std::string psi_spec = "const:1/2";
  long qmin = 2, qmax = 50, x = 2, n = 8, scale = 480, cap = 100000, catlin_q = 6;
  std::string t_grid = "1", t_str = "1", c_str = "1", threshold_str = "10";
  auto* dmeasure = ds->add_subcommand("measure", "interval-union measures of the fraction sets");
  dmeasure->fallthrough();
  dmeasure->add_option("--psi", psi_spec);
  dmeasure->add_option("--qmin", qmin);
  dmeasure->add_option("--qmax", qmax);
  auto* doverlap = ds->add_subcommand("overlap", "pairwise overlap scan");
  doverlap->fallthrough();
  doverlap->add_option("--psi", psi_spec);
  doverlap->add_option("--max", qmax);
  auto* dsecond = ds->add_subcommand("second-moment", "edge-set weighted second moment");
  dsecond->fallthrough();
  dsecond->add_option("--psi", psi_spec);
  dsecond->add_option("--x", x);
  dsecond->add_option("--tgrid", t_grid);
  dsecond->add_option("--threshold", threshold_str);
  auto* danatomy = ds->add_subcommand("anatomy", "count integers rich in large prime factors");
  danatomy->fallthrough();
  danatomy->add_option("--x", x);
  danatomy->add_option("--t", t_str);
  danatomy->add_option("--c", c_str);
  auto* dcounter = ds->add_subcommand("counterexample", "structured large-gcd set");
  dcounter->fallthrough();
  dcounter->add_option("--n", n);
  dcounter->add_option("--scale", scale);
  auto* dcatlin = ds->add_subcommand("catlin", "reduced-denominator transform");
  dcatlin->fallthrough();
  dcatlin->add_option("--psi", psi_spec);
  dcatlin->add_option("--q", catlin_q);
  dcatlin->add_option("--cap", cap);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gvalidate->parsed()) return cmd_graph_validate(graph_path);
    if (gquality->parsed()) return cmd_graph_quality(graph_path, rc);
    if (prun->parsed()) return cmd_pipeline_run(prun_path, prun_t, rc);
    if (tverify->parsed()) return cmd_trace_verify(trace_path);
    if (dmeasure->parsed()) return cmd_ds_measure(rc, psi_spec, qmin, qmax);
    if (doverlap->parsed()) return cmd_ds_overlap(rc, psi_spec, qmax);
    if (dsecond->parsed()) return cmd_ds_second_moment(rc, psi_spec, x, t_grid, threshold_str);
    if (danatomy->parsed()) return cmd_ds_anatomy(rc, x, t_str, c_str);
    if (dcounter->parsed()) return cmd_ds_counterexample(rc, n, scale);
    if (dcatlin->parsed()) return cmd_ds_catlin(rc, psi_spec, catlin_q, cap);
  } catch (const PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const IndeterminateError& e) {
    std::cerr << "indeterminate: " << e.what() << "\n";
    return kExitIndeterminate;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  std::cerr << "no subcommand\n";
  return kExitParse;
}
