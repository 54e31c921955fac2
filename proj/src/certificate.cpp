#include "gcdq/certificate.hpp"

#include <nlohmann/json.hpp>

namespace gcdq {

bool CertIneq::holds() const {
  if (rel == "GE") return certainly_ge(lhs, rhs);
  if (rel == "GT") return certainly_gt(lhs, rhs);
  if (rel == "LE") return certainly_le(lhs, rhs);
  if (rel == "LT") return certainly_lt(lhs, rhs);
  return false;
}

nlohmann::json CertIneq::to_json() const {
  return {{"name", name},           {"lhs", lhs.to_json()}, {"rel", rel},
          {"rhs", rhs.to_json()},   {"certified", certified}, {"bits", bits}};
}

CertIneq CertIneq::from_json(const nlohmann::json& j) {
  CertIneq c;
  c.name = j.at("name").get<std::string>();
  c.lhs = RationalInterval::from_json(j.at("lhs"));
  c.rel = j.at("rel").get<std::string>();
  c.rhs = RationalInterval::from_json(j.at("rhs"));
  c.certified = j.at("certified").get<bool>();
  c.bits = j.at("bits").get<unsigned>();
  return c;
}

bool StepCertificate::all_certified() const {
  for (const auto& i : inequalities)
    if (!i.certified) return false;
  return true;
}

nlohmann::json StepCertificate::to_json() const {
  nlohmann::json ji = nlohmann::json::array();
  for (const auto& i : inequalities) ji.push_back(i.to_json());
  return {{"lemma_id", lemma_id},
          {"stage", stage},
          {"branch", branch},
          {"input_digest", input_digest},
          {"output_digest", output_digest},
          {"params", params},
          {"inequalities", ji}};
}

StepCertificate StepCertificate::from_json(const nlohmann::json& j) {
  StepCertificate s;
  s.lemma_id = j.at("lemma_id").get<std::string>();
  s.stage = j.at("stage").get<std::string>();
  s.branch = j.at("branch").get<std::string>();
  s.input_digest = j.at("input_digest").get<std::string>();
  s.output_digest = j.at("output_digest").get<std::string>();
  for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
    s.params[it.key()] = it.value().get<std::string>();
  for (const auto& ji : j.at("inequalities")) s.inequalities.push_back(CertIneq::from_json(ji));
  return s;
}

nlohmann::json PipelineTrace::final_graph_json() const { return final_graph.to_json(); }

nlohmann::json PipelineTrace::to_json() const {
  nlohmann::json js = nlohmann::json::array();
  for (const auto& s : steps) js.push_back(s.to_json());
  nlohmann::json body = {{"version", 1},
                         {"profile", profile_name},
                         {"precision_bits", precision_bits},
                         {"t", rational_to_string(t)},
                         {"input_digest", input_digest},
                         {"steps", js},
                         {"final_graph", final_graph.to_json()},
                         {"case_tag", case_tag}};
  body["checksum"] = fnv1a_digest(body.dump());
  return body;
}

PipelineTrace PipelineTrace::from_json(const nlohmann::json& j) {
  PipelineTrace t;
  t.profile_name = j.at("profile").get<std::string>();
  t.precision_bits = j.at("precision_bits").get<unsigned>();
  t.t = parse_rational(j.at("t").get<std::string>());
  t.input_digest = j.at("input_digest").get<std::string>();
  for (const auto& js : j.at("steps")) t.steps.push_back(StepCertificate::from_json(js));
  t.final_graph = GcdGraph::from_json(j.at("final_graph"));
  t.case_tag = j.at("case_tag").get<std::string>();
  return t;
}

TraceVerifyResult verify_trace_json(const nlohmann::json& j) {
  TraceVerifyResult r;
  nlohmann::json body = j;
  if (!body.contains("checksum")) {
    r.message = "missing checksum";
    return r;
  }
  std::string checksum = body.at("checksum").get<std::string>();
  body.erase("checksum");
  if (fnv1a_digest(body.dump()) != checksum) {
    r.message = "checksum mismatch: trace content was altered";
    return r;
  }
  PipelineTrace t;
  try {
    t = PipelineTrace::from_json(body);
  } catch (const std::exception& e) {
    r.message = std::string("malformed trace: ") + e.what();
    return r;
  }
  for (size_t s = 0; s < t.steps.size(); ++s) {
    const auto& step = t.steps[s];
    auto fe = step.params.find("floor_exp10");
    auto pe = step.params.find("proved_exp10");
    if ((fe == step.params.end()) != (pe == step.params.end())) {
      r.message = "step " + std::to_string(s) + " carries half of a floor-exponent pair";
      return r;
    }
    if (fe != step.params.end() && BigInt(pe->second) > BigInt(fe->second)) {
      r.message = "step " + std::to_string(s) + " proves a weaker floor than claimed";
      return r;
    }
    for (const auto& iq : step.inequalities) {
      if (!iq.certified) {
        r.indeterminate = true;
        r.message = "indeterminate inequality '" + iq.name + "' in step " + std::to_string(s) +
                    " (" + step.lemma_id + ")";
        return r;
      }
      if (!iq.holds()) {
        r.message = "inequality '" + iq.name + "' in step " + std::to_string(s) + " (" +
                    step.lemma_id + ") does not hold";
        return r;
      }
    }
  }
  if (!t.steps.empty()) {
    if (t.steps.front().input_digest != t.input_digest) {
      r.message = "first step is not anchored at the input graph";
      return r;
    }
    for (size_t s = 0; s + 1 < t.steps.size(); ++s) {
      if (t.steps[s].output_digest != t.steps[s + 1].input_digest) {
        r.message = "digest chain broken between steps " + std::to_string(s) + " and " +
                    std::to_string(s + 1);
        return r;
      }
    }
    if (t.steps.back().output_digest != t.final_graph.digest()) {
      r.message = "final graph does not match the last step's output digest";
      return r;
    }
  }
  if (!t.final_graph.r_set().empty()) {
    r.message = "final graph still has residual primes";
    return r;
  }
  r.ok = true;
  r.message = "ok";
  return r;
}

}  // namespace gcdq
