#ifndef GCDQ_CERTIFICATE_HPP
#define GCDQ_CERTIFICATE_HPP

#include "gcdq/graph.hpp"
#include "gcdq/interval.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <string>
#include <vector>

namespace gcdq {

// One inequality of a lemma application, stored with the enclosures that
// settled it so that it can be re-checked from serialized data alone.
struct CertIneq {
  std::string name;
  RationalInterval lhs;
  std::string rel;  // "GE" | "GT" | "LE" | "LT"
  RationalInterval rhs;
  bool certified = false;
  unsigned bits = 0;  // precision at which the comparison resolved

  bool holds() const;
  nlohmann::json to_json() const;
  static CertIneq from_json(const nlohmann::json& j);
};

// Machine-checkable record of one lemma application.
struct StepCertificate {
  std::string lemma_id;
  std::string stage;   // pipeline stage label, empty outside the pipeline
  std::string branch;  // e.g. "INCREMENT", "CONCENTRATED"
  std::string input_digest, output_digest;
  std::map<std::string, std::string> params;
  std::vector<CertIneq> inequalities;

  bool all_certified() const;
  nlohmann::json to_json() const;
  static StepCertificate from_json(const nlohmann::json& j);
};

struct PipelineTrace {
  std::string profile_name;
  unsigned precision_bits = 0;
  Rational t;
  std::string input_digest;
  std::vector<StepCertificate> steps;
  nlohmann::json final_graph_json() const;
  GcdGraph final_graph;
  std::string case_tag;  // "case-i" | "case-ii"

  nlohmann::json to_json() const;  // includes a content checksum
  static PipelineTrace from_json(const nlohmann::json& j);
};

struct TraceVerifyResult {
  bool ok = false;
  bool indeterminate = false;
  std::string message;
};

// Re-checks a serialized trace: content checksum, digest chaining per stage,
// every inequality row, and the final graph's digest/residual-prime claim.
TraceVerifyResult verify_trace_json(const nlohmann::json& j);

}  // namespace gcdq

#endif
