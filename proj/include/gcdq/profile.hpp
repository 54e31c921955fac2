#ifndef GCDQ_PROFILE_HPP
#define GCDQ_PROFILE_HPP

#include "gcdq/rational.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>

namespace gcdq {

// Every numeric threshold of the compression argument, swappable as a unit
// so that desk-scale runs and full-scale runs share one code path. The
// "paper" profile reproduces the published constants; "scaled" brings the
// prime thresholds down to desk size.
struct ConstantsProfile {
  std::string name;

  BigInt sharp_threshold;      // T in the 1 - T/p concentration bounds
  BigInt small_prime_bound;    // primes <= this are handled by the small-prime stage
  unsigned density_exponent;   // exponent of the edge density in the quality
  Rational trans_exponent;     // exponent a/b of the per-prime factor p^{-a/b}
  Rational pigeon_exponent;    // diagonal exponent in the edge-class bound
  Rational decay;              // off-diagonal decay rate 2^{-|k-l|*decay}
  unsigned edge_sets_denominator;  // off-diagonal denominator in the edge-class bound
  Rational degree_fraction;    // high-degree bound factor (of delta)
  Rational concentration_fraction;  // density floor in the small-prime dichotomy

  Rational cosmetic_min_t;     // least t accepted by the edge-trim step
  unsigned t_power;            // the t^50-style exponent
  Rational anatomy_threshold;  // L_t lower bound required of pipeline edges
  Rational trim_excess_cap;    // edges with residual-prime sum above this are dropped
  Rational trim_retained_threshold;  // certified floor for retained edges
  Rational final_edge_threshold;     // certified floor after dividing out fixed parts

  Rational small_loss_floor;   // quality-loss floor of one small-prime dichotomy
  Rational iteration_floor;    // quality-loss floor of one full small-prime iteration
  BigInt stage_floor_exp10;    // stage floor is 10^{-stage_floor_exp10}, kept symbolic

  static ConstantsProfile paper();
  static ConstantsProfile scaled();
  static ConstantsProfile by_name(const std::string& name);  // paper | scaled

  void validate() const;

  nlohmann::json to_json() const;
  static ConstantsProfile from_json(const nlohmann::json& j);
};

}  // namespace gcdq

#endif
