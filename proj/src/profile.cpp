#include "gcdq/profile.hpp"

#include <nlohmann/json.hpp>

namespace gcdq {

ConstantsProfile ConstantsProfile::paper() {
  ConstantsProfile p;
  p.name = "paper";
  p.sharp_threshold = pow10z(40);
  p.small_prime_bound = pow10z(2000);
  p.density_exponent = 10;
  p.trans_exponent = Rational(31, 30);
  p.pigeon_exponent = Rational(9, 10);
  p.decay = Rational(1, 20);
  p.edge_sets_denominator = 1000;
  p.degree_fraction = Rational(9, 10);
  p.concentration_fraction = Rational(9, 10);
  p.cosmetic_min_t = Rational(300);
  p.t_power = 50;
  p.anatomy_threshold = Rational(10);
  p.trim_excess_cap = Rational(1);
  p.trim_retained_threshold = Rational(5);
  p.final_edge_threshold = Rational(4);
  p.small_loss_floor = Rational(1, pow10z(40));
  p.iteration_floor = Rational(1, pow10z(50));
  p.stage_floor_exp10 = powz(BigInt(10), 3000);
  return p;
}

ConstantsProfile ConstantsProfile::scaled() {
  ConstantsProfile p = paper();
  p.name = "scaled";
  p.sharp_threshold = 100;
  p.small_prime_bound = 1000;
  // Desk vertices carry only a handful of primes above the small-prime
  // bound, so the per-edge anatomy mass is a few reciprocals of ~10^3.
  p.anatomy_threshold = Rational(1, 1300);
  p.trim_retained_threshold = Rational(1, 2600);
  p.final_edge_threshold = Rational(1, 5200);
  p.stage_floor_exp10 = 20;
  return p;
}

ConstantsProfile ConstantsProfile::by_name(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "scaled") return scaled();
  throw PreconditionError("unknown profile '" + name + "'");
}

void ConstantsProfile::validate() const {
  if (sharp_threshold <= 0 || small_prime_bound <= 0)
    throw PreconditionError("profile: thresholds must be positive");
  if (density_exponent < 2)
    throw PreconditionError("profile: density exponent must be >= 2");
  if (trans_exponent <= 1)
    throw PreconditionError("profile: trans exponent must exceed 1");
  if (pigeon_exponent <= 0 || pigeon_exponent >= 1)
    throw PreconditionError("profile: pigeon exponent must lie in (0,1)");
  if (decay <= 0 || edge_sets_denominator == 0)
    throw PreconditionError("profile: decay parameters must be positive");
  if (degree_fraction <= 0 || degree_fraction >= 1)
    throw PreconditionError("profile: degree fraction must lie in (0,1)");
  if (concentration_fraction <= 0 || concentration_fraction >= 1)
    throw PreconditionError("profile: concentration fraction must lie in (0,1)");
  if (cosmetic_min_t <= 0 || t_power == 0)
    throw PreconditionError("profile: cosmetic thresholds must be positive");
  if (anatomy_threshold <= 0 || trim_excess_cap <= 0 || trim_retained_threshold <= 0 ||
      final_edge_threshold <= 0)
    throw PreconditionError("profile: anatomy thresholds must be positive");
  if (small_loss_floor <= 0 || iteration_floor <= 0)
    throw PreconditionError("profile: loss floors must be positive");
  if (stage_floor_exp10 <= 0)
    throw PreconditionError("profile: stage floor exponent must be positive");
}

nlohmann::json ConstantsProfile::to_json() const {
  return {{"name", name},
          {"sharp_threshold", sharp_threshold.get_str()},
          {"small_prime_bound", small_prime_bound.get_str()},
          {"density_exponent", density_exponent},
          {"trans_exponent", rational_to_string(trans_exponent)},
          {"pigeon_exponent", rational_to_string(pigeon_exponent)},
          {"decay", rational_to_string(decay)},
          {"edge_sets_denominator", edge_sets_denominator},
          {"degree_fraction", rational_to_string(degree_fraction)},
          {"concentration_fraction", rational_to_string(concentration_fraction)},
          {"cosmetic_min_t", rational_to_string(cosmetic_min_t)},
          {"t_power", t_power},
          {"anatomy_threshold", rational_to_string(anatomy_threshold)},
          {"trim_excess_cap", rational_to_string(trim_excess_cap)},
          {"trim_retained_threshold", rational_to_string(trim_retained_threshold)},
          {"final_edge_threshold", rational_to_string(final_edge_threshold)},
          {"small_loss_floor", rational_to_string(small_loss_floor)},
          {"iteration_floor", rational_to_string(iteration_floor)},
          {"stage_floor_exp10", stage_floor_exp10.get_str()}};
}

ConstantsProfile ConstantsProfile::from_json(const nlohmann::json& j) {
  ConstantsProfile p;
  p.name = j.at("name").get<std::string>();
  p.sharp_threshold = BigInt(j.at("sharp_threshold").get<std::string>());
  p.small_prime_bound = BigInt(j.at("small_prime_bound").get<std::string>());
  p.density_exponent = j.at("density_exponent").get<unsigned>();
  p.trans_exponent = parse_rational(j.at("trans_exponent").get<std::string>());
  p.pigeon_exponent = parse_rational(j.at("pigeon_exponent").get<std::string>());
  p.decay = parse_rational(j.at("decay").get<std::string>());
  p.edge_sets_denominator = j.at("edge_sets_denominator").get<unsigned>();
  p.degree_fraction = parse_rational(j.at("degree_fraction").get<std::string>());
  p.concentration_fraction = parse_rational(j.at("concentration_fraction").get<std::string>());
  p.cosmetic_min_t = parse_rational(j.at("cosmetic_min_t").get<std::string>());
  p.t_power = j.at("t_power").get<unsigned>();
  p.anatomy_threshold = parse_rational(j.at("anatomy_threshold").get<std::string>());
  p.trim_excess_cap = parse_rational(j.at("trim_excess_cap").get<std::string>());
  p.trim_retained_threshold =
      parse_rational(j.at("trim_retained_threshold").get<std::string>());
  p.final_edge_threshold = parse_rational(j.at("final_edge_threshold").get<std::string>());
  p.small_loss_floor = parse_rational(j.at("small_loss_floor").get<std::string>());
  p.iteration_floor = parse_rational(j.at("iteration_floor").get<std::string>());
  p.stage_floor_exp10 = BigInt(j.at("stage_floor_exp10").get<std::string>());
  p.validate();
  return p;
}

}  // namespace gcdq
