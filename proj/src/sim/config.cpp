#include "otonav/sim/config.hpp"

#include <cmath>

#include "otonav/json_util.hpp"

namespace otonav::sim {

std::size_t SimConfig::max_steps() const {
  return static_cast<std::size_t>(std::ceil(time_limit / time_step - 1e-9));
}

void SimConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("sim.") + name + " must be positive");
  };
  positive(time_step, "time_step");
  positive(v_max, "v_max");
  positive(robot_radius, "robot_radius");
  positive(ped_radius, "ped_radius");
  positive(v_pref, "v_pref");
  positive(time_limit, "time_limit");
  positive(circle_radius, "circle_radius");
  if (perturbation < 0.0) throw ConfigError("sim.perturbation must be >= 0");
  for (const auto* o : {&ped_orca, &robot_orca}) {
    if (!(o->time_horizon > 0.0)) throw ConfigError("orca.time_horizon must be positive");
    if (o->safety_space < 0.0) throw ConfigError("orca.safety_space must be >= 0");
    if (!(o->neighbor_dist > 0.0)) throw ConfigError("orca.neighbor_dist must be positive");
  }
}

void to_json(nlohmann::json& j, const OrcaParams& c) {
  j = {{"time_horizon", c.time_horizon}, {"neighbor_dist", c.neighbor_dist}, {"safety_space", c.safety_space}};
}

void from_json(const nlohmann::json& j, OrcaParams& c) {
  require_keys(j, "orca", {"time_horizon", "neighbor_dist", "safety_space"});
  read_optional(j, "orca", "time_horizon", c.time_horizon);
  read_optional(j, "orca", "neighbor_dist", c.neighbor_dist);
  read_optional(j, "orca", "safety_space", c.safety_space);
}

void to_json(nlohmann::json& j, const SimConfig& c) {
  j = {{"num_peds", c.num_peds},
       {"time_step", c.time_step},
       {"v_max", c.v_max},
       {"robot_radius", c.robot_radius},
       {"ped_radius", c.ped_radius},
       {"v_pref", c.v_pref},
       {"time_limit", c.time_limit},
       {"robot_visible", c.robot_visible},
       {"perturbation", c.perturbation},
       {"circle_radius", c.circle_radius},
       {"regoal_min_dist", c.regoal_min_dist},
       {"seed", c.seed},
       {"ped_orca", c.ped_orca},
       {"robot_orca", c.robot_orca}};
}

void from_json(const nlohmann::json& j, SimConfig& c) {
  require_keys(j, "sim",
               {"num_peds", "time_step", "v_max", "robot_radius", "ped_radius", "v_pref", "time_limit",
                "robot_visible", "perturbation", "circle_radius", "regoal_min_dist", "seed", "ped_orca",
                "robot_orca"});
  read_optional(j, "sim", "num_peds", c.num_peds);
  read_optional(j, "sim", "time_step", c.time_step);
  read_optional(j, "sim", "v_max", c.v_max);
  read_optional(j, "sim", "robot_radius", c.robot_radius);
  read_optional(j, "sim", "ped_radius", c.ped_radius);
  read_optional(j, "sim", "v_pref", c.v_pref);
  read_optional(j, "sim", "time_limit", c.time_limit);
  read_optional(j, "sim", "robot_visible", c.robot_visible);
  read_optional(j, "sim", "perturbation", c.perturbation);
  read_optional(j, "sim", "circle_radius", c.circle_radius);
  read_optional(j, "sim", "regoal_min_dist", c.regoal_min_dist);
  read_optional(j, "sim", "seed", c.seed);
  if (j.contains("ped_orca")) c.ped_orca = j.at("ped_orca").get<OrcaParams>();
  if (j.contains("robot_orca")) c.robot_orca = j.at("robot_orca").get<OrcaParams>();
  c.validate();
}

}  // namespace otonav::sim
