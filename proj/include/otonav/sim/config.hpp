#pragma once

#include <cstddef>
#include <cstdint>

#include "json.hpp"

namespace otonav::sim {

struct OrcaParams {
  double time_horizon = 5.0;
  double neighbor_dist = 10.0;
  double safety_space = 0.0;
};

struct SimConfig {
  std::size_t num_peds = 5;
  double time_step = 0.25;
  double v_max = 1.0;
  double robot_radius = 0.3;
  double ped_radius = 0.3;
  double v_pref = 1.0;
  double time_limit = 25.0;
  bool robot_visible = false;
  double perturbation = 0.5;
  double circle_radius = 4.0;
  double regoal_min_dist = 2.0;
  std::uint64_t seed = 0;
  OrcaParams ped_orca{};
  OrcaParams robot_orca{10.0, 10.0, 0.02};

  // Number of steps after which an episode times out.
  std::size_t max_steps() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const OrcaParams& c);
void from_json(const nlohmann::json& j, OrcaParams& c);
void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

}  // namespace otonav::sim
