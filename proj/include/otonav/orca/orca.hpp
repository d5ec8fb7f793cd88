#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "otonav/sim/config.hpp"
#include "otonav/sim/environment.hpp"
#include "otonav/sim/types.hpp"

namespace otonav::orca {

using sim::AgentState;
using sim::Vec2;

// Permitted velocities v satisfy dot(v - point, normal) >= 0.
struct HalfPlane {
  Vec2 point;
  Vec2 normal;
};

struct OrcaConfig {
  double time_horizon = 5.0;
  double neighbor_dist = 10.0;
  double safety_space = 0.0;
  double max_speed = 1.0;
};

// Preferred-velocity rotation applied whenever neighbors are present, so that
// perfectly symmetric encounters resolve to the same side.
inline constexpr double kSymmetryBreak = 1e-3;

// One reciprocal half-plane per neighbor inside cfg.neighbor_dist, ordered by
// distance. `time_step` defines the cone used for already-overlapping pairs.
std::vector<HalfPlane> orca_halfplanes(const AgentState& self, std::span<const AgentState> neighbors,
                                       const OrcaConfig& cfg, double time_step);

// Velocity closest to `preferred` inside every half-plane and the speed disc.
// When the constraints are jointly infeasible the velocity minimizing the
// largest violation is returned instead.
Vec2 solve_velocity(std::span<const HalfPlane> halfplanes, const Vec2& preferred, double max_speed);

Vec2 orca_action(std::size_t agent_index, std::span<const AgentState> world, const OrcaConfig& cfg,
                 double time_step);

OrcaConfig make_config(const sim::OrcaParams& params, double max_speed);

// Pedestrian model: every pedestrian runs ORCA against the other pedestrians
// and, when visible, the robot.
class OrcaPedestrians final : public sim::PedestrianController {
 public:
  explicit OrcaPedestrians(OrcaConfig cfg) : cfg_(cfg) {}
  std::vector<Vec2> velocities(std::span<const AgentState> peds, const AgentState* robot,
                               double time_step) const override;

 private:
  OrcaConfig cfg_;
};

std::shared_ptr<const sim::PedestrianController> make_pedestrians(const sim::SimConfig& cfg);

// Behavior policy / reactive baseline: the robot runs ORCA, inflating its own
// radius by the configured safety space.
sim::Action robot_action(const sim::CrowdEnv& env);

}  // namespace otonav::orca
