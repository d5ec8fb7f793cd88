#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "otonav/random.hpp"
#include "otonav/sim/config.hpp"
#include "otonav/sim/types.hpp"

namespace otonav::sim {

// Chooses pedestrian velocities from a world snapshot. `robot` is null when
// the robot is invisible to pedestrians.
class PedestrianController {
 public:
  virtual ~PedestrianController() = default;
  virtual std::vector<Vec2> velocities(std::span<const AgentState> peds, const AgentState* robot,
                                       double time_step) const = 0;
};

// Pedestrians that stand still; useful for deterministic kinematics tests.
class StaticPedestrians final : public PedestrianController {
 public:
  std::vector<Vec2> velocities(std::span<const AgentState> peds, const AgentState*, double) const override {
    return std::vector<Vec2>(peds.size());
  }
};

class CrowdEnv {
 public:
  CrowdEnv(SimConfig cfg, std::shared_ptr<const PedestrianController> peds);

  RobotFrameState reset(std::uint64_t seed);
  RobotFrameState reset(const Scenario& scenario);

  // Advances every agent by one time step. Throws BoundsError if the action
  // exceeds v_max and std::logic_error once the episode has terminated.
  StepOutcome step(const Action& action);

  RobotFrameState observe() const;

  const AgentState& robot() const { return robot_; }
  const std::vector<AgentState>& pedestrians() const { return peds_; }
  const SimConfig& config() const { return cfg_; }
  const Scenario& scenario() const { return scenario_; }

  std::size_t steps() const { return steps_; }
  double elapsed() const { return static_cast<double>(steps_) * cfg_.time_step; }
  bool done() const { return terminal_ != Terminal::running; }
  Terminal terminal() const { return terminal_; }

  // Smallest pedestrian-pedestrian surface distance seen this episode.
  double min_ped_separation() const { return min_ped_separation_; }

  // Surface distance from the robot to the nearest pedestrian; +inf with none.
  double robot_clearance() const;

 private:
  void regoal_pedestrians();
  void track_ped_separation();

  SimConfig cfg_;
  std::shared_ptr<const PedestrianController> ped_controller_;
  Scenario scenario_;
  AgentState robot_;
  std::vector<AgentState> peds_;
  Rng rng_;
  std::size_t steps_ = 0;
  Terminal terminal_ = Terminal::running;
  double min_ped_separation_ = 0.0;
};

}  // namespace otonav::sim
