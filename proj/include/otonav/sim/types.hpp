#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "otonav/sim/vec2.hpp"

namespace otonav::sim {

struct AgentState {
  Vec2 position;
  Vec2 velocity;
  double radius = 0.3;
  Vec2 goal;
  double v_pref = 1.0;
  double heading = 0.0;
};

using Action = Vec2;

inline constexpr std::size_t kRobotFeatures = 6;
inline constexpr std::size_t kPedFeatures = 7;

constexpr std::size_t joint_width(std::size_t num_peds) {
  return kRobotFeatures + kPedFeatures * num_peds;
}

// Robot-centric observation: goal along +x, robot at the origin.
struct RobotFrameState {
  // [d_g, v_x, v_y, v_pref, radius, heading]
  std::array<double, kRobotFeatures> robot{};
  // [p_x, p_y, v_x, v_y, radius, distance, radius + robot radius]
  std::vector<std::array<double, kPedFeatures>> pedestrians;

  std::vector<double> joint() const;
  bool operator==(const RobotFrameState&) const = default;
};

enum class Terminal { running, goal, collision, timeout };

std::string_view to_string(Terminal t);

struct StepOutcome {
  RobotFrameState next;
  double reward = 0.0;
  Terminal terminal = Terminal::running;
  double d_min = 0.0;
  double d_goal = 0.0;
};

struct Scenario {
  Vec2 robot_start;
  Vec2 robot_goal;
  std::vector<Vec2> ped_starts;
  std::vector<Vec2> ped_goals;
  std::uint64_t seed = 0;
  double arena_radius = 4.0;

  bool operator==(const Scenario&) const = default;
};

class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace otonav::sim
