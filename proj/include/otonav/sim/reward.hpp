#pragma once

namespace otonav::sim {

inline constexpr double kCollisionReward = -0.25;
inline constexpr double kDiscomfortDist = 0.2;
inline constexpr double kGoalReward = 2.0;

// Branches are evaluated in order: collision, discomfort, goal, otherwise.
constexpr double reward(double d_min, double d_goal, double robot_radius) {
  if (d_min <= 0.0) return kCollisionReward;
  if (d_min < kDiscomfortDist) return d_min - kDiscomfortDist;
  if (d_goal <= robot_radius) return kGoalReward;
  return 0.0;
}

}  // namespace otonav::sim
