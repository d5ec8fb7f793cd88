#include "otonav/sim/robot_frame.hpp"

#include <cmath>

namespace otonav::sim {

double frame_angle(const AgentState& robot) {
  const Vec2 to_goal = robot.goal - robot.position;
  if (to_goal.x == 0.0 && to_goal.y == 0.0) return 0.0;
  return std::atan2(to_goal.y, to_goal.x);
}

RobotFrameState to_robot_frame(std::span<const AgentState> pedestrians, const AgentState& robot) {
  const double rot = frame_angle(robot);
  const double c = std::cos(rot);
  const double s = std::sin(rot);
  // Rotation by -rot.
  auto local = [c, s](const Vec2& v) { return Vec2{c * v.x + s * v.y, -s * v.x + c * v.y}; };

  RobotFrameState out;
  const Vec2 v = local(robot.velocity);
  const double rel_heading = std::atan2(std::sin(robot.heading - rot), std::cos(robot.heading - rot));
  out.robot = {norm(robot.goal - robot.position), v.x, v.y, robot.v_pref, robot.radius, rel_heading};

  out.pedestrians.reserve(pedestrians.size());
  for (const auto& ped : pedestrians) {
    const Vec2 p = local(ped.position - robot.position);
    const Vec2 pv = local(ped.velocity);
    out.pedestrians.push_back(
        {p.x, p.y, pv.x, pv.y, ped.radius, norm(robot.position - ped.position), ped.radius + robot.radius});
  }
  return out;
}

}  // namespace otonav::sim
