#pragma once

#include <span>

#include "otonav/sim/types.hpp"

namespace otonav::sim {

// Rotation angle of the robot-centric frame: the direction of (goal - position),
// or 0 when the robot sits exactly on its goal.
double frame_angle(const AgentState& robot);

RobotFrameState to_robot_frame(std::span<const AgentState> pedestrians, const AgentState& robot);

}  // namespace otonav::sim
