#include "otonav/sim/types.hpp"

namespace otonav::sim {

std::vector<double> RobotFrameState::joint() const {
  std::vector<double> out;
  out.reserve(joint_width(pedestrians.size()));
  out.insert(out.end(), robot.begin(), robot.end());
  for (const auto& p : pedestrians) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::string_view to_string(Terminal t) {
  switch (t) {
    case Terminal::running: return "running";
    case Terminal::goal: return "goal";
    case Terminal::collision: return "collision";
    case Terminal::timeout: return "timeout";
  }
  return "unknown";
}

}  // namespace otonav::sim
