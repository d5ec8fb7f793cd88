#include "otonav/dataset/trajectory.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "otonav/sim/robot_frame.hpp"

namespace otonav::dataset {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::success: return "success";
    case Outcome::collision: return "collision";
    case Outcome::timeout: return "timeout";
  }
  return "timeout";
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "success") return Outcome::success;
  if (s == "collision") return Outcome::collision;
  if (s == "timeout") return Outcome::timeout;
  throw std::invalid_argument("unknown outcome '" + std::string(s) + "'");
}

Outcome outcome_from_terminal(sim::Terminal t) {
  switch (t) {
    case sim::Terminal::goal: return Outcome::success;
    case sim::Terminal::collision: return Outcome::collision;
    case sim::Terminal::timeout: return Outcome::timeout;
    case sim::Terminal::running: break;
  }
  throw std::logic_error("episode has not terminated");
}

StepWindow make_window(const Trajectory& t, std::size_t begin, std::size_t end) {
  if (begin >= end || end > t.size()) throw std::out_of_range("make_window: bad range");
  return StepWindow{t.states, t.actions, t.rewards, t.state_dim, begin, end};
}

std::vector<StepWindow> tile_windows(const Trajectory& t, std::size_t k) {
  if (k == 0) throw std::invalid_argument("tile_windows: zero window");
  std::vector<StepWindow> out;
  for (std::size_t b = 0; b < t.size(); b += k) out.push_back(make_window(t, b, std::min(b + k, t.size())));
  return out;
}

std::vector<double> compute_rtg(std::span<const double> rewards, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("compute_rtg: gamma must lie in (0, 1]");
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = (i + 1 == rewards.size()) ? rewards[i] : rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

Trajectory record_episode(sim::CrowdEnv& env, std::uint64_t seed, const Controller& controller, double gamma,
                          EpisodeFrames* frames) {
  Trajectory traj;
  traj.seed = seed;
  sim::RobotFrameState obs = env.reset(seed);
  traj.state_dim = sim::joint_width(env.pedestrians().size());

  auto capture = [&] {
    if (!frames) return;
    frames->robot.push_back(env.robot().position);
    std::vector<sim::Vec2> p;
    for (const auto& a : env.pedestrians()) p.push_back(a.position);
    frames->peds.push_back(std::move(p));
  };
  if (frames) {
    *frames = EpisodeFrames{};
    frames->seed = seed;
    frames->time_step = env.config().time_step;
    frames->robot_goal = env.robot().goal;
  }
  capture();

  while (!env.done()) {
    const sim::Action a = controller(env, obs, traj);
    const auto joint = obs.joint();
    const double angle = sim::frame_angle(env.robot());
    const sim::StepOutcome out = env.step(a);
    traj.states.insert(traj.states.end(), joint.begin(), joint.end());
    traj.actions.push_back(sim::rotate(a, -angle));
    traj.rewards.push_back(out.reward);
    obs = out.next;
    capture();
  }
  traj.outcome = outcome_from_terminal(env.terminal());
  traj.duration = env.elapsed();
  traj.rtg = compute_rtg(traj.rewards, gamma);
  if (frames) frames->outcome = traj.outcome;
  return traj;
}

}  // namespace otonav::dataset
