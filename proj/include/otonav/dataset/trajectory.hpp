#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "otonav/sim/environment.hpp"
#include "otonav/sim/types.hpp"

namespace otonav::dataset {

enum class Outcome { success, collision, timeout };

std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);
Outcome outcome_from_terminal(sim::Terminal t);

// One recorded episode. states[t] is the joint robot-frame observation before
// actions[t]; rewards[t] is the reward of that transition and rtg[t] its
// return-to-go label. actions[t] is the executed velocity expressed in the
// same robot-centric frame as states[t].
struct Trajectory {
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::timeout;
  double duration = 0.0;
  std::size_t state_dim = 0;
  std::vector<double> states;  // row-major, size() x state_dim
  std::vector<sim::Action> actions;
  std::vector<double> rewards;
  std::vector<double> rtg;

  std::size_t size() const { return rewards.size(); }
  std::span<const double> state(std::size_t t) const { return {states.data() + t * state_dim, state_dim}; }
  double episode_return() const { return rtg.empty() ? 0.0 : rtg.front(); }

  bool operator==(const Trajectory&) const = default;
};

// Steps [begin, end) of an episode. The arrays start at episode step 0, so
// entries before `begin` (the previous action and reward) stay reachable.
struct StepWindow {
  std::span<const double> states;
  std::span<const sim::Action> actions;
  std::span<const double> rewards;
  std::size_t state_dim = 0;
  std::size_t begin = 0, end = 0;

  std::size_t size() const { return end - begin; }
  const double* state(std::size_t t) const { return states.data() + t * state_dim; }
};

StepWindow make_window(const Trajectory& t, std::size_t begin, std::size_t end);

// Consecutive windows [0,k), [k,2k), ... covering the trajectory.
std::vector<StepWindow> tile_windows(const Trajectory& t, std::size_t k);

// Reverse scan: G_last = r_last, G_t = r_t + gamma * G_{t+1}.
std::vector<double> compute_rtg(std::span<const double> rewards, double gamma);

// World-frame positions per frame (initial state plus one frame per step).
struct EpisodeFrames {
  std::uint64_t seed = 0;
  double time_step = 0.0;
  sim::Vec2 robot_goal;
  std::vector<sim::Vec2> robot;
  std::vector<std::vector<sim::Vec2>> peds;
  dataset::Outcome outcome = dataset::Outcome::timeout;
};

// Receives the episode recorded so far (states, actions, rewards of the
// completed steps) along with the current observation. Returns a world-frame
// velocity.
using Controller =
    std::function<sim::Action(const sim::CrowdEnv&, const sim::RobotFrameState&, const Trajectory& so_far)>;

// Runs one episode from `seed` to termination and labels it.
Trajectory record_episode(sim::CrowdEnv& env, std::uint64_t seed, const Controller& controller, double gamma,
                          EpisodeFrames* frames = nullptr);

}  // namespace otonav::dataset
