#include "otonav/sim/environment.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "otonav/sim/reward.hpp"
#include "otonav/sim/robot_frame.hpp"
#include "otonav/sim/scenario.hpp"

namespace otonav::sim {
namespace {

constexpr double kActionSlack = 1e-9;
constexpr int kMaxRegoalDraws = 1000;

void update_heading(AgentState& a) {
  if (a.velocity.x != 0.0 || a.velocity.y != 0.0) a.heading = std::atan2(a.velocity.y, a.velocity.x);
}

}  // namespace

CrowdEnv::CrowdEnv(SimConfig cfg, std::shared_ptr<const PedestrianController> peds)
    : cfg_(std::move(cfg)), ped_controller_(std::move(peds)) {
  cfg_.validate();
  if (!ped_controller_) throw std::invalid_argument("CrowdEnv: pedestrian controller is null");
}

RobotFrameState CrowdEnv::reset(std::uint64_t seed) { return reset(sample_scenario(seed, cfg_)); }

RobotFrameState CrowdEnv::reset(const Scenario& scenario) {
  scenario_ = scenario;
  robot_ = AgentState{scenario.robot_start, {}, cfg_.robot_radius, scenario.robot_goal, cfg_.v_pref, 0.0};
  peds_.clear();
  for (std::size_t i = 0; i < scenario.ped_starts.size(); ++i)
    peds_.push_back(AgentState{scenario.ped_starts[i], {}, cfg_.ped_radius, scenario.ped_goals[i], cfg_.v_pref, 0.0});
  rng_.seed(derive_seed(scenario.seed, 2));
  steps_ = 0;
  terminal_ = Terminal::running;
  min_ped_separation_ = std::numeric_limits<double>::infinity();
  track_ped_separation();
  return observe();
}

RobotFrameState CrowdEnv::observe() const { return to_robot_frame(peds_, robot_); }

double CrowdEnv::robot_clearance() const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : peds_) d = std::min(d, norm(robot_.position - p.position) - p.radius - robot_.radius);
  return d;
}

StepOutcome CrowdEnv::step(const Action& action) {
  if (done()) throw std::logic_error("CrowdEnv::step called on a terminated episode");
  if (!std::isfinite(action.x) || !std::isfinite(action.y) || norm(action) > cfg_.v_max + kActionSlack)
    throw BoundsError("action norm exceeds v_max");

  const std::vector<Vec2> ped_v =
      ped_controller_->velocities(peds_, cfg_.robot_visible ? &robot_ : nullptr, cfg_.time_step);
  if (ped_v.size() != peds_.size()) throw std::logic_error("pedestrian controller returned wrong count");

  robot_.velocity = action;
  robot_.position += action * cfg_.time_step;
  update_heading(robot_);
  for (std::size_t i = 0; i < peds_.size(); ++i) {
    peds_[i].velocity = ped_v[i];
    peds_[i].position += ped_v[i] * cfg_.time_step;
    update_heading(peds_[i]);
  }
  ++steps_;
  track_ped_separation();

  StepOutcome out;
  out.d_min = robot_clearance();
  out.d_goal = norm(robot_.goal - robot_.position);
  out.reward = reward(out.d_min, out.d_goal, robot_.radius);
  if (out.d_min <= 0.0)
    terminal_ = Terminal::collision;
  else if (out.d_goal <= robot_.radius)
    terminal_ = Terminal::goal;
  else if (steps_ >= cfg_.max_steps())
    terminal_ = Terminal::timeout;
  out.terminal = terminal_;

  regoal_pedestrians();
  out.next = observe();
  return out;
}

void CrowdEnv::regoal_pedestrians() {
  for (auto& p : peds_) {
    if (norm(p.goal - p.position) > p.radius) continue;
    Vec2 goal;
    for (int k = 0; k < kMaxRegoalDraws; ++k) {
      const double angle = uniform(rng_, 0.0, 2.0 * std::numbers::pi);
      goal = {cfg_.circle_radius * std::cos(angle), cfg_.circle_radius * std::sin(angle)};
      if (norm(goal - p.position) >= cfg_.regoal_min_dist) break;
    }
    p.goal = goal;
  }
}

void CrowdEnv::track_ped_separation() {
  for (std::size_t i = 0; i < peds_.size(); ++i)
    for (std::size_t j = i + 1; j < peds_.size(); ++j)
      min_ped_separation_ = std::min(
          min_ped_separation_, norm(peds_[i].position - peds_[j].position) - peds_[i].radius - peds_[j].radius);
}

}  // namespace otonav::sim
