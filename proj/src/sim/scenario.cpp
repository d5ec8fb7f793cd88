#include "otonav/sim/scenario.hpp"

#include <numbers>

#include "otonav/random.hpp"

namespace otonav::sim {
namespace {

constexpr int kMaxRejections = 200;

bool clear_of(const Vec2& p, const std::vector<Vec2>& others, double min_dist) {
  for (const auto& o : others)
    if (abs_sq(p - o) <= min_dist * min_dist) return false;
  return true;
}

}  // namespace

Scenario sample_scenario(std::uint64_t seed, const SimConfig& cfg) {
  Scenario s;
  s.seed = seed;
  s.arena_radius = cfg.circle_radius;
  s.robot_start = {0.0, -cfg.circle_radius};
  s.robot_goal = {0.0, cfg.circle_radius};

  Rng rng(derive_seed(seed, 1));
  const double noise = cfg.perturbation;
  auto jitter = [&]() -> Vec2 {
    if (noise == 0.0) return {};
    const double dx = uniform(rng, -noise, noise);
    const double dy = uniform(rng, -noise, noise);
    return {dx, dy};
  };

  const double ped_gap = 2.0 * cfg.ped_radius;
  const double robot_gap = cfg.ped_radius + cfg.robot_radius;
  const std::size_t n = cfg.num_peds;
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    const Vec2 base{cfg.circle_radius * std::cos(angle), cfg.circle_radius * std::sin(angle)};

    // Overlapping draws are resampled so that no episode starts in collision.
    Vec2 start = base + jitter();
    for (int k = 0; k < kMaxRejections && noise > 0.0; ++k) {
      if (clear_of(start, s.ped_starts, ped_gap) && clear_of(start, {s.robot_start}, robot_gap)) break;
      start = base + jitter();
    }
    Vec2 goal = -base + jitter();
    for (int k = 0; k < kMaxRejections && noise > 0.0; ++k) {
      if (clear_of(goal, s.ped_goals, ped_gap)) break;
      goal = -base + jitter();
    }
    s.ped_starts.push_back(start);
    s.ped_goals.push_back(goal);
  }
  return s;
}

}  // namespace otonav::sim
