#include <cmath>
#include <limits>

#include "doctest.h"
#include "otonav/orca/orca.hpp"
#include "otonav/random.hpp"
#include "orca_oracle.hpp"

using namespace otonav;
using namespace otonav::orca;
using sim::AgentState;
using namespace otonav::testing;

namespace {

AgentState agent(Vec2 p, Vec2 v, Vec2 g) { return AgentState{p, v, 0.3, g, 1.0, 0.0}; }

}  // namespace

TEST_CASE("half-planes: empty and out-of-range neighborhoods") {
  const OrcaConfig cfg{5.0, 5.0, 0.0, 1.0};
  const AgentState a = agent({0, 0}, {0, 0}, {1, 0});
  CHECK(orca_halfplanes(a, {}, cfg, 0.25).empty());
  const std::vector<AgentState> far{agent({10, 0}, {0, 0}, {0, 0})};
  CHECK(orca_halfplanes(a, far, cfg, 0.25).empty());
}

TEST_CASE("half-plane normals are unit length") {
  Rng rng(5);
  const OrcaConfig cfg;
  for (int k = 0; k < 500; ++k) {
    const AgentState a = agent({uniform(rng, -3, 3), uniform(rng, -3, 3)}, {uniform(rng, -1, 1), uniform(rng, -1, 1)}, {});
    const std::vector<AgentState> nb{
        agent({uniform(rng, -3, 3), uniform(rng, -3, 3)}, {uniform(rng, -1, 1), uniform(rng, -1, 1)}, {})};
    for (const auto& h : orca_halfplanes(a, nb, cfg, 0.25)) CHECK(std::abs(norm(h.normal) - 1.0) <= 1e-9);
  }
}

TEST_CASE("head-on pair produces mirrored half-planes") {
  const OrcaConfig cfg;
  const AgentState a = agent({-2.0, 0.05}, {1.0, 0.0}, {2, 0});
  const AgentState b = agent({2.0, -0.05}, {-1.0, 0.0}, {-2, 0});
  const auto ha = orca_halfplanes(a, std::vector<AgentState>{b}, cfg, 0.25);
  const auto hb = orca_halfplanes(b, std::vector<AgentState>{a}, cfg, 0.25);
  REQUIRE(ha.size() == 1);
  REQUIRE(hb.size() == 1);
  // Point reflection through the origin maps one agent onto the other.
  CHECK(ha[0].point.x == doctest::Approx(-hb[0].point.x).epsilon(1e-12));
  CHECK(ha[0].point.y == doctest::Approx(-hb[0].point.y).epsilon(1e-12));
  CHECK(ha[0].normal.x == doctest::Approx(-hb[0].normal.x).epsilon(1e-12));
  CHECK(ha[0].normal.y == doctest::Approx(-hb[0].normal.y).epsilon(1e-12));
  // The current velocity violates the constraint: the pair is on a collision course.
  CHECK(dot(a.velocity - ha[0].point, ha[0].normal) < 0.0);
}

TEST_CASE("overlapping agents use the time-step cone") {
  const OrcaConfig cfg;
  const AgentState a = agent({0, 0}, {0, 0}, {1, 0});
  const std::vector<AgentState> nb{agent({0.4, 0}, {0, 0}, {})};
  const auto h = orca_halfplanes(a, nb, cfg, 0.25);
  REQUIRE(h.size() == 1);
  // Must move away from the neighbor.
  CHECK(h[0].normal.x < 0.0);
  const Vec2 v = solve_velocity(h, {1.0, 0.0}, 1.0);
  CHECK(v.x < 0.0);
}

TEST_CASE("solve_velocity without constraints") {
  const Vec2 v = solve_velocity({}, {1.0, 0.0}, 1.0);
  CHECK(v == Vec2{1.0, 0.0});
  const Vec2 w = solve_velocity({}, {2.0, 0.0}, 1.0);
  CHECK(norm(w) == doctest::Approx(1.0));
  const Vec2 inside = solve_velocity({}, {0.3, -0.2}, 1.0);
  CHECK(inside == Vec2{0.3, -0.2});
}

TEST_CASE("single excluding constraint: boundary point matches the fine grid") {
  const std::vector<HalfPlane> h{{{0.2, 0.0}, {-1.0, 0.0}}};  // requires v.x <= 0.2
  const Vec2 pref{1.0, 0.0};
  const Vec2 v = solve_velocity(h, pref, 1.0);
  CHECK(std::abs(dot(v - h[0].point, h[0].normal)) <= 1e-12);
  const GridOptimum g = grid_oracle(h, pref, 1.0, 0.001);
  REQUIRE(g.feasible);
  CHECK(norm(v - pref) <= g.objective + 1e-3);
  CHECK(norm(v - g.best) <= 1e-3);
}

TEST_CASE("feasible solutions satisfy every constraint") {
  Rng rng(17);
  for (int k = 0; k < 2000; ++k) {
    std::vector<HalfPlane> planes;
    const int n = 1 + static_cast<int>(uniform_index(rng, 6));
    for (int i = 0; i < n; ++i) planes.push_back(random_plane(rng, 0.6));
    const Vec2 pref{uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5)};
    const Vec2 v = solve_velocity(planes, pref, 1.0);
    CHECK(norm(v) <= 1.0 + 1e-12);
    // Classify feasibility independently with a coarse grid.
    const GridOptimum g = grid_oracle(planes, pref, 1.0, 0.02);
    if (g.feasible) CHECK(max_violation(planes, v) <= 1e-9);
  }
}

TEST_CASE("solve_velocity agrees with the grid oracle on random instances") {
  Rng rng(23);
  int compared = 0;
  for (int k = 0; k < 1000; ++k) {
    std::vector<HalfPlane> planes;
    const int n = 1 + static_cast<int>(uniform_index(rng, 5));
    for (int i = 0; i < n; ++i) planes.push_back(random_plane(rng, 0.8));
    const Vec2 pref{uniform(rng, -1.2, 1.2), uniform(rng, -1.2, 1.2)};
    const Vec2 v = solve_velocity(planes, pref, 1.0);
    const GridOptimum g = grid_oracle(planes, pref, 1.0, 0.01, 3);
    if (g.feasible) {
      CHECK(norm(v - g.best) <= 1e-2);
    } else {
      CHECK(max_violation(planes, v) <= g.objective + 1e-2);
    }
    ++compared;
  }
  CHECK(compared == 1000);
}

TEST_CASE("lone agent heads straight for its goal") {
  const OrcaConfig cfg;
  const std::vector<AgentState> world{agent({1, 1}, {0, 0}, {4, 5})};
  const Vec2 v = orca_action(0, world, cfg, 0.25);
  CHECK(v.x == doctest::Approx(0.6));
  CHECK(v.y == doctest::Approx(0.8));
}

TEST_CASE("actions respect the speed limit and label swaps") {
  Rng rng(9);
  const OrcaConfig cfg;
  for (int k = 0; k < 300; ++k) {
    std::vector<AgentState> world;
    for (int i = 0; i < 4; ++i)
      world.push_back(agent({uniform(rng, -3, 3), uniform(rng, -3, 3)}, {uniform(rng, -0.7, 0.7), uniform(rng, -0.7, 0.7)},
                            {uniform(rng, -4, 4), uniform(rng, -4, 4)}));
    for (std::size_t i = 0; i < world.size(); ++i) CHECK(norm(orca_action(i, world, cfg, 0.25)) <= 1.0 + 1e-12);
  }

  // Symmetric encounter: swapping labels swaps actions, and the point
  // symmetry of the scene carries over to the actions.
  std::vector<AgentState> pair{agent({-2, 0}, {0.8, 0}, {3, 0}), agent({2, 0}, {-0.8, 0}, {-3, 0})};
  const Vec2 a0 = orca_action(0, pair, cfg, 0.25);
  const Vec2 a1 = orca_action(1, pair, cfg, 0.25);
  std::vector<AgentState> swapped{pair[1], pair[0]};
  CHECK(orca_action(0, swapped, cfg, 0.25) == a1);
  CHECK(orca_action(1, swapped, cfg, 0.25) == a0);
  CHECK(a0.x == doctest::Approx(-a1.x).epsilon(1e-12));
  CHECK(a0.y == doctest::Approx(-a1.y).epsilon(1e-12));
  CHECK(std::abs(a0.y) > 0.0);  // symmetry broken: the pair sidesteps
}

TEST_CASE("ORCA pedestrians do not collide with each other") {
  sim::SimConfig cfg;
  sim::CrowdEnv env(cfg, make_pedestrians(cfg));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    env.reset(seed);
    while (!env.done()) env.step(robot_action(env));
    CHECK(env.min_ped_separation() > 0.0);
  }
}
