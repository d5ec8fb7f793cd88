#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "otonav/orca/orca.hpp"
#include "otonav/random.hpp"
#include "otonav/sim/environment.hpp"
#include "otonav/sim/reward.hpp"
#include "otonav/sim/robot_frame.hpp"
#include "otonav/sim/scenario.hpp"

using namespace otonav;
using namespace otonav::sim;

namespace {

AgentState agent(Vec2 p, Vec2 v, Vec2 g, double r = 0.3) { return AgentState{p, v, r, g, 1.0, std::atan2(v.y, v.x)}; }

// Independent restatement of the reward table used as an oracle.
double reward_oracle(double d_min, double d_goal, double r0) {
  const bool collision = !(d_min > 0.0);
  const bool discomfort = !collision && d_min < 0.2;
  const bool goal = !collision && !discomfort && !(d_goal > r0);
  if (collision) return -0.25;
  if (discomfort) return d_min - 0.2;
  if (goal) return 2.0;
  return 0.0;
}

}  // namespace

TEST_CASE("scenario layout without noise") {
  SimConfig cfg;
  cfg.perturbation = 0.0;
  const Scenario s = sample_scenario(7, cfg);
  CHECK(s.ped_starts.size() == 5);
  CHECK(s.ped_starts[0].x == doctest::Approx(4.0));
  CHECK(s.ped_starts[0].y == doctest::Approx(0.0));
  CHECK(s.ped_goals[0].x == doctest::Approx(-4.0));
  CHECK(s.ped_goals[0].y == doctest::Approx(0.0));
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(norm(s.ped_starts[i] + s.ped_goals[i]) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("scenario robot endpoints and determinism") {
  SimConfig cfg;
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL, 123456789ULL}) {
    const Scenario a = sample_scenario(seed, cfg);
    CHECK(a.robot_start == Vec2{0.0, -4.0});
    CHECK(a.robot_goal == Vec2{0.0, 4.0});
    CHECK(a == sample_scenario(seed, cfg));
    for (std::size_t i = 0; i < a.ped_starts.size(); ++i) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / 5.0;
      const Vec2 base{4.0 * std::cos(angle), 4.0 * std::sin(angle)};
      CHECK(std::abs(a.ped_starts[i].x - base.x) <= 0.5);
      CHECK(std::abs(a.ped_starts[i].y - base.y) <= 0.5);
      CHECK(std::abs(a.ped_goals[i].x + base.x) <= 0.5);
      CHECK(std::abs(a.ped_goals[i].y + base.y) <= 0.5);
    }
  }
  CHECK_FALSE(sample_scenario(1, cfg) == sample_scenario(2, cfg));
}

TEST_CASE("robot frame basic quantities") {
  const AgentState robot = agent({0, -4}, {0, 0}, {0, 4});
  std::vector<AgentState> peds{agent({3, 1}, {0.5, -0.2}, {-3, -1})};
  const RobotFrameState f = to_robot_frame(peds, robot);
  CHECK(f.robot[0] == doctest::Approx(8.0));
  CHECK(f.pedestrians[0][5] == doctest::Approx(norm(Vec2{3, 5})));
  CHECK(f.pedestrians[0][6] == 0.6);
  CHECK(f.pedestrians[0][6] == f.pedestrians[0][4] + robot.radius);
  CHECK(f.joint().size() == joint_width(1));
  // Goal lies on +x: the pedestrian's local x is its offset along the goal direction.
  CHECK(f.pedestrians[0][0] == doctest::Approx(5.0));
  CHECK(f.pedestrians[0][1] == doctest::Approx(-3.0));
}

TEST_CASE("robot frame ignores global translation and rotation") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    AgentState robot = agent({uniform(rng, -4, 4), uniform(rng, -4, 4)}, {uniform(rng, -1, 1), uniform(rng, -1, 1)},
                             {uniform(rng, -4, 4), uniform(rng, -4, 4)});
    robot.heading = uniform(rng, -3, 3);
    std::vector<AgentState> peds;
    for (int i = 0; i < 5; ++i)
      peds.push_back(agent({uniform(rng, -4, 4), uniform(rng, -4, 4)}, {uniform(rng, -1, 1), uniform(rng, -1, 1)},
                           {0, 0}, uniform(rng, 0.2, 0.4)));
    const RobotFrameState ref = to_robot_frame(peds, robot);

    // Translation sweep.
    for (const Vec2 shift : {Vec2{3, 7}, Vec2{-11.5, 0.25}, Vec2{100, -100}}) {
      AgentState r2 = robot;
      r2.position += shift;
      r2.goal += shift;
      auto p2 = peds;
      for (auto& p : p2) p.position += shift;
      const auto moved = to_robot_frame(p2, r2);
      for (std::size_t k = 0; k < 6; ++k) CHECK(moved.robot[k] == doctest::Approx(ref.robot[k]).epsilon(1e-12));
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t k = 0; k < 7; ++k)
          CHECK(std::abs(moved.pedestrians[i][k] - ref.pedestrians[i][k]) <= 1e-10);
    }

    // Rotation of the world frame about the origin.
    const double a = uniform(rng, -3, 3);
    AgentState r3 = robot;
    r3.position = rotate(robot.position, a);
    r3.goal = rotate(robot.goal, a);
    r3.velocity = rotate(robot.velocity, a);
    r3.heading = robot.heading + a;
    auto p3 = peds;
    for (auto& p : p3) {
      p.position = rotate(p.position, a);
      p.velocity = rotate(p.velocity, a);
    }
    const auto rotated = to_robot_frame(p3, r3);
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(rotated.robot[k] - ref.robot[k]) <= 1e-12);
    const double dh = std::remainder(rotated.robot[5] - ref.robot[5], 2.0 * std::numbers::pi);
    CHECK(std::abs(dh) <= 1e-12);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < 7; ++k) CHECK(std::abs(rotated.pedestrians[i][k] - ref.pedestrians[i][k]) <= 1e-12);
  }
}

TEST_CASE("robot frame with degenerate goal uses zero rotation") {
  const AgentState robot = agent({1, 1}, {0.3, 0.4}, {1, 1});
  CHECK(frame_angle(robot) == 0.0);
  const auto f = to_robot_frame(std::vector<AgentState>{}, robot);
  CHECK(f.robot[0] == 0.0);
  CHECK(f.robot[1] == doctest::Approx(0.3));
  CHECK(f.robot[2] == doctest::Approx(0.4));
}

TEST_CASE("reward examples") {
  CHECK(reward(-0.01, 5.0, 0.3) == -0.25);
  CHECK(reward(0.1, 5.0, 0.3) == doctest::Approx(-0.1));
  CHECK(reward(0.5, 0.2, 0.3) == 2.0);
  CHECK(reward(0.5, 5.0, 0.3) == 0.0);
  // Boundaries.
  CHECK(reward(0.0, 0.0, 0.3) == -0.25);
  CHECK(reward(0.2, 5.0, 0.3) == 0.0);
  CHECK(reward(0.2, 0.3, 0.3) == 2.0);
  CHECK(reward(std::nextafter(0.2, 0.0), 5.0, 0.3) < 0.0);
  CHECK(reward(std::numeric_limits<double>::infinity(), 0.3, 0.3) == 2.0);
}

TEST_CASE("reward matches the branch table on a dense grid") {
  for (int i = -100; i <= 400; ++i) {
    for (int j = 0; j <= 200; ++j) {
      const double d_min = i * 0.001;
      const double d_goal = j * 0.005;
      REQUIRE(reward(d_min, d_goal, 0.3) == reward_oracle(d_min, d_goal, 0.3));
    }
  }
}

TEST_CASE("step kinematics without pedestrians") {
  SimConfig cfg;
  cfg.num_peds = 0;
  CrowdEnv env(cfg, std::make_shared<StaticPedestrians>());
  env.reset(3);
  const StepOutcome out = env.step({0.0, 1.0});
  CHECK(env.robot().position.x == 0.0);
  CHECK(env.robot().position.y == doctest::Approx(-3.75));
  CHECK(out.reward == 0.0);
  CHECK(out.terminal == Terminal::running);
  CHECK(out.d_goal == doctest::Approx(7.75));
  CHECK(env.robot().heading == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("step rejects oversized actions and stepping after termination") {
  SimConfig cfg;
  cfg.num_peds = 0;
  CrowdEnv env(cfg, std::make_shared<StaticPedestrians>());
  env.reset(0);
  CHECK_THROWS_AS(env.step({1.0, 0.5}), BoundsError);
  CHECK_THROWS_AS(env.step({std::nan(""), 0.0}), BoundsError);
  for (int k = 0; k < 31; ++k) env.step({0.0, 1.0});
  CHECK(env.done());
  CHECK(env.terminal() == Terminal::goal);
  CHECK_THROWS_AS(env.step({0.0, 0.0}), std::logic_error);
}

TEST_CASE("goal termination carries the goal reward") {
  SimConfig cfg;
  cfg.num_peds = 0;
  CrowdEnv env(cfg, std::make_shared<StaticPedestrians>());
  env.reset(0);
  StepOutcome out;
  while (!env.done()) out = env.step({0.0, 1.0});
  CHECK(out.terminal == Terminal::goal);
  CHECK(out.d_goal <= cfg.robot_radius);
  CHECK(out.reward == 2.0);
  CHECK(env.steps() == 31);
}

TEST_CASE("overlap is a collision") {
  SimConfig cfg;
  cfg.num_peds = 1;
  Scenario s;
  s.robot_start = {0, -4};
  s.robot_goal = {0, 4};
  s.ped_starts = {{0.0, -3.3}};
  s.ped_goals = {{0.0, -3.3}};
  CrowdEnv env(cfg, std::make_shared<StaticPedestrians>());
  env.reset(s);
  const StepOutcome out = env.step({0.0, 1.0});
  CHECK(out.terminal == Terminal::collision);
  CHECK(out.d_min <= 0.0);
  CHECK(out.reward == -0.25);
}

TEST_CASE("timeout after the time limit") {
  SimConfig cfg;
  cfg.num_peds = 0;
  CrowdEnv env(cfg, std::make_shared<StaticPedestrians>());
  env.reset(0);
  StepOutcome out;
  std::size_t n = 0;
  while (!env.done()) {
    out = env.step({0.0, 0.0});
    ++n;
  }
  CHECK(n == 100);
  CHECK(out.terminal == Terminal::timeout);
  CHECK(env.elapsed() == doctest::Approx(25.0));
  CHECK(out.reward == 0.0);
}

TEST_CASE("episodes are deterministic and bounded") {
  SimConfig cfg;
  auto peds = orca::make_pedestrians(cfg);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CrowdEnv a(cfg, peds), b(cfg, peds);
    a.reset(seed);
    b.reset(seed);
    std::size_t n = 0;
    Rng rng(seed);
    while (!a.done()) {
      const Action act{uniform(rng, -0.7, 0.7), uniform(rng, -0.7, 0.7)};
      const auto oa = a.step(act);
      const auto ob = b.step(act);
      REQUIRE(oa.next == ob.next);
      REQUIRE(oa.reward == ob.reward);
      REQUIRE(a.robot().position == b.robot().position);
      for (std::size_t i = 0; i < a.pedestrians().size(); ++i)
        REQUIRE(a.pedestrians()[i].goal == b.pedestrians()[i].goal);
      ++n;
    }
    CHECK(n <= cfg.max_steps());
  }
}

TEST_CASE("pedestrians receive new goals after arrival") {
  SimConfig cfg;
  cfg.num_peds = 1;
  Scenario s;
  s.robot_start = {0, -4};
  s.robot_goal = {0, 4};
  s.ped_starts = {{-3.0, 2.0}};
  s.ped_goals = {{-3.0, 2.1}};
  CrowdEnv env(cfg, orca::make_pedestrians(cfg));
  env.reset(s);
  env.step({0.0, 0.0});
  const Vec2 g = env.pedestrians()[0].goal;
  CHECK_FALSE(g == Vec2{-3.0, 2.1});
  CHECK(norm(g) == doctest::Approx(4.0));
  CHECK(norm(g - env.pedestrians()[0].position) >= 2.0);
}

TEST_CASE("visible stationary robot is never hit by ORCA pedestrians") {
  SimConfig cfg;
  cfg.robot_visible = true;
  CrowdEnv env(cfg, orca::make_pedestrians(cfg));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    env.reset(seed);
    while (!env.done()) {
      const auto out = env.step({0.0, 0.0});
      REQUIRE(out.d_min > 0.0);
    }
    CHECK(env.terminal() == Terminal::timeout);
  }
}
