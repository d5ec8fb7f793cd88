#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "otonav/dataset/dataset.hpp"
#include "otonav/orca/orca.hpp"
#include "otonav/sim/reward.hpp"

using namespace otonav;
using namespace otonav::dataset;
namespace fs = std::filesystem;

namespace {

// Direct power-series suffix sums; independent of the reverse scan.
std::vector<double> suffix_oracle(const std::vector<double>& r, double gamma) {
  std::vector<double> g(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) {
    double acc = 0.0, w = 1.0;
    for (std::size_t k = t; k < r.size(); ++k) {
      acc += w * r[k];
      w *= gamma;
    }
    g[t] = acc;
  }
  return g;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "otonav_test_dataset";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Trajectory fake(Outcome o, double duration, std::vector<double> rewards) {
  Trajectory t;
  t.outcome = o;
  t.duration = duration;
  t.state_dim = 2;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    t.states.push_back(static_cast<double>(i));
    t.states.push_back(-0.5);
    t.actions.push_back({0.1, 0.2});
  }
  t.rtg = compute_rtg(rewards, 0.99);
  t.rewards = std::move(rewards);
  return t;
}

}  // namespace

TEST_CASE("compute_rtg examples") {
  const std::vector<double> r{0, 0, 2};
  const auto g = compute_rtg(r, 0.99);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == doctest::Approx(1.9602).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(1.98).epsilon(1e-12));
  CHECK(g[2] == 2.0);
  const auto o = suffix_oracle(r, 0.99);
  for (int i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(o[i]).epsilon(1e-14));

  CHECK(compute_rtg(std::vector<double>{-0.25}, 0.5) == std::vector<double>{-0.25});
  CHECK(compute_rtg(std::vector<double>{1, 1, 1}, 1.0) == std::vector<double>{3, 2, 1});
  CHECK(compute_rtg(std::vector<double>{}, 0.9).empty());
  CHECK_THROWS_AS(compute_rtg(std::vector<double>{1}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(compute_rtg(std::vector<double>{1}, 1.5), std::invalid_argument);
}

TEST_CASE("generated trajectories are well formed") {
  sim::SimConfig cfg;
  const ReturnConfig ret;
  const Dataset d = generate_dataset(30, 7, cfg, ret);
  REQUIRE(d.trajectories.size() == 30);
  for (const auto& t : d.trajectories) {
    const std::size_t n = t.size();
    REQUIRE(n > 0);
    CHECK(n <= cfg.max_steps());
    CHECK(t.states.size() == n * sim::joint_width(cfg.num_peds));
    CHECK(t.actions.size() == n);
    CHECK(t.rtg.size() == n);
    CHECK(t.rtg.back() == t.rewards.back());
    for (std::size_t i = 0; i + 1 < n; ++i) CHECK(t.rtg[i] == t.rewards[i] + 0.99 * t.rtg[i + 1]);
    for (const auto& a : t.actions) CHECK(sim::norm(a) <= cfg.v_max + 1e-12);
    // Outcome matches the final reward branch.
    switch (t.outcome) {
      case Outcome::success:
        // The discomfort branch precedes the goal branch.
        CHECK((t.rewards.back() == sim::kGoalReward || (t.rewards.back() < 0.0 && t.rewards.back() > -0.2)));
        break;
      case Outcome::collision: CHECK(t.rewards.back() == sim::kCollisionReward); break;
      case Outcome::timeout: CHECK(n == cfg.max_steps()); break;
    }
    CHECK(t.duration == doctest::Approx(static_cast<double>(n) * cfg.time_step));
  }
}

TEST_CASE("undiscounted mode") {
  sim::SimConfig cfg;
  ReturnConfig ret;
  ret.discounted = false;
  const Dataset d = generate_dataset(5, 3, cfg, ret);
  for (const auto& t : d.trajectories)
    for (std::size_t i = 0; i + 1 < t.size(); ++i) CHECK(t.rtg[i] == t.rewards[i] + t.rtg[i + 1]);
}

TEST_CASE("generation preconditions") {
  sim::SimConfig cfg;
  cfg.robot_visible = true;
  CHECK_THROWS_AS(generate_dataset(1, 0, cfg, {}), ConfigError);
  CHECK_THROWS_AS(generate_dataset(kMaxCapacity + 1, 0, sim::SimConfig{}, {}), ConfigError);
}

TEST_CASE("save/load round trip is lossless and deterministic") {
  sim::SimConfig cfg;
  const Dataset d = generate_dataset(8, 11, cfg, {});
  const fs::path a = temp_path("a.jsonl"), b = temp_path("b.jsonl");
  save_dataset(a, d);
  save_dataset(b, generate_dataset(8, 11, cfg, {}));
  CHECK(slurp(a) == slurp(b));
  CHECK_FALSE(fs::exists(a.string() + ".tmp"));

  const Dataset back = load_dataset(a);
  CHECK(back.header.config_hash == d.header.config_hash);
  CHECK(back.header.state_dim == d.header.state_dim);
  REQUIRE(back.trajectories.size() == d.trajectories.size());
  for (std::size_t i = 0; i < d.trajectories.size(); ++i) CHECK(back.trajectories[i] == d.trajectories[i]);

  const Dataset one = generate_dataset(1, 5, cfg, {});
  save_dataset(a, one);
  const std::string first = slurp(a);
  save_dataset(a, generate_dataset(1, 5, cfg, {}));
  CHECK(slurp(a) == first);
}

TEST_CASE("stats arithmetic") {
  Dataset d;
  d.header.state_dim = 2;
  d.trajectories.push_back(fake(Outcome::success, 10.0, {0, 2}));
  d.trajectories.push_back(fake(Outcome::success, 12.0, {0, 0, 2}));
  d.trajectories.push_back(fake(Outcome::collision, 3.0, {-0.25}));
  const DatasetStats s = compute_stats(d);
  CHECK(s.success_rate == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.collision_rate == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(s.timeout_rate == 0.0);
  REQUIRE(s.mean_time.has_value());
  CHECK(*s.mean_time == doctest::Approx(11.0).epsilon(1e-15));
  CHECK(s.capacity == 3);
  CHECK(s.mean_reward == doctest::Approx((1.98 + 1.9602 - 0.25) / 3.0).epsilon(1e-12));
  CHECK(std::abs(s.success_rate + s.collision_rate + s.timeout_rate - 1.0) <= 1e-12);
}

TEST_CASE("dataset file errors") {
  const fs::path empty = temp_path("empty.jsonl");
  { std::ofstream(empty, std::ios::trunc); }
  CHECK_THROWS_AS(dataset_stats(empty), DatasetError);
  CHECK_THROWS_AS(load_dataset(temp_path("missing.jsonl")), DatasetError);

  const fs::path good = temp_path("good.jsonl");
  save_dataset(good, generate_dataset(3, 1, sim::SimConfig{}, {}));
  std::string text = slurp(good);
  // Damage the third line (second trajectory).
  std::size_t pos = 0;
  for (int i = 0; i < 2; ++i) pos = text.find('\n', pos) + 1;
  text.insert(pos + 5, "#");
  const fs::path bad = temp_path("bad.jsonl");
  { std::ofstream(bad, std::ios::binary | std::ios::trunc) << text; }
  try {
    load_dataset(bad);
    FAIL("corrupt record accepted");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  // Header only.
  const fs::path header_only = temp_path("header.jsonl");
  { std::ofstream(header_only, std::ios::binary | std::ios::trunc) << text.substr(0, text.find('\n') + 1); }
  CHECK_THROWS_AS(load_dataset(header_only), DatasetError);
}

TEST_CASE("failed write leaves no partial file") {
  const fs::path target = temp_path("nodir") / "sub" / "x.jsonl";
  Dataset d = generate_dataset(1, 0, sim::SimConfig{}, {});
  CHECK_THROWS(save_dataset(target, d));
  CHECK_FALSE(fs::exists(target));
  CHECK_FALSE(fs::exists(target.string() + ".tmp"));
}

TEST_CASE("stats file matches a streaming recomputation") {
  const fs::path p = temp_path("stream.jsonl");
  const Dataset d = generate_dataset(40, 21, sim::SimConfig{}, {});
  save_dataset(p, d);
  write_stats_sidecar(p, compute_stats(d));
  REQUIRE(fs::exists(stats_sidecar_path(p)));

  // Independent pass over the raw lines.
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  double n = 0, succ = 0, coll = 0, time = 0, ret = 0;
  while (std::getline(in, line)) {
    const Json j = Json::parse(line);
    n += 1;
    const auto outcome = j["outcome"].get<std::string>();
    if (outcome == "success") {
      succ += 1;
      time += j["duration"].get<double>();
    }
    if (outcome == "collision") coll += 1;
    ret += suffix_oracle(j["rewards"].get<std::vector<double>>(), 0.99)[0];
  }
  const Json s = Json::parse(slurp(stats_sidecar_path(p)));
  CHECK(s["capacity"].get<double>() == n);
  CHECK(s["success_rate"].get<double>() == doctest::Approx(succ / n).epsilon(1e-12));
  CHECK(s["collision_rate"].get<double>() == doctest::Approx(coll / n).epsilon(1e-12));
  if (succ > 0) CHECK(s["mean_time"].get<double>() == doctest::Approx(time / succ).epsilon(1e-12));
  CHECK(s["mean_reward"].get<double>() == doctest::Approx(ret / n).epsilon(1e-9));
}
