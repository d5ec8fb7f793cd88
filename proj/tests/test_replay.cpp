#include <cmath>
#include <numeric>

#include "doctest.h"
#include "otonav/replay/replay.hpp"

using namespace otonav;
using namespace otonav::replay;
using dataset::Outcome;
using dataset::Trajectory;

namespace {

// n steps with a single nonzero reward at the end, so G_0 = gamma^(n-1) * r.
Trajectory make_traj(std::size_t n, double final_reward, Outcome outcome, std::uint64_t seed = 0) {
  Trajectory t;
  t.seed = seed;
  t.outcome = outcome;
  t.state_dim = 2;
  t.duration = 0.25 * static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    t.states.push_back(static_cast<double>(k));
    t.states.push_back(static_cast<double>(seed));
    t.actions.push_back({0.1, 0.0});
    t.rewards.push_back(k + 1 == n ? final_reward : 0.0);
  }
  t.rtg = dataset::compute_rtg(t.rewards, 1.0);
  return t;
}

// Upper 1% points of the chi-square distribution (standard tables).
double chi2_99(int dof) {
  switch (dof) {
    case 1: return 6.635;
    case 9: return 21.666;
  }
  FAIL("no table entry");
  return 0.0;
}

double chi_square(const std::vector<double>& counts, const std::vector<double>& expected_p, double draws) {
  double x = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = expected_p[i] * draws;
    x += (counts[i] - e) * (counts[i] - e) / e;
  }
  return x;
}

}  // namespace

TEST_CASE("insert grows the online store and evicts oldest first") {
  ReplayConfig cfg;
  cfg.capacity = 4;
  HybridBuffer empty({}, cfg);
  empty.insert(make_traj(3, 1.0, Outcome::success));
  CHECK(empty.size() == 1);

  const std::vector<Trajectory> offline{make_traj(5, 1.0, Outcome::success, 100)};
  HybridBuffer b(offline, cfg);
  CHECK(b.online_capacity() == 3);
  for (std::uint64_t s = 1; s <= 4; ++s) b.insert(make_traj(2 + s, 0.5, Outcome::timeout, s));
  CHECK(b.size() == 4);
  CHECK(b.online_size() == 3);
  CHECK(b.at(0) == offline[0]);
  CHECK(b.at(1).seed == 2);
  CHECK(b.at(3).seed == 4);
  // Priorities stay consistent after eviction.
  const auto p = b.probabilities();
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("insert rejects incomplete trajectories and full offline stores") {
  HybridBuffer b({}, ReplayConfig{});
  CHECK_THROWS_AS(b.insert(Trajectory{}), ReplayError);
  Trajectory t = make_traj(4, 1.0, Outcome::success);
  t.rtg.pop_back();
  CHECK_THROWS_AS(b.insert(t), ReplayError);
  ReplayConfig small;
  small.capacity = 2;
  CHECK_THROWS_AS(HybridBuffer({make_traj(2, 1, Outcome::success), make_traj(2, 1, Outcome::success)}, small),
                  ConfigError);
  Rng rng(1);
  CHECK_THROWS_AS(b.sample_trajectories(1, 5, rng), ReplayError);
}

TEST_CASE("priority formula and degenerate range") {
  ReplayConfig cfg;
  HybridBuffer same({make_traj(3, 0.5, Outcome::timeout), make_traj(3, 0.5, Outcome::success)}, cfg);
  CHECK(same.priority(0) == doctest::Approx(0.01));
  CHECK(same.priority(1) == doctest::Approx(0.02));

  // Returns -1, 0, 1 (span 2).
  HybridBuffer b({make_traj(2, -1.0, Outcome::collision), make_traj(2, 0.0, Outcome::timeout),
                  make_traj(2, 1.0, Outcome::success)},
                 cfg);
  CHECK(b.priority(0) == doctest::Approx(0.01));
  CHECK(b.priority(1) == doctest::Approx(0.51));
  CHECK(b.priority(2) == doctest::Approx(2.02));
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.priority(i) > 0.0);
}

TEST_CASE("priority is monotone within an outcome class; best success is maximal") {
  std::vector<Trajectory> off;
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    const Outcome o = i % 3 == 0 ? Outcome::success : (i % 3 == 1 ? Outcome::collision : Outcome::timeout);
    const double r = o == Outcome::success ? uniform(rng, 0.0, 1.0) : uniform(rng, -0.5, 0.8);
    off.push_back(make_traj(1 + uniform_index(rng, 10), r, o, i));
  }
  HybridBuffer b(off, ReplayConfig{});
  std::size_t best = 0;
  double best_g = -1e9;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b.at(i).outcome == Outcome::success && b.at(i).episode_return() > best_g) {
      best_g = b.at(i).episode_return();
      best = i;
    }
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (i != best) CHECK(b.priority(best) > b.priority(i));
    for (std::size_t j = 0; j < b.size(); ++j)
      if (b.at(i).outcome == b.at(j).outcome && b.at(i).episode_return() < b.at(j).episode_return())
        CHECK(b.priority(i) < b.priority(j));
  }
}

TEST_CASE("priorities are recomputed lazily") {
  HybridBuffer b({make_traj(2, -1.0, Outcome::collision), make_traj(2, 1.0, Outcome::success)}, ReplayConfig{});
  (void)b.probabilities();
  CHECK(b.priority_evaluations() == 2);
  b.insert(make_traj(3, 0.2, Outcome::timeout));  // range unchanged
  CHECK(b.priority_evaluations() == 3);
  (void)b.probabilities();
  CHECK(b.priority_evaluations() == 3);
  CHECK(b.priority(2) == doctest::Approx(0.61));
  b.insert(make_traj(3, 3.0, Outcome::success));  // new maximum: deferred full refresh
  CHECK(b.priority_evaluations() == 3);
  (void)b.probabilities();
  CHECK(b.priority_evaluations() == 7);
}

TEST_CASE("probabilities sum to one after every insert and eviction") {
  ReplayConfig cfg;
  cfg.capacity = 60;
  std::vector<Trajectory> off;
  Rng rng(11);
  for (int i = 0; i < 20; ++i) off.push_back(make_traj(4, uniform(rng, -1, 1), Outcome::timeout, i));
  HybridBuffer b(off, cfg);
  for (int k = 0; k < 200; ++k) {
    const Outcome o = k % 2 ? Outcome::success : Outcome::collision;
    b.insert(make_traj(1 + uniform_index(rng, 30), uniform(rng, -1.5, 1.5), o, 1000 + k));
    const auto p = b.probabilities();
    double s = 0.0;
    for (double x : p) s += x;
    CHECK(std::abs(s - 1.0) <= 1e-12);
    CHECK(b.size() <= cfg.capacity);
  }
  for (std::size_t i = 0; i < off.size(); ++i) CHECK(b.at(i) == off[i]);
}

TEST_CASE("sampling frequencies pass chi-square against priorities") {
  std::vector<Trajectory> off;
  for (int i = 0; i < 10; ++i)
    off.push_back(make_traj(5, 0.1 * i, i % 2 ? Outcome::success : Outcome::timeout, static_cast<std::uint64_t>(i)));
  HybridBuffer b(off, ReplayConfig{});
  const auto p = b.probabilities();
  Rng rng(2024);
  const int draws = 100000;
  std::vector<double> counts(b.size(), 0.0);
  const auto samples = b.sample_trajectories(draws, 20, rng);
  for (const auto& s : samples) counts[s.index] += 1.0;
  CHECK(chi_square(counts, p, draws) < chi2_99(9));
}

TEST_CASE("two trajectories with priorities 3:1") {
  ReplayConfig cfg;
  cfg.epsilon = 0.5;  // p = 0.5 and 1.5
  HybridBuffer b({make_traj(3, 0.0, Outcome::timeout), make_traj(3, 1.0, Outcome::timeout)}, cfg);
  CHECK(b.priority(1) / b.priority(0) == doctest::Approx(3.0));
  Rng rng(99);
  std::vector<double> counts(2, 0.0);
  for (const auto& s : b.sample_trajectories(100000, 3, rng)) counts[s.index] += 1.0;
  CHECK(chi_square(counts, {0.25, 0.75}, 100000) < chi2_99(1));
  const double ratio = counts[1] / counts[0];
  // 99% normal band for the ratio estimate at this sample size.
  CHECK(std::abs(ratio - 3.0) < 0.08);
}

TEST_CASE("sub-windows, single-item buffers and seeded reproducibility") {
  HybridBuffer one({make_traj(30, 1.0, Outcome::success)}, ReplayConfig{});
  Rng rng(5);
  std::vector<int> end_counts(31, 0);
  for (const auto& s : one.sample_trajectories(30000, 20, rng)) {
    CHECK(s.index == 0);
    CHECK(s.window.size() >= 1);
    CHECK(s.window.size() <= 20);
    CHECK(s.window.begin == (s.window.end > 20 ? s.window.end - 20 : 0));
    ++end_counts[s.window.end];
  }
  CHECK(end_counts[0] == 0);
  std::vector<double> c(end_counts.begin() + 1, end_counts.end());
  // Ends are uniform over 1..30: every bin inside a 5-sigma binomial band.
  for (double x : c) CHECK(std::abs(x - 1000.0) < 5.0 * std::sqrt(1000.0 * (29.0 / 30.0)));

  std::vector<Trajectory> off;
  for (int i = 0; i < 6; ++i) off.push_back(make_traj(10 + i, 0.2 * i, Outcome::success, i));
  HybridBuffer a(off, ReplayConfig{}), b(off, ReplayConfig{});
  Rng r1(77), r2(77);
  const auto sa = a.sample_trajectories(500, 8, r1);
  const auto sb = b.sample_trajectories(500, 8, r2);
  for (std::size_t k = 0; k < sa.size(); ++k) {
    CHECK(sa[k].index == sb[k].index);
    CHECK(sa[k].window.begin == sb[k].window.begin);
    CHECK(sa[k].window.end == sb[k].window.end);
  }
}

TEST_CASE("snapshots are isolated from later inserts") {
  HybridBuffer b({make_traj(2, -1.0, Outcome::collision), make_traj(2, 1.0, Outcome::success)}, ReplayConfig{});
  const PrioritySnapshot snap = b.snapshot();
  const double p0 = snap.probability(0);
  b.insert(make_traj(2, 5.0, Outcome::success));
  CHECK(snap.size() == 2);
  CHECK(snap.probability(0) == p0);
  CHECK(b.probability(0) != p0);
}

TEST_CASE("timescale schedule") {
  const TimescaleSchedule def;
  CHECK(schedule_tick(def, 0) == std::pair<std::size_t, std::size_t>{8, 1});
  std::size_t fast = 0, slow = 0;
  for (std::size_t e = 0; e < 50; ++e) {
    const auto [f, s] = schedule_tick(def, e);
    fast += f;
    slow += s;
    CHECK(fast > slow);
  }
  const TimescaleSchedule r3{6, 2};
  r3.validate();
  std::size_t f3 = 0, s3 = 0;
  for (std::size_t e = 10; e < 17; ++e) {
    f3 += schedule_tick(r3, e).first;
    s3 += schedule_tick(r3, e).second;
  }
  CHECK(f3 == 3 * s3);
  CHECK_THROWS_AS((TimescaleSchedule{1, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((TimescaleSchedule{4, 0}.validate()), ConfigError);
}
