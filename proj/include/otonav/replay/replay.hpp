#pragma once

#include <cstdint>
#include <deque>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "otonav/dataset/trajectory.hpp"
#include "otonav/json_util.hpp"
#include "otonav/random.hpp"

namespace otonav::replay {

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReplayConfig {
  std::size_t capacity = 100000;  // trajectories, offline and online together
  double epsilon = 0.01;
  double success_multiplier = 2.0;

  void validate() const;
};

void to_json(Json& j, const ReplayConfig& c);
void from_json(const Json& j, ReplayConfig& c);

// Updates per episode: the RTGP takes `fast` updates (one per sampled
// trajectory), the policy `slow`.
struct TimescaleSchedule {
  std::size_t fast = 8;
  std::size_t slow = 1;

  void validate() const;
};

void to_json(Json& j, const TimescaleSchedule& c);
void from_json(const Json& j, TimescaleSchedule& c);

std::pair<std::size_t, std::size_t> schedule_tick(const TimescaleSchedule& s, std::size_t episode_index);

struct Sample {
  const dataset::Trajectory* trajectory = nullptr;
  std::size_t index = 0;  // position in the union, offline first
  dataset::StepWindow window;
};

// Cumulative priority table frozen at one point in time. Sampling from a
// snapshot never touches the buffer, so readers can hold one while the
// training loop keeps inserting.
class PrioritySnapshot {
 public:
  PrioritySnapshot() = default;
  explicit PrioritySnapshot(std::vector<double> cumulative) : cumulative_(std::move(cumulative)) {}

  std::size_t size() const { return cumulative_.size(); }
  double total() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  double probability(std::size_t i) const;
  std::size_t draw(Rng& rng) const;

 private:
  std::vector<double> cumulative_;
};

// Union of the read-only offline dataset D_p and an online ring buffer D_o.
// Priority of trajectory i:
//   p_i = m_i * ((G_i - G_min) / (G_max - G_min) + eps)
// with G the episode return, the range taken over the whole buffer and
// m_i = success_multiplier for successful episodes, 1 otherwise. With a
// degenerate range the normalized term is zero.
class HybridBuffer {
 public:
  HybridBuffer(std::vector<dataset::Trajectory> offline, ReplayConfig cfg);

  const ReplayConfig& config() const { return cfg_; }
  std::size_t size() const { return offline_.size() + online_.size(); }
  std::size_t offline_size() const { return offline_.size(); }
  std::size_t online_size() const { return online_.size(); }
  std::size_t online_capacity() const { return cfg_.capacity - offline_.size(); }

  const dataset::Trajectory& at(std::size_t i) const;
  const std::vector<dataset::Trajectory>& offline() const { return offline_; }

  // Appends a terminated episode, evicting the oldest online one when full.
  void insert(dataset::Trajectory traj);

  double priority(std::size_t i);
  double probability(std::size_t i);
  std::vector<double> probabilities();

  PrioritySnapshot snapshot();

  // `batch` draws with replacement. Each carries a sub-window of length at
  // most `max_len` whose end index is uniform over the trajectory.
  std::vector<Sample> sample_trajectories(std::size_t batch, std::size_t max_len, Rng& rng);

  // Per-item priority evaluations so far.
  std::uint64_t priority_evaluations() const { return evaluations_; }

 private:
  double raw_priority(std::size_t i);
  void refresh();

  ReplayConfig cfg_;
  std::vector<dataset::Trajectory> offline_;
  std::deque<dataset::Trajectory> online_;
  std::multiset<double> returns_;
  std::vector<double> priorities_;
  std::vector<double> cumulative_;
  bool stale_ = true;
  double range_lo_ = 0.0, range_hi_ = 0.0;
  std::uint64_t evaluations_ = 0;
};

}  // namespace otonav::replay
