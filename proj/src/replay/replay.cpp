#include "otonav/replay/replay.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace otonav::replay {

void ReplayConfig::validate() const {
  if (capacity == 0) throw ConfigError("replay.capacity must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("replay.epsilon must be positive");
  if (!(success_multiplier >= 1.0) || !std::isfinite(success_multiplier))
    throw ConfigError("replay.success_multiplier must be >= 1");
}

void to_json(Json& j, const ReplayConfig& c) {
  j = Json{{"capacity", c.capacity}, {"epsilon", c.epsilon}, {"success_multiplier", c.success_multiplier}};
}

void from_json(const Json& j, ReplayConfig& c) {
  require_keys(j, "replay", {"capacity", "epsilon", "success_multiplier"});
  read_optional(j, "replay", "capacity", c.capacity);
  read_optional(j, "replay", "epsilon", c.epsilon);
  read_optional(j, "replay", "success_multiplier", c.success_multiplier);
}

void TimescaleSchedule::validate() const {
  if (slow == 0) throw ConfigError("schedule.slow must be at least 1");
  if (fast <= slow) throw ConfigError("schedule.fast must exceed schedule.slow");
}

void to_json(Json& j, const TimescaleSchedule& c) { j = Json{{"fast", c.fast}, {"slow", c.slow}}; }

void from_json(const Json& j, TimescaleSchedule& c) {
  require_keys(j, "schedule", {"fast", "slow"});
  read_optional(j, "schedule", "fast", c.fast);
  read_optional(j, "schedule", "slow", c.slow);
}

std::pair<std::size_t, std::size_t> schedule_tick(const TimescaleSchedule& s, std::size_t) { return {s.fast, s.slow}; }

double PrioritySnapshot::probability(std::size_t i) const {
  if (i >= cumulative_.size()) throw std::out_of_range("snapshot: index out of range");
  const double lo = i == 0 ? 0.0 : cumulative_[i - 1];
  return (cumulative_[i] - lo) / total();
}

namespace {

std::size_t draw_index(const std::vector<double>& cumulative, Rng& rng) {
  if (cumulative.empty()) throw ReplayError("sample from an empty buffer");
  const double u = uniform(rng, 0.0, cumulative.back());
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

void check_complete(const dataset::Trajectory& t) {
  const std::size_t n = t.size();
  if (n == 0) throw ReplayError("insert: empty trajectory");
  if (t.actions.size() != n || t.rtg.size() != n || t.state_dim == 0 || t.states.size() != n * t.state_dim)
    throw ReplayError("insert: incomplete trajectory (per-step arrays disagree)");
  for (double g : t.rtg)
    if (!std::isfinite(g)) throw ReplayError("insert: trajectory has non-finite returns");
}

}  // namespace

std::size_t PrioritySnapshot::draw(Rng& rng) const { return draw_index(cumulative_, rng); }

HybridBuffer::HybridBuffer(std::vector<dataset::Trajectory> offline, ReplayConfig cfg)
    : cfg_(cfg), offline_(std::move(offline)) {
  cfg_.validate();
  if (offline_.size() >= cfg_.capacity)
    throw ConfigError("replay: offline dataset (" + std::to_string(offline_.size()) +
                      " trajectories) leaves no room under capacity " + std::to_string(cfg_.capacity));
  for (const auto& t : offline_) {
    check_complete(t);
    returns_.insert(t.episode_return());
  }
}

const dataset::Trajectory& HybridBuffer::at(std::size_t i) const {
  if (i < offline_.size()) return offline_[i];
  if (i - offline_.size() < online_.size()) return online_[i - offline_.size()];
  throw std::out_of_range("replay: index out of range");
}

void HybridBuffer::insert(dataset::Trajectory traj) {
  check_complete(traj);
  if (online_.size() == online_capacity()) {
    returns_.erase(returns_.find(online_.front().episode_return()));
    online_.pop_front();
    stale_ = true;  // every index shifts
  }
  returns_.insert(traj.episode_return());
  online_.push_back(std::move(traj));
  if (stale_) return;
  if (*returns_.begin() != range_lo_ || *returns_.rbegin() != range_hi_) {
    stale_ = true;
    return;
  }
  // Range unchanged: only the new item needs a priority.
  const double p = raw_priority(size() - 1);
  priorities_.push_back(p);
  cumulative_.push_back(cumulative_.empty() ? p : cumulative_.back() + p);
}

double HybridBuffer::raw_priority(std::size_t i) {
  ++evaluations_;
  const dataset::Trajectory& t = at(i);
  const double span = range_hi_ - range_lo_;
  const double norm = span > 0.0 ? (t.episode_return() - range_lo_) / span : 0.0;
  const double m = t.outcome == dataset::Outcome::success ? cfg_.success_multiplier : 1.0;
  return m * (norm + cfg_.epsilon);
}

void HybridBuffer::refresh() {
  if (!stale_) return;
  cumulative_.clear();
  priorities_.clear();
  if (!returns_.empty()) {
    range_lo_ = *returns_.begin();
    range_hi_ = *returns_.rbegin();
  }
  cumulative_.reserve(size());
  priorities_.reserve(size());
  double acc = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    priorities_.push_back(raw_priority(i));
    acc += priorities_.back();
    cumulative_.push_back(acc);
  }
  stale_ = false;
}

double HybridBuffer::priority(std::size_t i) {
  refresh();
  if (i >= size()) throw std::out_of_range("replay: index out of range");
  return priorities_[i];
}

double HybridBuffer::probability(std::size_t i) { return priority(i) / cumulative_.back(); }

std::vector<double> HybridBuffer::probabilities() {
  refresh();
  std::vector<double> out(priorities_);
  for (double& p : out) p /= cumulative_.back();
  return out;
}

PrioritySnapshot HybridBuffer::snapshot() {
  refresh();
  return PrioritySnapshot(cumulative_);
}

std::vector<Sample> HybridBuffer::sample_trajectories(std::size_t batch, std::size_t max_len, Rng& rng) {
  if (size() == 0) throw ReplayError("sample from an empty buffer");
  if (max_len == 0) throw std::invalid_argument("sample: window length must be positive");
  refresh();
  std::vector<Sample> out;
  out.reserve(batch);
  for (std::size_t k = 0; k < batch; ++k) {
    const std::size_t i = draw_index(cumulative_, rng);
    const dataset::Trajectory& t = at(i);
    const std::size_t end = 1 + uniform_index(rng, t.size());
    const std::size_t begin = end > max_len ? end - max_len : 0;
    out.push_back(Sample{&t, i, dataset::make_window(t, begin, end)});
  }
  return out;
}

}  // namespace otonav::replay
