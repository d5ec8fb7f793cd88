#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "otonav/dataset/dataset.hpp"
#include "otonav/json_util.hpp"
#include "otonav/net/lamb.hpp"
#include "otonav/policy/policy.hpp"
#include "otonav/replay/replay.hpp"
#include "otonav/rtgp/rtgp.hpp"
#include "otonav/sim/config.hpp"

namespace otonav::trainer {

// Offsets added to the episode index of each seeded stage so that dataset,
// fine-tuning and evaluation scenarios never share a seed stream.
inline constexpr std::uint64_t kDatasetStream = 0;
inline constexpr std::uint64_t kFinetuneStream = 100000000;
inline constexpr std::uint64_t kEvalStream = 200000000;

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  sim::SimConfig sim;
  dataset::ReturnConfig returns;
  std::size_t dataset_episodes = 2000;

  policy::PolicyConfig policy;
  rtgp::RtgpConfig rtgp;
  net::LambConfig optim;         // lr 5e-4
  std::size_t batch_size = 256;  // transitions per offline minibatch

  std::size_t max_epochs = 60;
  // Offline learning rate decays geometrically to lr * lr_final_ratio over
  // max_epochs; 1 keeps it constant.
  double lr_final_ratio = 1.0;
  double plateau_delta = 1e-4;
  std::size_t plateau_patience = 10;

  std::size_t finetune_episodes = 500;
  std::size_t max_episodes = 10000;
  replay::ReplayConfig replay;
  replay::TimescaleSchedule schedule;
  std::size_t fast_batch = 256;  // transition cap of one RTGP update
  policy::RtgSource conditioning = policy::RtgSource::rtgp;
  std::optional<double> fixed_rtg;  // ablation target; default: best offline return

  std::size_t eval_episodes = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(Json& j, const TrainConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const Json& j, TrainConfig& c);

// Both networks plus the bookkeeping needed to resume or evaluate them.
struct ModelState {
  TrainConfig config;
  net::ModelParams<float> theta, phi;
  std::optional<policy::Policy> policy;
  std::optional<rtgp::Rtgp> rtgp;

  std::string stage = "init";  // init, pretrain, finetune
  std::uint64_t offline_transitions = 0;  // dataset transitions used for training
  std::uint64_t interactions = 0;         // environment steps taken by the learner
  std::uint64_t episodes = 0;             // fine-tuning episodes completed
  std::uint64_t fast_updates = 0, slow_updates = 0;
  double fixed_rtg = 0.0;
  std::string dataset_hash;  // config hash of the offline dataset

  std::uint64_t sample_count() const { return offline_transitions + interactions; }
};

ModelState init_models(const TrainConfig& cfg);

Json state_meta(const ModelState& s);
void save_models(const std::filesystem::path& path, const ModelState& s);
ModelState load_models(const std::filesystem::path& path);

struct EpochLog {
  std::size_t epoch = 0;
  double policy_loss = 0.0;
  double rtgp_loss = 0.0;
};

struct PretrainResult {
  ModelState state;
  std::vector<EpochLog> curve;
  bool early_stopped = false;
};

// Called after every completed epoch with the current state.
using EpochHook = std::function<void(const ModelState&, const EpochLog&)>;

// Alternates one policy epoch (label-conditioned windows of length K) and one
// RTGP epoch (blocks of K_r steps) until the epoch budget or a plateau on
// both losses. A non-finite loss or update restores the last finite state,
// writes it to `last_good` when given and throws TrainingError.
PretrainResult pretrain_offline(const dataset::Dataset& data, const TrainConfig& cfg,
                                const std::optional<std::filesystem::path>& last_good = std::nullopt,
                                const EpochHook& on_epoch = {});

struct EpisodeLog {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  dataset::Outcome outcome = dataset::Outcome::timeout;
  std::size_t steps = 0;
  double reward = 0.0;  // discounted return G_0
  std::size_t sampled = 0;  // trajectories drawn from the hybrid buffer
  std::size_t fast_updates = 0, slow_updates = 0;
  double rtgp_loss = 0.0, policy_loss = 0.0;
  bool discarded = false;
  std::string error;
};

Json to_json(const EpisodeLog& e);

using EpisodeHook = std::function<void(const ModelState&, const EpisodeLog&)>;

struct FinetuneResult {
  ModelState state;
  std::vector<EpisodeLog> log;
};

// Online phase: each episode rolls out the agent, stores the episode in the
// hybrid buffer, then runs the fast RTGP updates (one per sampled trajectory)
// and the slow policy updates on the sampled windows. In fixed mode the
// policy is conditioned on a constant and the RTGP is not used.
FinetuneResult finetune_online(ModelState state, const dataset::Dataset& offline, std::size_t episodes,
                               const EpisodeHook& on_episode = {});

struct EvalEpisode {
  std::uint64_t seed = 0;
  dataset::Outcome outcome = dataset::Outcome::timeout;
  std::size_t steps = 0;
  double time = 0.0;
  double reward = 0.0;
};

struct EvalReport {
  std::string conditioning;
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
  double success_rate = 0.0, collision_rate = 0.0, timeout_rate = 0.0;
  std::optional<double> mean_time;  // successful episodes only
  double mean_reward = 0.0;
  std::uint64_t sample_count = 0;  // U
  double efficiency = 0.0;         // mean_reward / U
  std::vector<EvalEpisode> records;
};

inline constexpr int kReportVersion = 1;

Json to_json(const EvalReport& r);
EvalReport report_from_json(const Json& j);

// Sampling efficiency eta = r / U. U is a count in reports but may be given in
// any unit (for example thousands of samples) for arithmetic checks.
double sampling_efficiency(double reward, double sample_count);

struct EvalOptions {
  std::size_t episodes = 500;
  std::uint64_t seed = 0;
  std::optional<policy::RtgSource> conditioning;  // default: the state's mode
  std::vector<dataset::EpisodeFrames>* frames = nullptr;
};

// Greedy rollouts against pedestrians that cannot see the robot. Episode e
// uses scenario seed derive_seed(seed, kEvalStream + e).
EvalReport evaluate(const ModelState& state, const EvalOptions& opt);

// Summary over a set of episode outcomes; used for reports and logs.
EvalReport summarize(std::span<const EvalEpisode> records, std::uint64_t sample_count);

}  // namespace otonav::trainer
