#include "otonav/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "otonav/net/checkpoint.hpp"
#include "otonav/orca/orca.hpp"

namespace otonav::trainer {

using dataset::StepWindow;
using dataset::Trajectory;
using net::Matrix;
using net::ModelParams;

namespace {

void to_json_lamb(Json& j, const net::LambConfig& c) {
  j = Json{{"lr", c.lr},     {"beta1", c.beta1},       {"beta2", c.beta2},
           {"eps", c.eps},   {"weight_decay", c.weight_decay}, {"max_trust", c.max_trust}};
}

void from_json_lamb(const Json& j, net::LambConfig& c) {
  require_keys(j, "optim", {"lr", "beta1", "beta2", "eps", "weight_decay", "max_trust"});
  read_optional(j, "optim", "lr", c.lr);
  read_optional(j, "optim", "beta1", c.beta1);
  read_optional(j, "optim", "beta2", c.beta2);
  read_optional(j, "optim", "eps", c.eps);
  read_optional(j, "optim", "weight_decay", c.weight_decay);
  read_optional(j, "optim", "max_trust", c.max_trust);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

bool finite(double x) { return std::isfinite(x); }

struct TaggedWindow {
  const Trajectory* traj;
  StepWindow window;
};

// Groups consecutive windows until each group holds at least `transitions` steps.
std::vector<std::vector<TaggedWindow>> make_batches(const std::vector<TaggedWindow>& all, std::size_t transitions) {
  std::vector<std::vector<TaggedWindow>> out;
  std::vector<TaggedWindow> cur;
  std::size_t n = 0;
  for (const auto& w : all) {
    cur.push_back(w);
    n += w.window.size();
    if (n >= transitions) {
      out.push_back(std::move(cur));
      cur.clear();
      n = 0;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<StepWindow> windows_of(const std::vector<TaggedWindow>& b) {
  std::vector<StepWindow> w;
  w.reserve(b.size());
  for (const auto& t : b) w.push_back(t.window);
  return w;
}

// One policy update; returns the loss before the step.
double policy_update(ModelState& s, std::span<const StepWindow> windows,
                     std::span<const std::span<const double>> rtg, policy::RtgSource source,
                     const net::LambConfig& optim) {
  const auto seq = policy::tokenize<float>(windows, rtg, source, s.fixed_rtg);
  const Matrix<double> targets = policy::action_targets(windows, s.config.policy.v_max);
  Matrix<float> pred, d_pred;
  policy::PolicyCache<float> cache;
  s.policy->forward(s.theta, seq, pred, cache);
  const double loss = policy::dt_loss(pred, targets, seq.steps, &d_pred);
  if (!finite(loss)) throw net::NonFiniteError("policy loss is not finite");
  s.theta.zero_grad();
  s.policy->backward(s.theta, seq, cache, d_pred);
  net::lamb_step(s.theta, optim);
  return loss;
}

double rtgp_update(ModelState& s, std::span<const StepWindow> windows, std::span<const double> targets,
                   const net::LambConfig& optim) {
  const auto batch = rtgp::make_batch<float>(windows, s.config.rtgp.num_peds);
  Matrix<float> pred, d_out;
  rtgp::RtgpCache<float> cache;
  s.rtgp->forward(s.phi, batch, pred, cache);
  const double loss = rtgp::rtgp_loss(pred, targets, &d_out);
  if (!finite(loss)) throw net::NonFiniteError("rtgp loss is not finite");
  s.phi.zero_grad();
  s.rtgp->backward(s.phi, batch, cache, d_out);
  net::lamb_step(s.phi, optim);
  return loss;
}

std::vector<double> targets_of(const std::vector<TaggedWindow>& b) {
  std::vector<double> y;
  for (const auto& t : b) y.insert(y.end(), t.traj->rtg.begin() + t.window.begin, t.traj->rtg.begin() + t.window.end);
  return y;
}

bool plateaued(const std::vector<double>& loss, std::size_t patience, double delta) {
  if (loss.size() <= patience) return false;
  const std::size_t ref = loss.size() - 1 - patience;
  const double best_after = *std::min_element(loss.begin() + ref + 1, loss.end());
  return loss[ref] - best_after < delta;
}

double best_return(const dataset::Dataset& d) {
  double g = -std::numeric_limits<double>::infinity();
  for (const auto& t : d.trajectories) g = std::max(g, t.episode_return());
  return g;
}

void check_dataset(const dataset::Dataset& d, const TrainConfig& cfg) {
  if (d.trajectories.empty()) throw dataset::DatasetError("dataset has no trajectories");
  if (d.header.state_dim != cfg.policy.state_dim || d.header.num_peds != cfg.sim.num_peds)
    throw ConfigError("dataset shape (" + std::to_string(d.header.num_peds) +
                      " pedestrians) does not match the training configuration");
}

}  // namespace

void TrainConfig::validate() const {
  sim.validate();
  policy.validate();
  rtgp.validate();
  replay.validate();
  schedule.validate();
  if (!(returns.gamma > 0.0 && returns.gamma <= 1.0)) throw ConfigError("returns.gamma must lie in (0, 1]");
  if (policy.state_dim != sim::joint_width(sim.num_peds))
    throw ConfigError("policy.state_dim must equal the joint observation width " +
                      std::to_string(sim::joint_width(sim.num_peds)));
  if (rtgp.num_peds != sim.num_peds) throw ConfigError("rtgp.num_peds must equal sim.num_peds");
  if (policy.v_max != sim.v_max) throw ConfigError("policy.v_max must equal sim.v_max");
  if (policy.max_steps < sim.max_steps() || rtgp.max_steps < sim.max_steps())
    throw ConfigError("model max_steps is shorter than the episode limit");
  if (dataset_episodes == 0 || dataset_episodes > dataset::kMaxCapacity)
    throw ConfigError("dataset_episodes must lie in [1, 100000]");
  if (dataset_episodes >= replay.capacity) throw ConfigError("replay.capacity must exceed dataset_episodes");
  if (!(optim.lr > 0.0)) throw ConfigError("optim.lr must be positive");
  if (batch_size == 0 || fast_batch == 0) throw ConfigError("batch sizes must be positive");
  if (max_epochs == 0 || plateau_patience == 0) throw ConfigError("epoch budgets must be positive");
  if (!(lr_final_ratio > 0.0 && lr_final_ratio <= 1.0)) throw ConfigError("lr_final_ratio must lie in (0, 1]");
  if (!(plateau_delta >= 0.0)) throw ConfigError("plateau_delta must be non-negative");
  if (finetune_episodes > max_episodes) throw ConfigError("finetune_episodes exceeds max_episodes");
  if (eval_episodes == 0) throw ConfigError("eval_episodes must be positive");
  if (conditioning == policy::RtgSource::labels) throw ConfigError("conditioning must be rtgp or fixed");
  if (fixed_rtg && !std::isfinite(*fixed_rtg)) throw ConfigError("fixed_rtg must be finite");
}

void to_json(Json& j, const TrainConfig& c) {
  Json optim;
  to_json_lamb(optim, c.optim);
  j = Json{{"sim", c.sim},
           {"returns", {{"gamma", c.returns.gamma}, {"discounted", c.returns.discounted}}},
           {"dataset_episodes", c.dataset_episodes},
           {"policy", c.policy},
           {"rtgp", c.rtgp},
           {"optim", optim},
           {"batch_size", c.batch_size},
           {"max_epochs", c.max_epochs},
           {"lr_final_ratio", c.lr_final_ratio},
           {"plateau_delta", c.plateau_delta},
           {"plateau_patience", c.plateau_patience},
           {"finetune_episodes", c.finetune_episodes},
           {"max_episodes", c.max_episodes},
           {"replay", c.replay},
           {"schedule", c.schedule},
           {"fast_batch", c.fast_batch},
           {"conditioning", std::string(policy::to_string(c.conditioning))},
           {"fixed_rtg", c.fixed_rtg ? Json(*c.fixed_rtg) : Json(nullptr)},
           {"eval_episodes", c.eval_episodes},
           {"seed", c.seed}};
}

void from_json(const Json& j, TrainConfig& c) {
  require_keys(j, "config",
               {"sim", "returns", "dataset_episodes", "policy", "rtgp", "optim", "batch_size", "max_epochs",
                "lr_final_ratio", "plateau_delta", "plateau_patience", "finetune_episodes", "max_episodes", "replay", "schedule",
                "fast_batch", "conditioning", "fixed_rtg", "eval_episodes", "seed"});
  read_optional(j, "config", "sim", c.sim);
  if (auto it = j.find("returns"); it != j.end()) {
    require_keys(*it, "returns", {"gamma", "discounted"});
    read_optional(*it, "returns", "gamma", c.returns.gamma);
    read_optional(*it, "returns", "discounted", c.returns.discounted);
  }
  read_optional(j, "config", "dataset_episodes", c.dataset_episodes);
  // Observation shapes follow the simulator unless given explicitly.
  c.policy.state_dim = sim::joint_width(c.sim.num_peds);
  c.policy.v_max = c.sim.v_max;
  c.rtgp.num_peds = c.sim.num_peds;
  read_optional(j, "config", "policy", c.policy);
  if (auto it = j.find("policy"); it != j.end()) {
    if (!it->contains("state_dim")) c.policy.state_dim = sim::joint_width(c.sim.num_peds);
    if (!it->contains("v_max")) c.policy.v_max = c.sim.v_max;
  }
  read_optional(j, "config", "rtgp", c.rtgp);
  if (auto it = j.find("rtgp"); it != j.end() && !it->contains("num_peds")) c.rtgp.num_peds = c.sim.num_peds;
  if (auto it = j.find("optim"); it != j.end()) from_json_lamb(*it, c.optim);
  read_optional(j, "config", "batch_size", c.batch_size);
  read_optional(j, "config", "max_epochs", c.max_epochs);
  read_optional(j, "config", "lr_final_ratio", c.lr_final_ratio);
  read_optional(j, "config", "plateau_delta", c.plateau_delta);
  read_optional(j, "config", "plateau_patience", c.plateau_patience);
  read_optional(j, "config", "finetune_episodes", c.finetune_episodes);
  read_optional(j, "config", "max_episodes", c.max_episodes);
  read_optional(j, "config", "replay", c.replay);
  read_optional(j, "config", "schedule", c.schedule);
  read_optional(j, "config", "fast_batch", c.fast_batch);
  if (auto it = j.find("conditioning"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("config.conditioning must be a string");
    c.conditioning = policy::rtg_source_from_string(it->get<std::string>());
  }
  if (auto it = j.find("fixed_rtg"); it != j.end()) {
    if (it->is_null()) {
      c.fixed_rtg.reset();
    } else if (it->is_number()) {
      c.fixed_rtg = it->get<double>();
    } else {
      throw ConfigError("config.fixed_rtg must be a number or null");
    }
  }
  read_optional(j, "config", "eval_episodes", c.eval_episodes);
  read_optional(j, "config", "seed", c.seed);
  c.validate();
}

ModelState init_models(const TrainConfig& cfg) {
  cfg.validate();
  ModelState s;
  s.config = cfg;
  s.policy.emplace(cfg.policy, s.theta, derive_seed(cfg.seed, 1));
  s.rtgp.emplace(cfg.rtgp, s.phi, derive_seed(cfg.seed, 2));
  return s;
}

Json state_meta(const ModelState& s) {
  return Json{{"schema", "otonav.models"},
              {"train", s.config},
              {"stage", s.stage},
              {"offline_transitions", s.offline_transitions},
              {"interactions", s.interactions},
              {"episodes", s.episodes},
              {"fast_updates", s.fast_updates},
              {"slow_updates", s.slow_updates},
              {"fixed_rtg", s.fixed_rtg},
              {"dataset_hash", s.dataset_hash},
              {"theta_blocks", s.theta.size()},
              {"theta_step", s.theta.step},
              {"phi_step", s.phi.step}};
}

void save_models(const std::filesystem::path& path, const ModelState& s) {
  ModelParams<float> all;
  for (const auto* src : {&s.theta, &s.phi})
    for (const auto& b : src->blocks()) {
      const std::size_t i = all.add(b.name, b.value.rows(), b.value.cols());
      all[i].value = b.value;
      all[i].m = b.m;
      all[i].v = b.v;
    }
  all.step = s.theta.step + s.phi.step;
  net::save_checkpoint(path, state_meta(s), all);
}

ModelState load_models(const std::filesystem::path& path) {
  const net::Checkpoint ck = net::load_checkpoint(path);
  const Json& meta = ck.config;
  try {
    if (meta.at("schema") != "otonav.models") throw net::CheckpointError("not a model checkpoint: " + path.string());
    ModelState s;
    s.config = meta.at("train").get<TrainConfig>();
    s.stage = meta.at("stage").get<std::string>();
    s.offline_transitions = meta.at("offline_transitions").get<std::uint64_t>();
    s.interactions = meta.at("interactions").get<std::uint64_t>();
    s.episodes = meta.at("episodes").get<std::uint64_t>();
    s.fast_updates = meta.at("fast_updates").get<std::uint64_t>();
    s.slow_updates = meta.at("slow_updates").get<std::uint64_t>();
    s.fixed_rtg = meta.at("fixed_rtg").get<double>();
    s.dataset_hash = meta.at("dataset_hash").get<std::string>();
    const auto theta_blocks = meta.at("theta_blocks").get<std::size_t>();
    if (theta_blocks > ck.params.size()) throw net::CheckpointError("checkpoint block count mismatch");
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
      auto& dst = i < theta_blocks ? s.theta : s.phi;
      const auto& b = ck.params[i];
      const std::size_t k = dst.add(b.name, b.value.rows(), b.value.cols());
      dst[k].value = b.value;
      dst[k].m = b.m;
      dst[k].v = b.v;
    }
    s.theta.step = meta.at("theta_step").get<std::int64_t>();
    s.phi.step = meta.at("phi_step").get<std::int64_t>();
    s.policy.emplace(policy::Policy::bind(s.config.policy, s.theta));
    s.rtgp.emplace(rtgp::Rtgp::bind(s.config.rtgp, s.phi));
    return s;
  } catch (const Json::exception& e) {
    throw net::CheckpointError("checkpoint metadata: " + std::string(e.what()));
  } catch (const std::invalid_argument& e) {
    throw net::CheckpointError(e.what());
  }
}

PretrainResult pretrain_offline(const dataset::Dataset& data, const TrainConfig& cfg,
                                const std::optional<std::filesystem::path>& last_good, const EpochHook& on_epoch) {
  check_dataset(data, cfg);
  PretrainResult res;
  ModelState& s = res.state;
  s = init_models(cfg);
  s.stage = "pretrain";
  s.offline_transitions = data.transitions();
  s.fixed_rtg = cfg.fixed_rtg.value_or(best_return(data));
  s.dataset_hash = data.header.config_hash;

  Rng rng(derive_seed(cfg.seed, 3));
  const std::size_t K = cfg.policy.context;
  std::vector<TaggedWindow> blocks;
  for (const auto& t : data.trajectories)
    for (const auto& w : dataset::tile_windows(t, cfg.rtgp.window)) blocks.push_back({&t, w});

  std::vector<double> pol_curve, rtg_curve;
  ModelParams<float> good_theta = s.theta, good_phi = s.phi;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    net::LambConfig optim = cfg.optim;
    if (cfg.max_epochs > 1)
      optim.lr *= std::pow(cfg.lr_final_ratio, static_cast<double>(epoch) / static_cast<double>(cfg.max_epochs - 1));
    try {
      // Policy epoch: every transition once, window boundaries shifted by a
      // random offset per trajectory.
      std::vector<TaggedWindow> wins;
      for (const auto& t : data.trajectories) {
        const std::size_t n = t.size();
        std::size_t b = 0, e = uniform_index(rng, K);
        if (e == 0) e = std::min(K, n);
        while (b < n) {
          e = std::min(e, n);
          wins.push_back({&t, dataset::make_window(t, b, e)});
          b = e;
          e = b + K;
        }
      }
      shuffle(wins, rng);
      double pol_sum = 0.0;
      const auto pol_batches = make_batches(wins, cfg.batch_size);
      for (const auto& batch : pol_batches) {
        const auto w = windows_of(batch);
        std::vector<std::span<const double>> rtg;
        for (const auto& t : batch) rtg.emplace_back(t.traj->rtg);
        pol_sum += policy_update(s, w, rtg, policy::RtgSource::labels, optim);
        if (!net::all_finite(s.theta)) throw net::NonFiniteError("policy parameters became non-finite");
      }

      shuffle(blocks, rng);
      double rtg_sum = 0.0;
      const auto rtg_batches = make_batches(blocks, cfg.batch_size);
      for (const auto& batch : rtg_batches) {
        const auto w = windows_of(batch);
        const auto y = targets_of(batch);
        rtg_sum += rtgp_update(s, w, y, optim);
        if (!net::all_finite(s.phi)) throw net::NonFiniteError("rtgp parameters became non-finite");
      }
      pol_curve.push_back(pol_sum / static_cast<double>(pol_batches.size()));
      rtg_curve.push_back(rtg_sum / static_cast<double>(rtg_batches.size()));
    } catch (const net::NonFiniteError& e) {
      s.theta = good_theta;
      s.phi = good_phi;
      std::string where;
      if (last_good) {
        save_models(*last_good, s);
        where = "; last finite state saved to " + last_good->string();
      }
      throw TrainingError("pretrain epoch " + std::to_string(epoch) + ": " + e.what() + where);
    }
    good_theta = s.theta;
    good_phi = s.phi;
    res.curve.push_back({epoch, pol_curve.back(), rtg_curve.back()});
    if (on_epoch) on_epoch(s, res.curve.back());
    if (plateaued(pol_curve, cfg.plateau_patience, cfg.plateau_delta) &&
        plateaued(rtg_curve, cfg.plateau_patience, cfg.plateau_delta)) {
      res.early_stopped = true;
      break;
    }
  }
  return res;
}

Json to_json(const EpisodeLog& e) {
  Json j{{"episode", e.episode},
         {"seed", e.seed},
         {"outcome", std::string(dataset::to_string(e.outcome))},
         {"steps", e.steps},
         {"reward", e.reward},
         {"sampled", e.sampled},
         {"fast_updates", e.fast_updates},
         {"slow_updates", e.slow_updates},
         {"rtgp_loss", e.rtgp_loss},
         {"policy_loss", e.policy_loss},
         {"discarded", e.discarded}};
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

FinetuneResult finetune_online(ModelState state, const dataset::Dataset& offline, std::size_t episodes,
                               const EpisodeHook& on_episode) {
  if (state.stage == "init") throw TrainingError("fine-tuning needs pre-trained models");
  const TrainConfig& cfg = state.config;
  check_dataset(offline, cfg);
  if (offline.header.config_hash != state.dataset_hash)
    throw ConfigError("dataset " + offline.header.config_hash + " is not the one the models were trained on (" +
                      state.dataset_hash + ")");
  if (state.episodes + episodes > cfg.max_episodes) throw ConfigError("episode budget exceeds max_episodes");

  FinetuneResult res;
  replay::HybridBuffer buffer(offline.trajectories, cfg.replay);
  sim::CrowdEnv env(cfg.sim, orca::make_pedestrians(cfg.sim));
  const bool use_rtgp = cfg.conditioning == policy::RtgSource::rtgp;
  Rng rng(derive_seed(cfg.seed, 4 + state.episodes));
  const std::size_t K = cfg.policy.context;

  policy::Agent agent(*state.policy, state.theta, cfg.conditioning, state.fixed_rtg, &*state.rtgp, &state.phi);
  const dataset::Controller controller = agent.controller();
  state.stage = "finetune";

  for (std::size_t k = 0; k < episodes; ++k) {
    EpisodeLog log;
    log.episode = state.episodes;
    log.seed = derive_seed(cfg.seed, kFinetuneStream + state.episodes);
    ++state.episodes;
    Trajectory traj;
    try {
      traj = dataset::record_episode(env, log.seed, controller, cfg.returns.effective_gamma());
    } catch (const std::exception& e) {
      state.interactions += env.steps();
      log.discarded = true;
      log.error = e.what();
      log.steps = env.steps();
      res.log.push_back(log);
      if (on_episode) on_episode(state, log);
      continue;
    }
    state.interactions += traj.size();
    log.outcome = traj.outcome;
    log.steps = traj.size();
    log.reward = traj.episode_return();
    buffer.insert(std::move(traj));

    const auto [num_fast, num_slow] = replay::schedule_tick(cfg.schedule, log.episode);
    const auto samples = buffer.sample_trajectories(num_fast, K, rng);
    log.sampled = samples.size();
    try {
      if (use_rtgp) {
        double sum = 0.0;
        for (const auto& smp : samples) {
          std::vector<StepWindow> w;
          std::size_t n = 0;
          for (const auto& b : dataset::tile_windows(*smp.trajectory, cfg.rtgp.window)) {
            if (n + b.size() > cfg.fast_batch) break;
            n += b.size();
            w.push_back(b);
          }
          sum += rtgp_update(state, w, rtgp::window_targets(*smp.trajectory, w), cfg.optim);
          ++log.fast_updates;
        }
        log.rtgp_loss = sum / static_cast<double>(samples.size());
      }
      std::vector<StepWindow> wins;
      for (const auto& smp : samples) wins.push_back(smp.window);
      for (std::size_t u = 0; u < num_slow; ++u) {
        std::vector<std::vector<double>> pred;
        std::vector<std::span<const double>> rtg;
        if (use_rtgp) {
          for (const auto& smp : samples) pred.push_back(rtgp::predict_trajectory(*state.rtgp, state.phi, *smp.trajectory));
          for (const auto& p : pred) rtg.emplace_back(p);
        }
        log.policy_loss = policy_update(state, wins, rtg, cfg.conditioning, cfg.optim);
        ++log.slow_updates;
      }
    } catch (const net::NonFiniteError& e) {
      throw TrainingError("fine-tuning episode " + std::to_string(log.episode) + ": " + e.what());
    }
    state.fast_updates += log.fast_updates;
    state.slow_updates += log.slow_updates;
    res.log.push_back(log);
    if (on_episode) on_episode(state, log);
  }
  res.state = std::move(state);
  return res;
}

double sampling_efficiency(double reward, double sample_count) {
  if (!(sample_count > 0.0)) throw std::invalid_argument("sampling efficiency needs a positive sample count");
  return reward / sample_count;
}

EvalReport summarize(std::span<const EvalEpisode> records, std::uint64_t sample_count) {
  EvalReport r;
  r.episodes = records.size();
  if (records.empty()) return r;
  std::size_t succ = 0, coll = 0, tout = 0;
  double time = 0.0, reward = 0.0;
  for (const auto& e : records) {
    reward += e.reward;
    switch (e.outcome) {
      case dataset::Outcome::success:
        ++succ;
        time += e.time;
        break;
      case dataset::Outcome::collision: ++coll; break;
      case dataset::Outcome::timeout: ++tout; break;
    }
  }
  const double n = static_cast<double>(records.size());
  r.success_rate = succ / n;
  r.collision_rate = coll / n;
  r.timeout_rate = tout / n;
  if (succ > 0) r.mean_time = time / static_cast<double>(succ);
  r.mean_reward = reward / n;
  r.sample_count = sample_count;
  r.efficiency = sample_count > 0 ? sampling_efficiency(r.mean_reward, static_cast<double>(sample_count)) : 0.0;
  r.records.assign(records.begin(), records.end());
  return r;
}

EvalReport evaluate(const ModelState& state, const EvalOptions& opt) {
  const TrainConfig& cfg = state.config;
  if (!state.policy || !state.rtgp) throw std::invalid_argument("evaluate: models are not bound");
  const policy::RtgSource source = opt.conditioning.value_or(cfg.conditioning);
  if (source == policy::RtgSource::labels) throw ConfigError("evaluation cannot use label conditioning");
  sim::SimConfig sc = cfg.sim;
  sc.robot_visible = false;
  sim::CrowdEnv env(sc, orca::make_pedestrians(sc));
  policy::Agent agent(*state.policy, state.theta, source, state.fixed_rtg, &*state.rtgp, &state.phi);
  const dataset::Controller controller = agent.controller();
  std::vector<EvalEpisode> records;
  records.reserve(opt.episodes);
  if (opt.frames) opt.frames->clear();
  for (std::size_t e = 0; e < opt.episodes; ++e) {
    const std::uint64_t seed = derive_seed(opt.seed, kEvalStream + e);
    dataset::EpisodeFrames frames;
    const Trajectory t =
        dataset::record_episode(env, seed, controller, cfg.returns.effective_gamma(), opt.frames ? &frames : nullptr);
    records.push_back({seed, t.outcome, t.size(), t.duration, t.episode_return()});
    if (opt.frames) opt.frames->push_back(std::move(frames));
  }
  EvalReport r = summarize(records, state.sample_count());
  r.conditioning = std::string(policy::to_string(source));
  r.seed = opt.seed;
  return r;
}

Json to_json(const EvalReport& r) {
  Json recs = Json::array();
  for (const auto& e : r.records)
    recs.push_back({{"seed", e.seed},
                    {"outcome", std::string(dataset::to_string(e.outcome))},
                    {"steps", e.steps},
                    {"time", e.time},
                    {"reward", e.reward}});
  return Json{{"schema", "otonav.eval"},
              {"version", kReportVersion},
              {"conditioning", r.conditioning},
              {"episodes", r.episodes},
              {"seed", r.seed},
              {"success_rate", r.success_rate},
              {"collision_rate", r.collision_rate},
              {"timeout_rate", r.timeout_rate},
              {"mean_time", r.mean_time ? Json(*r.mean_time) : Json(nullptr)},
              {"mean_reward", r.mean_reward},
              {"sample_count", r.sample_count},
              {"efficiency", r.efficiency},
              {"records", recs}};
}

EvalReport report_from_json(const Json& j) {
  try {
    if (j.at("schema") != "otonav.eval") throw ConfigError("not an evaluation report");
    if (j.at("version").get<int>() != kReportVersion) throw ConfigError("unsupported report version");
    EvalReport r;
    r.conditioning = j.at("conditioning").get<std::string>();
    r.episodes = j.at("episodes").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.success_rate = j.at("success_rate").get<double>();
    r.collision_rate = j.at("collision_rate").get<double>();
    r.timeout_rate = j.at("timeout_rate").get<double>();
    if (!j.at("mean_time").is_null()) r.mean_time = j.at("mean_time").get<double>();
    r.mean_reward = j.at("mean_reward").get<double>();
    r.sample_count = j.at("sample_count").get<std::uint64_t>();
    r.efficiency = j.at("efficiency").get<double>();
    for (const auto& e : j.at("records"))
      r.records.push_back({e.at("seed").get<std::uint64_t>(),
                           dataset::outcome_from_string(e.at("outcome").get<std::string>()),
                           e.at("steps").get<std::size_t>(), e.at("time").get<double>(), e.at("reward").get<double>()});
    return r;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
}

}  // namespace otonav::trainer
