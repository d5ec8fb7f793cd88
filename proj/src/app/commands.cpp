#include "otonav/app/commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <iterator>

#include "otonav/app/plot.hpp"
#include "otonav/dataset/dataset.hpp"
#include "otonav/random.hpp"

namespace otonav::app {

using trainer::TrainConfig;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void log_line(const GlobalOptions& g, const std::string& s) {
  if (!g.quiet) std::cerr << s << '\n';
}

// Collects planned outputs, enforces the overwrite rule and writes the
// manifest. Outputs can be planned before they are known to exist.
class Run {
 public:
  Run(const GlobalOptions& g, std::string command, const TrainConfig& cfg, fs::path manifest_path)
      : g_(g), manifest_path_(std::move(manifest_path)) {
    m_.command = std::move(command);
    m_.config_hash = config_hash(cfg);
    m_.seed = cfg.seed;
    m_.started = utc_now();
  }

  fs::path plan(std::string role, fs::path path) {
    m_.artifacts.push_back({std::move(role), path, {}});
    return path;
  }

  void check_overwrite() const {
    if (g_.force) return;
    std::vector<fs::path> all{manifest_path_};
    for (const auto& a : m_.artifacts) all.push_back(a.path);
    for (const auto& p : all)
      if (fs::exists(p)) throw OverwriteError(p.string() + " exists; pass --force to overwrite");
  }

  void stage_done(std::string name) {
    m_.stages.push_back(std::move(name));
    log_line(g_, m_.command + ": " + m_.stages.back() + " done");
  }

  RunManifest finish(std::string status = "ok", std::string error = {}) {
    m_.status = std::move(status);
    m_.error = std::move(error);
    for (auto& a : m_.artifacts) a.digest = fs::is_regular_file(a.path) ? file_digest(a.path) : std::string{};
    m_.finished = utc_now();
    write_text(manifest_path_, to_json(m_).dump(2) + "\n");
    return m_;
  }

  RunManifest& manifest() { return m_; }

 private:
  const GlobalOptions& g_;
  fs::path manifest_path_;
  RunManifest m_;
};

fs::path manifest_for(const GlobalOptions& g, const std::string& command) {
  return g.out / (command + ".manifest.json");
}

// Checkpointed models keep their architecture; a --config given alongside a
// checkpoint may only change settings that leave the networks unchanged.
trainer::ModelState load_state(const GlobalOptions& g, const fs::path& ckpt) {
  trainer::ModelState s = trainer::load_models(ckpt);
  if (g.config) {
    TrainConfig cfg = load_config(g);
    for (const char* key : {"sim", "returns", "policy", "rtgp"})
      if (Json(cfg)[key] != Json(s.config)[key])
        throw ConfigError(std::string("config section '") + key + "' differs from the checkpoint");
    s.config = cfg;
  } else if (g.seed) {
    s.config.seed = *g.seed;
  }
  s.config.validate();
  return s;
}

void write_curve(const fs::path& path, const std::vector<trainer::EpochLog>& curve) {
  std::string s = "epoch,policy_loss,rtgp_loss\n";
  for (const auto& e : curve)
    s += std::to_string(e.epoch) + "," + format_double(e.policy_loss) + "," + format_double(e.rtgp_loss) + "\n";
  write_text(path, s);
}

void write_episode_log(const fs::path& path, const std::vector<trainer::EpisodeLog>& log) {
  std::string s;
  for (const auto& e : log) s += trainer::to_json(e).dump() + "\n";
  write_text(path, s);
}

void gen_data_stage(const GlobalOptions& g, const TrainConfig& cfg, std::size_t episodes, const fs::path& path) {
  log_line(g, "gen-data: " + std::to_string(episodes) + " episodes");
  const auto d = dataset::generate_dataset(episodes, cfg.seed, cfg.sim, cfg.returns);
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  dataset::save_dataset(path, d);
  dataset::write_stats_sidecar(path, dataset::compute_stats(d));
}

trainer::ModelState pretrain_stage(const GlobalOptions& g, const TrainConfig& cfg, const fs::path& data,
                                   const fs::path& ckpt, const fs::path& curve) {
  const auto d = dataset::load_dataset(data);
  TrainConfig c = cfg;
  c.dataset_episodes = d.trajectories.size();
  c.validate();
  fs::path last_good = ckpt;
  last_good += ".last_good";
  const auto res = trainer::pretrain_offline(d, c, last_good, [&](const trainer::ModelState&, const trainer::EpochLog& e) {
    log_line(g, "pretrain: epoch " + std::to_string(e.epoch) + " policy_loss " + format_double(e.policy_loss) +
                    " rtgp_loss " + format_double(e.rtgp_loss));
  });
  trainer::save_models(ckpt, res.state);
  write_curve(curve, res.curve);
  return res.state;
}

trainer::ModelState finetune_stage(const GlobalOptions& g, trainer::ModelState s, const fs::path& data,
                                   std::size_t episodes, const fs::path& ckpt, const fs::path& log) {
  const auto d = dataset::load_dataset(data);
  std::size_t succ = 0;
  const auto res = trainer::finetune_online(std::move(s), d, episodes, [&](const trainer::ModelState&, const trainer::EpisodeLog& e) {
    succ += e.outcome == dataset::Outcome::success && !e.discarded;
    if ((e.episode + 1) % 50 == 0)
      log_line(g, "finetune: episode " + std::to_string(e.episode + 1) + " success so far " + std::to_string(succ));
  });
  trainer::save_models(ckpt, res.state);
  write_episode_log(log, res.log);
  return res.state;
}

trainer::EvalReport eval_stage(const GlobalOptions& g, const trainer::ModelState& s, std::size_t episodes,
                               std::optional<policy::RtgSource> conditioning, const fs::path& report,
                               const std::optional<fs::path>& frames_path) {
  trainer::EvalOptions opt;
  opt.episodes = episodes;
  opt.seed = s.config.seed;
  opt.conditioning = conditioning;
  std::vector<dataset::EpisodeFrames> frames;
  if (frames_path) opt.frames = &frames;
  const auto r = trainer::evaluate(s, opt);
  write_text(report, trainer::to_json(r).dump(2) + "\n");
  if (frames_path) save_frames(*frames_path, frames);
  char buf[128];
  std::snprintf(buf, sizeof buf, "eval: success %.3f collision %.3f reward %.4f", r.success_rate, r.collision_rate,
                r.mean_reward);
  log_line(g, buf);
  return r;
}

std::vector<std::string> plot_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t e = 0; e < n; ++e) {
    char name[32];
    std::snprintf(name, sizeof name, "episode_%04zu", e);
    names.push_back(std::string(name) + ".svg");
    names.push_back(std::string(name) + ".csv");
  }
  return names;
}

}  // namespace

Json to_json(const RunManifest& m) {
  Json arts = Json::array();
  for (const auto& a : m.artifacts) arts.push_back({{"role", a.role}, {"path", a.path.string()}, {"fnv1a", a.digest}});
  Json seeds{{"base", m.seed},
             {"dataset_stream", trainer::kDatasetStream},
             {"finetune_stream", trainer::kFinetuneStream},
             {"eval_stream", trainer::kEvalStream},
             {"policy_init", derive_seed(m.seed, 1)},
             {"rtgp_init", derive_seed(m.seed, 2)}};
  Json j{{"command", m.command}, {"config_hash", m.config_hash}, {"seeds", seeds},     {"status", m.status},
         {"stages", m.stages},   {"artifacts", arts},            {"started", m.started}, {"finished", m.finished}};
  if (!m.error.empty()) j["error"] = m.error;
  return j;
}

TrainConfig load_config(const GlobalOptions& g) {
  TrainConfig cfg;
  if (g.config) {
    std::ifstream in(*g.config);
    if (!in) throw ConfigError("cannot open config " + g.config->string());
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw ConfigError(g.config->string() + ": " + e.what());
    }
    cfg = j.get<TrainConfig>();
  }
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

std::string config_hash(const TrainConfig& cfg) { return hex(fnv1a(Json(cfg).dump())); }

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex(fnv1a(bytes));
}

RunManifest run_gen_data(const GlobalOptions& g, const GenDataOptions& o) {
  const TrainConfig cfg = load_config(g);
  Run run(g, "gen-data", cfg, manifest_for(g, "gen-data"));
  const fs::path data = run.plan("dataset", g.out / "dataset.jsonl");
  run.plan("dataset_stats", dataset::stats_sidecar_path(data));
  run.check_overwrite();
  if (g.dry_run) return run.finish("dry-run");
  gen_data_stage(g, cfg, o.episodes.value_or(cfg.dataset_episodes), data);
  run.stage_done("gen-data");
  return run.finish();
}

RunManifest run_pretrain(const GlobalOptions& g, const PretrainOptions& o) {
  const TrainConfig cfg = load_config(g);
  Run run(g, "pretrain", cfg, manifest_for(g, "pretrain"));
  const fs::path ckpt = run.plan("checkpoint", o.ckpt.value_or(g.out / "pretrain.ckpt"));
  const fs::path curve = run.plan("loss_curve", g.out / "pretrain_curve.csv");
  run.check_overwrite();
  if (g.dry_run) return run.finish("dry-run");
  pretrain_stage(g, cfg, o.data, ckpt, curve);
  run.stage_done("pretrain");
  return run.finish();
}

RunManifest run_finetune(const GlobalOptions& g, const FinetuneOptions& o) {
  trainer::ModelState s = load_state(g, o.ckpt);
  if (o.conditioning) s.config.conditioning = *o.conditioning;
  s.config.validate();
  Run run(g, "finetune", s.config, manifest_for(g, "finetune"));
  const fs::path ckpt = run.plan("checkpoint", o.out_ckpt.value_or(g.out / "finetune.ckpt"));
  const fs::path log = run.plan("episode_log", g.out / "finetune_log.jsonl");
  run.check_overwrite();
  if (g.dry_run) return run.finish("dry-run");
  const std::size_t n = o.episodes.value_or(s.config.finetune_episodes);
  finetune_stage(g, std::move(s), o.data, n, ckpt, log);
  run.stage_done("finetune");
  return run.finish();
}

RunManifest run_eval(const GlobalOptions& g, const EvalCommandOptions& o) {
  const trainer::ModelState s = load_state(g, o.ckpt);
  Run run(g, "eval", s.config, manifest_for(g, "eval"));
  const fs::path report = run.plan("report", o.report.value_or(g.out / "eval_report.json"));
  if (o.frames) run.plan("frames", *o.frames);
  run.check_overwrite();
  if (g.dry_run) return run.finish("dry-run");
  eval_stage(g, s, o.episodes.value_or(s.config.eval_episodes), o.conditioning, report, o.frames);
  run.stage_done("eval");
  return run.finish();
}

RunManifest run_plot(const GlobalOptions& g, const PlotOptions& o) {
  const TrainConfig cfg = load_config(g);
  auto frames = load_frames(o.frames);
  if (o.max_episodes && frames.size() > *o.max_episodes) frames.resize(*o.max_episodes);
  Run run(g, "plot", cfg, manifest_for(g, "plot"));
  const fs::path dir = g.out / "plots";
  for (const auto& name : plot_names(frames.size())) run.plan("figure", dir / name);
  run.check_overwrite();
  if (g.dry_run) return run.finish("dry-run");
  plot_trajectories(frames, dir);
  run.stage_done("plot");
  return run.finish();
}

RunManifest run_pipeline(const GlobalOptions& g, const PipelineOptions& o) {
  const TrainConfig cfg = load_config(g);
  Run run(g, "pipeline", cfg, g.out / "manifest.json");
  const fs::path data = run.plan("dataset", g.out / "dataset.jsonl");
  run.plan("dataset_stats", dataset::stats_sidecar_path(data));
  const fs::path pre = run.plan("pretrain_checkpoint", g.out / "pretrain.ckpt");
  const fs::path curve = run.plan("loss_curve", g.out / "pretrain_curve.csv");
  const fs::path fine = run.plan("finetune_checkpoint", g.out / "finetune.ckpt");
  const fs::path log = run.plan("episode_log", g.out / "finetune_log.jsonl");
  const fs::path report = run.plan("report", g.out / "eval_report.json");
  const fs::path frames = run.plan("frames", g.out / "eval_frames.jsonl");
  const std::size_t n_plot = std::min(o.plot_episodes, cfg.eval_episodes);
  for (const auto& name : plot_names(n_plot)) run.plan("figure", g.out / "plots" / name);
  run.check_overwrite();
  if (g.dry_run) return run.finish("dry-run");

  std::string stage = "gen-data";
  try {
    gen_data_stage(g, cfg, cfg.dataset_episodes, data);
    run.stage_done(stage);
    stage = "pretrain";
    trainer::ModelState s = pretrain_stage(g, cfg, data, pre, curve);
    run.stage_done(stage);
    stage = "finetune";
    s = finetune_stage(g, std::move(s), data, cfg.finetune_episodes, fine, log);
    run.stage_done(stage);
    stage = "eval";
    eval_stage(g, s, cfg.eval_episodes, std::nullopt, report, frames);
    run.stage_done(stage);
    stage = "plot";
    auto f = load_frames(frames);
    f.resize(n_plot);
    plot_trajectories(f, g.out / "plots");
    run.stage_done(stage);
  } catch (const std::exception& e) {
    run.finish("failed", stage + ": " + e.what());
    throw;
  }
  return run.finish();
}

}  // namespace otonav::app
