#include <iostream>

#include "CLI11.hpp"
#include "otonav/app/commands.hpp"
#include "otonav/app/plot.hpp"

using namespace otonav;
using namespace otonav::app;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::optional<policy::RtgSource> parse_conditioning(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto src = policy::rtg_source_from_string(s);
  if (src == policy::RtgSource::labels) throw ConfigError("--conditioning must be rtgp or fixed");
  return src;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd navigation: offline pre-training and online fine-tuning of a return-conditioned policy"};
  app.require_subcommand(1);

  GlobalOptions g;
  std::string config, seed_text;
  app.add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed_text, "Global seed; stages derive their streams from it");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--force", g.force, "Overwrite existing outputs");
  app.add_flag("--dry-run", g.dry_run, "Write the manifest only");
  app.add_flag("--quiet", g.quiet, "No progress output");

  GenDataOptions gen;
  auto* c_gen = app.add_subcommand("gen-data", "Roll out the behavior policy and write a labeled dataset");
  c_gen->add_option("--episodes", gen.episodes, "Number of episodes (default: config)");

  PretrainOptions pre;
  auto* c_pre = app.add_subcommand("pretrain", "Offline training of the policy and the return predictor");
  c_pre->add_option("--data", pre.data, "Dataset file")->required()->check(CLI::ExistingFile);
  c_pre->add_option("--ckpt-out", pre.ckpt, "Checkpoint path (default <out>/pretrain.ckpt)");

  FinetuneOptions fine;
  std::string fine_cond;
  auto* c_fine = app.add_subcommand("finetune", "Online fine-tuning from a pre-trained checkpoint");
  c_fine->add_option("--ckpt", fine.ckpt, "Pre-trained checkpoint")->required()->check(CLI::ExistingFile);
  c_fine->add_option("--data", fine.data, "Offline dataset used for pre-training")->required()->check(CLI::ExistingFile);
  c_fine->add_option("--episodes", fine.episodes, "Episodes (default: config)");
  c_fine->add_option("--conditioning", fine_cond, "rtgp or fixed");
  c_fine->add_option("--ckpt-out", fine.out_ckpt, "Checkpoint path (default <out>/finetune.ckpt)");

  EvalCommandOptions ev;
  std::string ev_cond;
  auto* c_eval = app.add_subcommand("eval", "Greedy evaluation with an invisible robot");
  c_eval->add_option("--ckpt", ev.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--episodes", ev.episodes, "Episodes (default: config)");
  c_eval->add_option("--conditioning", ev_cond, "rtgp or fixed (default: checkpoint)");
  c_eval->add_option("--report", ev.report, "Report path (default <out>/eval_report.json)");
  c_eval->add_option("--frames", ev.frames, "Also write per-step positions for plotting");

  PlotOptions plot;
  auto* c_plot = app.add_subcommand("plot", "SVG and CSV trajectory figures from an evaluation position log");
  c_plot->add_option("--frames", plot.frames, "Position log written by eval --frames")->required();
  c_plot->add_option("--max-episodes", plot.max_episodes, "Only the first N episodes");

  PipelineOptions pipe;
  auto* c_pipe = app.add_subcommand("pipeline", "gen-data, pretrain, finetune, eval and plot in one directory");
  c_pipe->add_option("--plot-episodes", pipe.plot_episodes, "Episodes to draw");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (!config.empty()) g.config = config;
    if (!seed_text.empty()) {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(seed_text, &used);
      if (used != seed_text.size()) throw std::invalid_argument("trailing characters");
      g.seed = v;
    }
  } catch (const std::exception&) {
    std::cerr << "error: --seed must be a non-negative integer\n";
    return kExitConfig;
  }

  try {
    RunManifest m;
    if (*c_gen) m = run_gen_data(g, gen);
    else if (*c_pre) m = run_pretrain(g, pre);
    else if (*c_fine) {
      fine.conditioning = parse_conditioning(fine_cond);
      m = run_finetune(g, fine);
    } else if (*c_eval) {
      ev.conditioning = parse_conditioning(ev_cond);
      m = run_eval(g, ev);
    } else if (*c_plot) m = run_plot(g, plot);
    else m = run_pipeline(g, pipe);
    if (!g.quiet) std::cerr << m.command << ": " << m.status << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
