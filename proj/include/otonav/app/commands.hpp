#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "otonav/json_util.hpp"
#include "otonav/policy/policy.hpp"
#include "otonav/trainer/trainer.hpp"

namespace otonav::app {

namespace fs = std::filesystem;

// An output that already exists and --force was not given.
class OverwriteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  fs::path out = ".";
  bool force = false;
  bool dry_run = false;
  bool quiet = false;
};

struct Artifact {
  std::string role;
  fs::path path;
  std::string digest;  // FNV-1a of the file bytes, empty until written
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok, failed, dry-run
  std::string error;
  std::vector<std::string> stages;  // completed stages
  std::vector<Artifact> artifacts;
  std::string started, finished;  // UTC, ISO 8601
};

Json to_json(const RunManifest& m);

// Defaults, overlaid with --config, then --seed. Validated.
trainer::TrainConfig load_config(const GlobalOptions& g);
std::string config_hash(const trainer::TrainConfig& cfg);
std::string file_digest(const fs::path& path);

struct GenDataOptions {
  std::optional<std::size_t> episodes;
};
struct PretrainOptions {
  fs::path data;
  std::optional<fs::path> ckpt;  // default <out>/pretrain.ckpt
};
struct FinetuneOptions {
  fs::path ckpt, data;
  std::optional<std::size_t> episodes;
  std::optional<policy::RtgSource> conditioning;
  std::optional<fs::path> out_ckpt;  // default <out>/finetune.ckpt
};
struct EvalCommandOptions {
  fs::path ckpt;
  std::optional<std::size_t> episodes;
  std::optional<policy::RtgSource> conditioning;
  std::optional<fs::path> report;  // default <out>/eval_report.json
  std::optional<fs::path> frames;  // position log for plotting
};
struct PlotOptions {
  fs::path frames;
  std::optional<std::size_t> max_episodes;
};
struct PipelineOptions {
  std::size_t plot_episodes = 4;
};

// Each command checks every planned output up front, refuses to overwrite
// without --force, writes its artifacts and then <out>/<command>.manifest.json.
RunManifest run_gen_data(const GlobalOptions& g, const GenDataOptions& o);
RunManifest run_pretrain(const GlobalOptions& g, const PretrainOptions& o);
RunManifest run_finetune(const GlobalOptions& g, const FinetuneOptions& o);
RunManifest run_eval(const GlobalOptions& g, const EvalCommandOptions& o);
RunManifest run_plot(const GlobalOptions& g, const PlotOptions& o);

// gen-data, pretrain, finetune, eval, plot into <out>; manifest.json last.
// A failing stage stops the chain and the manifest records what was done
// before the error is rethrown.
RunManifest run_pipeline(const GlobalOptions& g, const PipelineOptions& o);

}  // namespace otonav::app
