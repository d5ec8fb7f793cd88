#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "otonav/app/commands.hpp"
#include "otonav/app/plot.hpp"

using namespace otonav;
using namespace otonav::app;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "otonav_test_app" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Robot on the segment (0,-4) -> (0,4) in 8 steps, two static pedestrians.
dataset::EpisodeFrames straight() {
  dataset::EpisodeFrames f;
  f.seed = 12;
  f.time_step = 0.25;
  f.robot_goal = {0.0, 4.0};
  f.outcome = dataset::Outcome::success;
  for (int t = 0; t <= 8; ++t) {
    f.robot.push_back({0.0, -4.0 + t});
    f.peds.push_back({{3.0, 0.0}, {-3.0, 1.0}});
  }
  return f;
}

fs::path tiny_config(const fs::path& dir) {
  const fs::path p = dir / "tiny.json";
  std::ofstream(p) << R"({"dataset_episodes": 6, "max_epochs": 1, "finetune_episodes": 2, "eval_episodes": 2,
    "policy": {"hidden": 16, "heads": 2, "ffn": 32, "layers": 1},
    "rtgp": {"hidden": 16, "heads": 2, "ffn": 32, "head_hidden": 32}})";
  return p;
}

}  // namespace

TEST_CASE("straight path renders as the start-goal segment") {
  const auto f = straight();
  const std::string svg = render_svg(f, 0);
  // With a 1 m margin x spans [-4, 4] and y [-5, 5]; 60 px per metre, y down.
  CHECK(svg.find("id=\"robot\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"240.0000,540.0000 "
                 "240.0000,480.0000") != std::string::npos);
  CHECK(svg.find("240.0000,60.0000\"/>") != std::string::npos);
  CHECK(svg.find("<title>t=2.0000</title>") != std::string::npos);
  CHECK(svg.find("id=\"goal\"") != std::string::npos);
  CHECK(svg.find("id=\"ped1\"") != std::string::npos);

  const std::string csv = render_csv(f);
  const auto rows = std::count(csv.begin(), csv.end(), '\n') - 1;
  CHECK(rows == 9 * 3);
  CHECK(csv.rfind("step,time,agent,x,y\n0,0,robot,0,-4\n", 0) == 0);
}

TEST_CASE("plots are byte-identical on re-render and survive a log round trip") {
  const fs::path dir = fresh_dir("plots");
  const std::vector<dataset::EpisodeFrames> frames{straight(), straight()};
  save_frames(dir / "frames.jsonl", frames);
  const auto back = load_frames(dir / "frames.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(render_svg(back[1], 1) == render_svg(frames[1], 1));
  const auto a = plot_trajectories(back, dir / "a");
  const auto b = plot_trajectories(back, dir / "b");
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(slurp(a[i]) == slurp(b[i]));
}

TEST_CASE("missing positions name the episode") {
  auto f = straight();
  f.peds.pop_back();
  std::vector<dataset::EpisodeFrames> frames{straight(), straight(), f};
  try {
    plot_trajectories(frames, fresh_dir("missing"));
    FAIL("expected PlotError");
  } catch (const PlotError& e) {
    CHECK(std::string(e.what()).find("episode 2") != std::string::npos);
  }
  dataset::EpisodeFrames empty;
  CHECK_THROWS_AS(render_svg(empty, 0), PlotError);
}

TEST_CASE("config loading is strict and the seed flag overrides") {
  const fs::path dir = fresh_dir("config");
  GlobalOptions g;
  g.config = tiny_config(dir);
  g.seed = 42;
  const auto cfg = load_config(g);
  CHECK(cfg.seed == 42);
  CHECK(cfg.policy.hidden == 16);
  g.seed.reset();
  CHECK(config_hash(load_config(g)) != config_hash(cfg));

  std::ofstream(dir / "bad.json") << R"({"polcy": {}})";
  g.config = dir / "bad.json";
  CHECK_THROWS_AS(load_config(g), ConfigError);
  std::ofstream(dir / "broken.json") << "{";
  g.config = dir / "broken.json";
  CHECK_THROWS_AS(load_config(g), ConfigError);
}

TEST_CASE("pipeline dry run, overwrite refusal and determinism") {
  const fs::path dir = fresh_dir("pipeline");
  GlobalOptions g;
  g.config = tiny_config(dir);
  g.quiet = true;
  g.out = dir / "dry";
  g.dry_run = true;
  const RunManifest dry = run_pipeline(g, {});
  CHECK(dry.status == "dry-run");
  CHECK(fs::exists(g.out / "manifest.json"));
  for (const auto& a : dry.artifacts) CHECK_FALSE(fs::exists(a.path));

  g.dry_run = false;
  g.out = dir / "one";
  const RunManifest one = run_pipeline(g, {});
  CHECK(one.status == "ok");
  CHECK(one.stages == std::vector<std::string>{"gen-data", "pretrain", "finetune", "eval", "plot"});
  for (const auto& a : one.artifacts) {
    CHECK(fs::exists(a.path));
    CHECK(a.digest == file_digest(a.path));
  }
  CHECK_THROWS_AS(run_pipeline(g, {}), OverwriteError);
  g.force = true;
  CHECK(run_pipeline(g, {}).status == "ok");

  g.force = false;
  g.out = dir / "two";
  const RunManifest two = run_pipeline(g, {});
  REQUIRE(two.artifacts.size() == one.artifacts.size());
  for (std::size_t i = 0; i < one.artifacts.size(); ++i) CHECK(one.artifacts[i].digest == two.artifacts[i].digest);
}

TEST_CASE("a failing stage halts the chain and the manifest records it") {
  const fs::path dir = fresh_dir("failing");
  GlobalOptions g;
  g.config = tiny_config(dir);
  g.quiet = true;
  g.out = dir / "run";
  // The dataset path is occupied by a directory, so gen-data cannot write it.
  fs::create_directories(g.out / "dataset.jsonl");
  g.force = true;
  CHECK_THROWS(run_pipeline(g, {}));
  const Json m = Json::parse(slurp(g.out / "manifest.json"));
  CHECK(m["status"] == "failed");
  CHECK(m["stages"].empty());
  CHECK(m["error"].get<std::string>().rfind("gen-data", 0) == 0);
}

TEST_CASE("single commands chain through their artifacts") {
  const fs::path dir = fresh_dir("commands");
  GlobalOptions g;
  g.config = tiny_config(dir);
  g.quiet = true;
  g.out = dir;
  run_gen_data(g, {});
  run_pretrain(g, {dir / "dataset.jsonl", {}});
  FinetuneOptions f;
  f.ckpt = dir / "pretrain.ckpt";
  f.data = dir / "dataset.jsonl";
  f.episodes = 1;
  run_finetune(g, f);
  EvalCommandOptions e;
  e.ckpt = dir / "finetune.ckpt";
  e.episodes = 2;
  e.frames = dir / "frames.jsonl";
  run_eval(g, e);
  const auto report = trainer::report_from_json(Json::parse(slurp(dir / "eval_report.json")));
  CHECK(report.episodes == 2);
  const RunManifest p = run_plot(g, {dir / "frames.jsonl", 1});
  CHECK(p.artifacts.size() == 2);
  CHECK(fs::exists(dir / "gen-data.manifest.json"));
  CHECK(fs::exists(dir / "plot.manifest.json"));

  // Architecture changes against a checkpoint are rejected.
  std::ofstream(dir / "wide.json") << R"({"policy": {"hidden": 64}})";
  GlobalOptions w = g;
  w.config = dir / "wide.json";
  w.force = true;
  CHECK_THROWS_AS(run_eval(w, e), ConfigError);
}
