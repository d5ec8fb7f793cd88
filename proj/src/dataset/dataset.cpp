#include "otonav/dataset/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "otonav/orca/orca.hpp"
#include "otonav/random.hpp"

namespace otonav::dataset {
namespace fs = std::filesystem;

namespace {

constexpr const char* kSchema = "otonav.dataset";

void append_array(std::string& out, std::span<const double> values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  out += ']';
}

std::string header_line(const DatasetHeader& h) {
  std::string s = "{\"schema\":\"";
  s += kSchema;
  s += "\",\"version\":" + std::to_string(h.version);
  s += ",\"config_hash\":\"" + h.config_hash + "\"";
  s += ",\"gamma\":" + format_double(h.gamma);
  s += std::string(",\"discounted\":") + (h.discounted ? "true" : "false");
  s += ",\"num_peds\":" + std::to_string(h.num_peds);
  s += ",\"state_dim\":" + std::to_string(h.state_dim);
  s += ",\"time_step\":" + format_double(h.time_step);
  s += '}';
  return s;
}

std::string trajectory_line(const Trajectory& t) {
  std::string s = "{\"seed\":" + std::to_string(t.seed);
  s += ",\"outcome\":\"" + std::string(to_string(t.outcome)) + "\"";
  s += ",\"duration\":" + format_double(t.duration);
  s += ",\"states\":[";
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) s += ',';
    append_array(s, t.state(i));
  }
  s += "],\"actions\":[";
  for (std::size_t i = 0; i < t.actions.size(); ++i) {
    if (i) s += ',';
    const double a[2] = {t.actions[i].x, t.actions[i].y};
    append_array(s, a);
  }
  s += "],\"rewards\":";
  append_array(s, t.rewards);
  s += ",\"rtg\":";
  append_array(s, t.rtg);
  s += '}';
  return s;
}

DatasetHeader parse_header(const Json& j) {
  if (j.value("schema", std::string()) != kSchema) throw DatasetError("line 1: not a dataset header");
  DatasetHeader h;
  h.version = j.at("version").get<int>();
  if (h.version != kDatasetVersion) throw DatasetError("line 1: unsupported dataset version " + std::to_string(h.version));
  h.config_hash = j.at("config_hash").get<std::string>();
  h.gamma = j.at("gamma").get<double>();
  h.discounted = j.at("discounted").get<bool>();
  h.num_peds = j.at("num_peds").get<std::size_t>();
  h.state_dim = j.at("state_dim").get<std::size_t>();
  h.time_step = j.at("time_step").get<double>();
  return h;
}

Trajectory parse_trajectory(const Json& j, const DatasetHeader& h) {
  Trajectory t;
  t.seed = j.at("seed").get<std::uint64_t>();
  t.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  t.duration = j.at("duration").get<double>();
  t.state_dim = h.state_dim;
  const auto& states = j.at("states");
  for (const auto& row : states) {
    if (row.size() != h.state_dim) throw DatasetError("state width mismatch");
    for (const auto& v : row) t.states.push_back(v.get<double>());
  }
  for (const auto& a : j.at("actions")) {
    if (a.size() != 2) throw DatasetError("action width mismatch");
    t.actions.push_back({a[0].get<double>(), a[1].get<double>()});
  }
  t.rewards = j.at("rewards").get<std::vector<double>>();
  t.rtg = j.at("rtg").get<std::vector<double>>();
  const std::size_t n = t.rewards.size();
  if (n == 0) throw DatasetError("empty trajectory");
  if (states.size() != n || t.actions.size() != n || t.rtg.size() != n) throw DatasetError("length mismatch");
  return t;
}

}  // namespace

std::size_t Dataset::transitions() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

std::string config_hash(const sim::SimConfig& sim, const ReturnConfig& ret) {
  Json j = sim;
  j["gamma"] = ret.gamma;
  j["discounted"] = ret.discounted;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

Dataset generate_dataset(std::size_t num_episodes, std::uint64_t seed, const sim::SimConfig& sim,
                         const ReturnConfig& ret) {
  if (sim.robot_visible) throw ConfigError("dataset generation requires an invisible robot");
  if (num_episodes > kMaxCapacity) throw ConfigError("dataset capacity exceeds the replay memory size");
  Dataset d;
  d.header.config_hash = config_hash(sim, ret);
  d.header.gamma = ret.gamma;
  d.header.discounted = ret.discounted;
  d.header.num_peds = sim.num_peds;
  d.header.state_dim = sim::joint_width(sim.num_peds);
  d.header.time_step = sim.time_step;

  sim::CrowdEnv env(sim, orca::make_pedestrians(sim));
  const Controller behavior = [](const sim::CrowdEnv& e, const sim::RobotFrameState&, const Trajectory&) {
    return orca::robot_action(e);
  };
  d.trajectories.reserve(num_episodes);
  for (std::size_t e = 0; e < num_episodes; ++e)
    d.trajectories.push_back(record_episode(env, derive_seed(seed, e), behavior, ret.effective_gamma()));
  return d;
}

DatasetStats compute_stats(const Dataset& d) {
  if (d.trajectories.empty()) throw DatasetError("dataset has no trajectories");
  DatasetStats s;
  std::size_t succ = 0, coll = 0, tout = 0;
  double time_sum = 0.0, reward_sum = 0.0;
  for (const auto& t : d.trajectories) {
    switch (t.outcome) {
      case Outcome::success:
        ++succ;
        time_sum += t.duration;
        break;
      case Outcome::collision: ++coll; break;
      case Outcome::timeout: ++tout; break;
    }
    reward_sum += t.episode_return();
  }
  const double n = static_cast<double>(d.trajectories.size());
  s.success_rate = static_cast<double>(succ) / n;
  s.collision_rate = static_cast<double>(coll) / n;
  s.timeout_rate = static_cast<double>(tout) / n;
  if (succ > 0) s.mean_time = time_sum / static_cast<double>(succ);
  s.mean_reward = reward_sum / n;
  s.capacity = d.trajectories.size();
  return s;
}

void save_dataset(const fs::path& path, const Dataset& d) {
  if (d.trajectories.size() > kMaxCapacity) throw DatasetError("dataset capacity exceeds the replay memory size");
  const fs::path tmp = path.string() + ".tmp";
  try {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot open " + tmp.string() + " for writing");
    out << header_line(d.header) << '\n';
    for (const auto& t : d.trajectories) out << trajectory_line(t) << '\n';
    out.flush();
    if (!out) throw DatasetError("write failed for " + tmp.string());
    out.close();
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

Dataset load_dataset(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      if (!have_header) {
        d.header = parse_header(j);
        have_header = true;
      } else {
        d.trajectories.push_back(parse_trajectory(j, d.header));
      }
    } catch (const DatasetError& e) {
      const std::string msg = e.what();
      throw DatasetError(msg.rfind("line ", 0) == 0 ? msg : "line " + std::to_string(line_no) + ": " + msg);
    } catch (const std::exception& e) {
      throw DatasetError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw DatasetError(path.string() + ": empty dataset file");
  if (d.trajectories.empty()) throw DatasetError(path.string() + ": dataset has no trajectories");
  return d;
}

DatasetStats dataset_stats(const fs::path& path) { return compute_stats(load_dataset(path)); }

Json stats_to_json(const DatasetStats& s) {
  Json j;
  j["success_rate"] = s.success_rate;
  j["collision_rate"] = s.collision_rate;
  j["timeout_rate"] = s.timeout_rate;
  j["mean_time"] = s.mean_time ? Json(*s.mean_time) : Json(nullptr);
  j["mean_reward"] = s.mean_reward;
  j["capacity"] = s.capacity;
  return j;
}

fs::path stats_sidecar_path(const fs::path& dataset_path) { return dataset_path.string() + ".stats.json"; }

void write_stats_sidecar(const fs::path& dataset_path, const DatasetStats& s) {
  const fs::path p = stats_sidecar_path(dataset_path);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + p.string());
  out << stats_to_json(s).dump(2) << '\n';
}

}  // namespace otonav::dataset
