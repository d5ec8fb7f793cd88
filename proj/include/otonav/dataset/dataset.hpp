#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "otonav/dataset/trajectory.hpp"
#include "otonav/json_util.hpp"
#include "otonav/sim/config.hpp"

namespace otonav::dataset {

inline constexpr int kDatasetVersion = 1;
inline constexpr std::size_t kMaxCapacity = 100000;

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReturnConfig {
  double gamma = 0.99;
  bool discounted = true;  // false: undiscounted returns, gamma ignored

  double effective_gamma() const { return discounted ? gamma : 1.0; }
};

struct DatasetHeader {
  int version = kDatasetVersion;
  std::string config_hash;
  double gamma = 0.99;
  bool discounted = true;
  std::size_t num_peds = 0;
  std::size_t state_dim = 0;
  double time_step = 0.25;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Trajectory> trajectories;

  std::size_t transitions() const;
};

struct DatasetStats {
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  // Over successful episodes only; empty without successes.
  std::optional<double> mean_time;
  // Mean episode return G_0 under the dataset's return convention.
  double mean_reward = 0.0;
  std::size_t capacity = 0;
};

std::string config_hash(const sim::SimConfig& sim, const ReturnConfig& ret);

// Rolls out the ORCA behavior policy against pedestrians that cannot see the
// robot. Episode e uses scenario seed derive_seed(seed, e).
Dataset generate_dataset(std::size_t num_episodes, std::uint64_t seed, const sim::SimConfig& sim,
                         const ReturnConfig& ret);

DatasetStats compute_stats(const Dataset& d);

// JSON Lines: one header object, then one trajectory per line. Written to a
// temporary file and renamed into place; the temporary is removed on failure.
void save_dataset(const std::filesystem::path& path, const Dataset& d);
Dataset load_dataset(const std::filesystem::path& path);

DatasetStats dataset_stats(const std::filesystem::path& path);

Json stats_to_json(const DatasetStats& s);
void write_stats_sidecar(const std::filesystem::path& dataset_path, const DatasetStats& s);
std::filesystem::path stats_sidecar_path(const std::filesystem::path& dataset_path);

}  // namespace otonav::dataset
