#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "otonav/json_util.hpp"
#include "otonav/net/params.hpp"

namespace otonav::net {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  Json config;  // architecture and training settings that produced the parameters
  ModelParams<float> params;
};

std::string config_digest(const Json& config);

// Binary layout (little endian): magic, version, config JSON, config digest,
// optimizer step, then per block name, shape, values and both moments.
void save_checkpoint(const std::filesystem::path& path, const Json& config, const ModelParams<float>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace otonav::net
