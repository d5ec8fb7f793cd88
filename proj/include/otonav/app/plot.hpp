#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "otonav/dataset/trajectory.hpp"
#include "otonav/json_util.hpp"

namespace otonav::app {

class PlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Episode position logs, one JSON object per line.
Json frames_to_json(const dataset::EpisodeFrames& f);
dataset::EpisodeFrames frames_from_json(const Json& j);
void save_frames(const std::filesystem::path& path, const std::vector<dataset::EpisodeFrames>& frames);
std::vector<dataset::EpisodeFrames> load_frames(const std::filesystem::path& path);

// Throws PlotError naming `episode` when positions are missing or ragged.
void check_frames(const dataset::EpisodeFrames& f, std::size_t episode);

// Robot path with a timestamp at every step, pedestrian paths, goal marker.
std::string render_svg(const dataset::EpisodeFrames& f, std::size_t episode);
// step,time,agent,x,y with one row per agent per step (robot first).
std::string render_csv(const dataset::EpisodeFrames& f);

// Writes episode_NNNN.svg/.csv for each log into `dir`; returns the paths.
std::vector<std::filesystem::path> plot_trajectories(const std::vector<dataset::EpisodeFrames>& frames,
                                                     const std::filesystem::path& dir);

}  // namespace otonav::app
