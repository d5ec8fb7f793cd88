#include "otonav/app/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

namespace otonav::app {

namespace fs = std::filesystem;
using dataset::EpisodeFrames;
using sim::Vec2;

namespace {

Json point(Vec2 p) { return Json::array({p.x, p.y}); }
Vec2 read_point(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

const char* const kPedColors[] = {"#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2",
                                  "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

Json frames_to_json(const EpisodeFrames& f) {
  Json robot = Json::array(), peds = Json::array();
  for (const auto& p : f.robot) robot.push_back(point(p));
  for (const auto& frame : f.peds) {
    Json row = Json::array();
    for (const auto& p : frame) row.push_back(point(p));
    peds.push_back(std::move(row));
  }
  return Json{{"seed", f.seed},
              {"time_step", f.time_step},
              {"goal", point(f.robot_goal)},
              {"outcome", std::string(dataset::to_string(f.outcome))},
              {"robot", robot},
              {"peds", peds}};
}

EpisodeFrames frames_from_json(const Json& j) {
  EpisodeFrames f;
  f.seed = j.at("seed").get<std::uint64_t>();
  f.time_step = j.at("time_step").get<double>();
  f.robot_goal = read_point(j.at("goal"));
  f.outcome = dataset::outcome_from_string(j.at("outcome").get<std::string>());
  if (j.contains("robot"))
    for (const auto& p : j.at("robot")) f.robot.push_back(read_point(p));
  if (j.contains("peds"))
    for (const auto& frame : j.at("peds")) {
      std::vector<Vec2> row;
      for (const auto& p : frame) row.push_back(read_point(p));
      f.peds.push_back(std::move(row));
    }
  return f;
}

void save_frames(const fs::path& path, const std::vector<EpisodeFrames>& frames) {
  std::string text;
  for (const auto& f : frames) text += frames_to_json(f).dump() + "\n";
  write_text(path, text);
}

std::vector<EpisodeFrames> load_frames(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PlotError("cannot open " + path.string());
  std::vector<EpisodeFrames> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(frames_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw PlotError("episode " + std::to_string(out.size()) + " in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

void check_frames(const EpisodeFrames& f, std::size_t episode) {
  const std::string who = "episode " + std::to_string(episode) + " (seed " + std::to_string(f.seed) + ")";
  if (f.robot.empty()) throw PlotError(who + ": missing robot positions");
  if (f.peds.size() != f.robot.size())
    throw PlotError(who + ": pedestrian positions missing for " + std::to_string(f.robot.size()) + " steps");
  for (std::size_t t = 0; t < f.peds.size(); ++t)
    if (f.peds[t].size() != f.peds[0].size())
      throw PlotError(who + ": pedestrian positions missing at step " + std::to_string(t));
}

std::string render_svg(const EpisodeFrames& f, std::size_t episode) {
  check_frames(f, episode);
  double lo_x = f.robot_goal.x, hi_x = f.robot_goal.x, lo_y = f.robot_goal.y, hi_y = f.robot_goal.y;
  auto grow = [&](Vec2 p) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  };
  for (auto p : f.robot) grow(p);
  for (const auto& frame : f.peds)
    for (auto p : frame) grow(p);
  const double margin = 1.0;
  lo_x -= margin;
  lo_y -= margin;
  hi_x += margin;
  hi_y += margin;
  const double scale = 60.0;  // px per metre
  const double w = (hi_x - lo_x) * scale, h = (hi_y - lo_y) * scale;
  auto X = [&](double x) { return fmt((x - lo_x) * scale); };
  auto Y = [&](double y) { return fmt((hi_y - y) * scale); };

  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) + "\" viewBox=\"0 0 " +
       fmt(w) + " " + fmt(h) + "\">\n";
  s += "<title>episode " + std::to_string(episode) + " seed " + std::to_string(f.seed) + " " +
       std::string(dataset::to_string(f.outcome)) + "</title>\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const std::size_t m = f.peds[0].size();
  for (std::size_t i = 0; i < m; ++i) {
    const char* color = kPedColors[i % std::size(kPedColors)];
    s += "<polyline id=\"ped" + std::to_string(i) + "\" fill=\"none\" stroke=\"" + color +
         "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < f.peds.size(); ++t) s += (t ? " " : "") + X(f.peds[t][i].x) + "," + Y(f.peds[t][i].y);
    s += "\"/>\n";
    s += "<circle cx=\"" + X(f.peds[0][i].x) + "\" cy=\"" + Y(f.peds[0][i].y) + "\" r=\"4\" fill=\"" + color + "\"/>\n";
  }

  s += "<polyline id=\"robot\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"";
  for (std::size_t t = 0; t < f.robot.size(); ++t) s += (t ? " " : "") + X(f.robot[t].x) + "," + Y(f.robot[t].y);
  s += "\"/>\n";
  for (std::size_t t = 0; t < f.robot.size(); ++t) {
    const std::string ts = fmt(static_cast<double>(t) * f.time_step);
    s += "<circle cx=\"" + X(f.robot[t].x) + "\" cy=\"" + Y(f.robot[t].y) + "\" r=\"2\" fill=\"#d62728\"><title>t=" +
         ts + "</title></circle>\n";
    s += "<text x=\"" + X(f.robot[t].x) + "\" y=\"" + Y(f.robot[t].y) + "\" dx=\"4\" font-size=\"7\">" + ts +
         "</text>\n";
  }

  const double g = 0.15;
  s += "<path id=\"goal\" stroke=\"black\" stroke-width=\"2\" d=\"M" + X(f.robot_goal.x - g) + "," +
       Y(f.robot_goal.y - g) + " L" + X(f.robot_goal.x + g) + "," + Y(f.robot_goal.y + g) + " M" +
       X(f.robot_goal.x - g) + "," + Y(f.robot_goal.y + g) + " L" + X(f.robot_goal.x + g) + "," +
       Y(f.robot_goal.y - g) + "\"/>\n";
  s += "</svg>\n";
  return s;
}

std::string render_csv(const EpisodeFrames& f) {
  std::string s = "step,time,agent,x,y\n";
  for (std::size_t t = 0; t < f.robot.size(); ++t) {
    const std::string head = std::to_string(t) + "," + format_double(static_cast<double>(t) * f.time_step) + ",";
    s += head + "robot," + format_double(f.robot[t].x) + "," + format_double(f.robot[t].y) + "\n";
    if (t < f.peds.size())
      for (std::size_t i = 0; i < f.peds[t].size(); ++i)
        s += head + "ped" + std::to_string(i) + "," + format_double(f.peds[t][i].x) + "," +
             format_double(f.peds[t][i].y) + "\n";
  }
  return s;
}

std::vector<fs::path> plot_trajectories(const std::vector<EpisodeFrames>& frames, const fs::path& dir) {
  for (std::size_t e = 0; e < frames.size(); ++e) check_frames(frames[e], e);
  fs::create_directories(dir);
  std::vector<fs::path> out;
  for (std::size_t e = 0; e < frames.size(); ++e) {
    char name[32];
    std::snprintf(name, sizeof name, "episode_%04zu", e);
    const fs::path svg = dir / (std::string(name) + ".svg"), csv = dir / (std::string(name) + ".csv");
    write_text(svg, render_svg(frames[e], e));
    write_text(csv, render_csv(frames[e]));
    out.push_back(svg);
    out.push_back(csv);
  }
  return out;
}

}  // namespace otonav::app
