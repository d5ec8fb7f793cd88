#include "otonav/orca/orca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace otonav::orca {
namespace {

constexpr double kEpsilon = 1e-9;

// Line form used by the incremental LP: permitted side is to the left of
// `direction`.
struct Line {
  Vec2 point;
  Vec2 direction;
};

Line to_line(const HalfPlane& h) { return {h.point, {h.normal.y, -h.normal.x}}; }

bool lp1(std::span<const Line> lines, std::size_t line_no, double radius, const Vec2& opt, bool direction_opt,
         Vec2& result) {
  const Line& l = lines[line_no];
  const double dot_product = dot(l.point, l.direction);
  const double discriminant = dot_product * dot_product + radius * radius - abs_sq(l.point);
  if (discriminant < 0.0) return false;  // speed disc misses the line entirely

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot_product - sqrt_disc;
  double t_right = -dot_product + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = det(l.direction, lines[i].direction);
    const double numerator = det(lines[i].direction, l.point - lines[i].point);
    if (std::fabs(denominator) <= kEpsilon) {
      if (numerator < 0.0) return false;  // parallel and pointing away
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0)
      t_right = std::min(t_right, t);
    else
      t_left = std::max(t_left, t);
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    result = dot(opt, l.direction) > 0.0 ? l.point + t_right * l.direction : l.point + t_left * l.direction;
  } else {
    const double t = std::clamp(dot(l.direction, opt - l.point), t_left, t_right);
    result = l.point + t * l.direction;
  }
  return true;
}

std::size_t lp2(std::span<const Line> lines, double radius, const Vec2& opt, bool direction_opt, Vec2& result) {
  if (direction_opt)
    result = opt * radius;
  else if (abs_sq(opt) > radius * radius)
    result = normalize(opt) * radius;
  else
    result = opt;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) > 0.0) {
      const Vec2 previous = result;
      if (!lp1(lines, i, radius, opt, direction_opt, result)) {
        result = previous;
        return i;
      }
    }
  }
  return lines.size();
}

void lp3(std::span<const Line> lines, std::size_t begin_line, double radius, Vec2& result) {
  double distance = 0.0;
  for (std::size_t i = begin_line; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) <= distance) continue;

    std::vector<Line> projected;
    projected.reserve(i);
    for (std::size_t j = 0; j < i; ++j) {
      Line line;
      const double determinant = det(lines[i].direction, lines[j].direction);
      if (std::fabs(determinant) <= kEpsilon) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;  // same direction
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (det(lines[j].direction, lines[i].point - lines[j].point) / determinant) * lines[i].direction;
      }
      line.direction = normalize(lines[j].direction - lines[i].direction);
      projected.push_back(line);
    }

    const Vec2 previous = result;
    if (lp2(projected, radius, Vec2{-lines[i].direction.y, lines[i].direction.x}, true, result) <
        projected.size()) {
      // Only reachable through round-off; the previous result is feasible.
      result = previous;
    }
    distance = det(lines[i].direction, lines[i].point - result);
  }
}

}  // namespace

std::vector<HalfPlane> orca_halfplanes(const AgentState& self, std::span<const AgentState> neighbors,
                                       const OrcaConfig& cfg, double time_step) {
  const double self_radius = self.radius + cfg.safety_space;
  const double inv_horizon = 1.0 / cfg.time_horizon;
  const double range_sq = cfg.neighbor_dist * cfg.neighbor_dist;

  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    const double d2 = abs_sq(neighbors[k].position - self.position);
    if (d2 < range_sq) order.emplace_back(d2, k);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<HalfPlane> planes;
  planes.reserve(order.size());
  for (const auto& [dist_sq, k] : order) {
    const AgentState& other = neighbors[k];
    const Vec2 rel_pos = other.position - self.position;
    const Vec2 rel_vel = self.velocity - other.velocity;
    const double combined = self_radius + other.radius;
    const double combined_sq = combined * combined;

    Vec2 direction;
    Vec2 u;
    if (dist_sq > combined_sq) {
      const Vec2 w = rel_vel - inv_horizon * rel_pos;
      const double w_len_sq = abs_sq(w);
      const double dot1 = dot(w, rel_pos);
      if (dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq) {
        // Closest boundary point lies on the cut-off circle.
        const double w_len = std::sqrt(w_len_sq);
        const Vec2 unit_w = w / w_len;
        direction = {unit_w.y, -unit_w.x};
        u = (combined * inv_horizon - w_len) * unit_w;
      } else {
        const double leg = std::sqrt(dist_sq - combined_sq);
        if (det(rel_pos, w) > 0.0) {
          direction = Vec2{rel_pos.x * leg - rel_pos.y * combined, rel_pos.x * combined + rel_pos.y * leg} / dist_sq;
        } else {
          direction =
              -(Vec2{rel_pos.x * leg + rel_pos.y * combined, -rel_pos.x * combined + rel_pos.y * leg} / dist_sq);
        }
        const double dot2 = dot(rel_vel, direction);
        u = dot2 * direction - rel_vel;
      }
    } else {
      // Overlapping: resolve within one time step.
      const double inv_step = 1.0 / time_step;
      const Vec2 w = rel_vel - inv_step * rel_pos;
      const double w_len = norm(w);
      const Vec2 unit_w = w_len > 0.0 ? w / w_len : Vec2{-rel_pos.x, -rel_pos.y} / std::sqrt(dist_sq + 1e-300);
      direction = {unit_w.y, -unit_w.x};
      u = (combined * inv_step - w_len) * unit_w;
    }
    planes.push_back({self.velocity + 0.5 * u, Vec2{-direction.y, direction.x}});
  }
  return planes;
}

Vec2 solve_velocity(std::span<const HalfPlane> halfplanes, const Vec2& preferred, double max_speed) {
  std::vector<Line> lines;
  lines.reserve(halfplanes.size());
  for (const auto& h : halfplanes) lines.push_back(to_line(h));
  Vec2 result;
  const std::size_t fail = lp2(lines, max_speed, preferred, false, result);
  if (fail < lines.size()) lp3(lines, fail, max_speed, result);
  return result;
}

Vec2 orca_action(std::size_t agent_index, std::span<const AgentState> world, const OrcaConfig& cfg,
                 double time_step) {
  const AgentState& self = world[agent_index];
  std::vector<AgentState> neighbors;
  neighbors.reserve(world.size());
  for (std::size_t k = 0; k < world.size(); ++k)
    if (k != agent_index) neighbors.push_back(world[k]);

  const auto planes = orca_halfplanes(self, neighbors, cfg, time_step);
  Vec2 preferred = self.v_pref * normalize(self.goal - self.position);
  if (planes.empty()) {
    if (norm(preferred) > cfg.max_speed) preferred = normalize(preferred) * cfg.max_speed;
    return preferred;
  }
  preferred = sim::rotate(preferred, kSymmetryBreak);
  Vec2 v = solve_velocity(planes, preferred, cfg.max_speed);
  const double speed = norm(v);
  if (speed > cfg.max_speed) v = v * (cfg.max_speed / speed);
  return v;
}

OrcaConfig make_config(const sim::OrcaParams& p, double max_speed) {
  return {p.time_horizon, p.neighbor_dist, p.safety_space, max_speed};
}

std::vector<Vec2> OrcaPedestrians::velocities(std::span<const AgentState> peds, const AgentState* robot,
                                              double time_step) const {
  std::vector<AgentState> world(peds.begin(), peds.end());
  if (robot) world.push_back(*robot);
  std::vector<Vec2> out;
  out.reserve(peds.size());
  for (std::size_t i = 0; i < peds.size(); ++i) {
    OrcaConfig c = cfg_;
    c.max_speed = peds[i].v_pref;
    out.push_back(orca_action(i, world, c, time_step));
  }
  return out;
}

std::shared_ptr<const sim::PedestrianController> make_pedestrians(const sim::SimConfig& cfg) {
  return std::make_shared<OrcaPedestrians>(make_config(cfg.ped_orca, cfg.v_pref));
}

sim::Action robot_action(const sim::CrowdEnv& env) {
  std::vector<AgentState> world;
  world.reserve(env.pedestrians().size() + 1);
  world.push_back(env.robot());
  world.insert(world.end(), env.pedestrians().begin(), env.pedestrians().end());
  const auto& cfg = env.config();
  return orca_action(0, world, make_config(cfg.robot_orca, cfg.v_max), cfg.time_step);
}

}  // namespace otonav::orca
