#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include <json.hpp>

#include "planground/errors.hpp"
#include "planground/geometry.hpp"
#include "planground/image.hpp"
#include "planground/util.hpp"

namespace planground {

// Top-down map with obstacle boxes treated as do-not-enter zones.
struct NavMap {
  int width = 640;
  int height = 480;
  int cell = 8;  // pixels per grid cell
  std::vector<BoundingBox> obstacles;

  int cols() const { return (width + cell - 1) / cell; }
  int rows() const { return (height + cell - 1) / cell; }

  void validate() const {
    if (cell < 1) throw Error(Errc::validation_error, "nav map cell must be >= 1 px");
    for (const auto& b : obstacles)
      if (b.min.x < 0 || b.min.y < 0 || b.max.x > width || b.max.y > height || !b.valid())
        throw Error(Errc::validation_error, "obstacle outside canvas: " + box_to_string(b));
  }
};

struct NavPath {
  std::vector<PixelCoord> waypoints;
  double length = 0.0;  // grid length (straight steps 1, diagonal sqrt 2)
};

namespace detail {

// Half-open overlap test between a grid cell and an (optionally inflated)
// obstacle box.
inline bool cell_blocked(const NavMap& map, int cx, int cy, double inflate) {
  const double x0 = cx * map.cell, y0 = cy * map.cell;
  const double x1 = x0 + map.cell, y1 = y0 + map.cell;
  for (const auto& b : map.obstacles) {
    const double bx0 = b.min.x - inflate, by0 = b.min.y - inflate;
    const double bx1 = b.max.x + inflate, by1 = b.max.y + inflate;
    if (x0 < bx1 && bx0 < x1 && y0 < by1 && by0 < y1) return true;
  }
  return false;
}

inline bool point_in_any_obstacle(const NavMap& map, const PixelCoord& p) {
  for (const auto& b : map.obstacles)
    if (p.x >= b.min.x && p.x < b.max.x && p.y >= b.min.y && p.y < b.max.y) return true;
  return false;
}

inline double octile(int dx, int dy) {
  dx = std::abs(dx);
  dy = std::abs(dy);
  return std::max(dx, dy) + (M_SQRT2 - 1.0) * std::min(dx, dy);
}

}  // namespace detail

// A* over the 8-connected cell grid with the octile-distance heuristic.
// Cells overlapping any obstacle box are blocked. Ties break by lower f,
// then lower h, then lexicographic (row, column) order, which pins the
// returned path deterministically.
inline NavPath plan_path(const NavMap& map, const PixelCoord& start, const PixelCoord& goal,
                         double inflate = 0.0) {
  map.validate();
  const int cols = map.cols(), rows = map.rows();
  const auto cell_of = [&](const PixelCoord& p) {
    return std::pair<int, int>{p.x / map.cell, p.y / map.cell};
  };
  const auto [sx, sy] = cell_of(start);
  const auto [gx, gy] = cell_of(goal);
  if (start.x < 0 || start.y < 0 || start.x >= map.width || start.y >= map.height ||
      goal.x < 0 || goal.y < 0 || goal.x >= map.width || goal.y >= map.height)
    throw Error(Errc::start_or_goal_blocked, "start or goal outside the map");
  if (detail::point_in_any_obstacle(map, start) || detail::cell_blocked(map, sx, sy, inflate))
    throw Error(Errc::start_or_goal_blocked, "start " + point_to_string(start) + " is blocked");
  if (detail::point_in_any_obstacle(map, goal) || detail::cell_blocked(map, gx, gy, inflate))
    throw Error(Errc::start_or_goal_blocked, "goal " + point_to_string(goal) + " is blocked");

  struct Node {
    double f, h;
    int y, x;
    bool operator>(const Node& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      if (y != o.y) return y > o.y;
      return x > o.x;
    }
  };

  const auto idx = [&](int x, int y) { return std::size_t(y) * cols + x; };
  std::vector<double> g(std::size_t(cols) * rows, 1e18);
  std::vector<int> parent(std::size_t(cols) * rows, -1);
  std::vector<char> closed(std::size_t(cols) * rows, 0);
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;

  g[idx(sx, sy)] = 0.0;
  open.push({detail::octile(gx - sx, gy - sy), detail::octile(gx - sx, gy - sy), sy, sx});

  static constexpr int dx8[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
  static constexpr int dy8[8] = {-1, -1, -1, 0, 0, 1, 1, 1};

  while (!open.empty()) {
    const Node node = open.top();
    open.pop();
    const int x = node.x, y = node.y;
    if (closed[idx(x, y)]) continue;
    closed[idx(x, y)] = 1;
    if (x == gx && y == gy) break;
    for (int k = 0; k < 8; ++k) {
      const int nx = x + dx8[k], ny = y + dy8[k];
      if (nx < 0 || ny < 0 || nx >= cols || ny >= rows) continue;
      if (closed[idx(nx, ny)] || detail::cell_blocked(map, nx, ny, inflate)) continue;
      const double step = (dx8[k] != 0 && dy8[k] != 0) ? M_SQRT2 : 1.0;
      const double cand = g[idx(x, y)] + step;
      if (cand < g[idx(nx, ny)] - 1e-12) {
        g[idx(nx, ny)] = cand;
        parent[idx(nx, ny)] = static_cast<int>(idx(x, y));
        const double h = detail::octile(gx - nx, gy - ny);
        open.push({cand + h, h, ny, nx});
      }
    }
  }

  if (!closed[idx(gx, gy)])
    throw Error(Errc::no_path, "no collision-free path from " + point_to_string(start) + " to " +
                                   point_to_string(goal));

  std::vector<std::pair<int, int>> cells;
  for (int at = static_cast<int>(idx(gx, gy)); at >= 0; at = parent[std::size_t(at)]) {
    cells.push_back({at % cols, at / cols});
    if (parent[std::size_t(at)] < 0) break;
  }
  std::reverse(cells.begin(), cells.end());

  NavPath path;
  path.length = g[idx(gx, gy)];
  for (const auto& [cx, cy] : cells)
    path.waypoints.push_back({cx * map.cell + map.cell / 2, cy * map.cell + map.cell / 2});
  path.waypoints.front() = start;
  path.waypoints.back() = goal;
  return path;
}

// Feasible robot position near a target box: candidates one clearance
// outside each face, ranked by reachable path length from the robot; the
// result is never inside the box.
inline PixelCoord approach_point(const BoundingBox& target_box, const PixelCoord& robot,
                                 const NavMap& map, double clearance, double inflate = 0.0) {
  const Vec2 c = target_box.center();
  const int cl = static_cast<int>(std::lround(clearance));
  const std::vector<PixelCoord> candidates = {
      {target_box.min.x - cl, int(std::lround(c.y))},  // left face
      {target_box.max.x + cl, int(std::lround(c.y))},  // right face
      {int(std::lround(c.x)), target_box.min.y - cl},  // top face
      {int(std::lround(c.x)), target_box.max.y + cl},  // bottom face
  };

  const PixelCoord* best = nullptr;
  double best_len = 0.0;
  for (const auto& cand : candidates) {
    if (cand.x < 0 || cand.y < 0 || cand.x >= map.width || cand.y >= map.height) continue;
    if (target_box.contains(cand)) continue;
    try {
      const NavPath p = plan_path(map, robot, cand, inflate);
      if (!best || p.length < best_len) {
        best = &cand;
        best_len = p.length;
      }
    } catch (const Error&) {
      continue;  // blocked or unreachable candidate
    }
  }
  if (!best)
    throw Error(Errc::unreachable, "no reachable approach point around " +
                                       box_to_string(target_box));
  return *best;
}

// ---------------------------------------------------------------------------
// Map file I/O and overlays
// ---------------------------------------------------------------------------

inline NavMap load_nav_map(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, path + ": " + e.what());
  }
  NavMap map;
  try {
    map.width = j.at("width").get<int>();
    map.height = j.at("height").get<int>();
    map.cell = j.value("cell", 8);
    for (const auto& jb : j.at("obstacles"))
      map.obstacles.push_back(make_box(jb.at(0).get<int>(), jb.at(1).get<int>(),
                                       jb.at(2).get<int>(), jb.at(3).get<int>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, path + ": " + e.what());
  }
  map.validate();
  return map;
}

inline nlohmann::json nav_path_to_json(const NavPath& path) {
  nlohmann::json j;
  j["length"] = path.length;
  j["waypoints"] = nlohmann::json::array();
  for (const auto& p : path.waypoints) j["waypoints"].push_back({p.x, p.y});
  return j;
}

inline RasterImage render_nav_overlay(const NavMap& map, const NavPath& path) {
  RasterImage img(map.width, map.height, Color{235, 235, 235});
  for (const auto& b : map.obstacles)
    fill_rect(img, BoundingBox{{b.min.x, b.min.y}, {b.max.x - 1, b.max.y - 1}},
              Color{120, 120, 120});
  for (std::size_t i = 1; i < path.waypoints.size(); ++i)
    draw_line(img, path.waypoints[i - 1], path.waypoints[i], Color{220, 50, 47});
  if (!path.waypoints.empty()) {
    fill_disk(img, path.waypoints.front(), 5, Color{64, 160, 43});
    fill_disk(img, path.waypoints.back(), 5, Color{38, 96, 215});
  }
  return img;
}

}  // namespace planground
