#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "planground/errors.hpp"
#include "planground/geometry.hpp"
#include "planground/image.hpp"
#include "planground/util.hpp"

namespace planground {

using json = nlohmann::json;

enum class ObjectKind { circle, rectangle, star, polygon, region, container };

inline std::string kind_name(ObjectKind k) {
  switch (k) {
    case ObjectKind::circle: return "circle";
    case ObjectKind::rectangle: return "rectangle";
    case ObjectKind::star: return "star";
    case ObjectKind::polygon: return "polygon";
    case ObjectKind::region: return "region";
    case ObjectKind::container: return "container";
  }
  return "circle";
}

inline ObjectKind kind_from_name(const std::string& s) {
  if (s == "circle") return ObjectKind::circle;
  if (s == "rectangle") return ObjectKind::rectangle;
  if (s == "star") return ObjectKind::star;
  if (s == "polygon") return ObjectKind::polygon;
  if (s == "region") return ObjectKind::region;
  if (s == "container") return ObjectKind::container;
  throw Error(Errc::parse_error, "unknown object kind '" + s + "'");
}

// Fixed named-color table; goal checking and rendering both resolve through
// it so color identity is deterministic.
inline const std::vector<std::pair<std::string, Color>>& color_table() {
  static const std::vector<std::pair<std::string, Color>> table = {
      {"red", {220, 50, 47}},     {"green", {64, 160, 43}},   {"blue", {38, 96, 215}},
      {"orange", {235, 140, 20}}, {"purple", {130, 60, 180}}, {"yellow", {230, 200, 30}},
      {"grey", {128, 128, 128}},  {"black", {20, 20, 20}},    {"white", {245, 245, 245}},
      {"brown", {130, 85, 40}},   {"pink", {235, 130, 180}},  {"cyan", {40, 190, 200}},
      {"magenta", {200, 40, 160}}, {"teal", {20, 130, 130}},  {"navy", {25, 35, 110}},
      {"lime", {150, 220, 40}},
  };
  return table;
}

inline Color resolve_color(const std::string& name) {
  for (const auto& [n, c] : color_table())
    if (n == name) return c;
  throw Error(Errc::validation_error, "unknown color '" + name + "'");
}

struct SceneObject {
  std::string id;
  ObjectKind kind = ObjectKind::circle;
  std::string color = "grey";
  PixelCoord center;
  Vec2 size;                   // radius (x==y) for circles, half-extents otherwise
  double rotation = 0.0;       // degrees, clockwise on screen
  double height_mm = 20.0;     // synthetic-depth height above the mat
  bool has_lid = false;
  std::optional<std::string> lid_of;
};

enum class GoalKind { place_in_region, place_in_container, push_into_region, ordering, trajectory_trace };

inline std::string goal_kind_name(GoalKind k) {
  switch (k) {
    case GoalKind::place_in_region: return "place_in_region";
    case GoalKind::place_in_container: return "place_in_container";
    case GoalKind::push_into_region: return "push_into_region";
    case GoalKind::ordering: return "ordering";
    case GoalKind::trajectory_trace: return "trajectory_trace";
  }
  return "place_in_region";
}

inline GoalKind goal_kind_from_name(const std::string& s) {
  if (s == "place_in_region") return GoalKind::place_in_region;
  if (s == "place_in_container") return GoalKind::place_in_container;
  if (s == "push_into_region") return GoalKind::push_into_region;
  if (s == "ordering") return GoalKind::ordering;
  if (s == "trajectory_trace") return GoalKind::trajectory_trace;
  throw Error(Errc::parse_error, "unknown goal kind '" + s + "'");
}

struct GoalSpec {
  GoalKind kind = GoalKind::place_in_region;
  std::map<std::string, std::string> bindings;  // object id -> target id
  double tolerance = 0.0;                       // pixels
};

struct Scene {
  int width = 640;
  int height = 480;
  std::uint64_t seed = 0;
  std::vector<SceneObject> objects;
  GoalSpec goal;

  const SceneObject* find(const std::string& id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }

  SceneObject* find(const std::string& id) {
    for (auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }

  const SceneObject& get(const std::string& id) const {
    if (const auto* o = find(id)) return *o;
    throw Error(Errc::unknown_object, "no object '" + id + "' in scene");
  }
};

// ---------------------------------------------------------------------------
// Footprint geometry
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Vec2> star_vertices(const SceneObject& o) {
  // five-pointed star as a 10-vertex polygon, alternating outer/inner radius
  std::vector<Vec2> v;
  const double inner = 0.382 * o.size.x;
  for (int k = 0; k < 5; ++k) {
    const double a_outer = (-90.0 + 72.0 * k + o.rotation) * M_PI / 180.0;
    const double a_inner = (-90.0 + 36.0 + 72.0 * k + o.rotation) * M_PI / 180.0;
    v.push_back({o.center.x + o.size.x * std::cos(a_outer), o.center.y + o.size.x * std::sin(a_outer)});
    v.push_back({o.center.x + inner * std::cos(a_inner), o.center.y + inner * std::sin(a_inner)});
  }
  return v;
}

inline std::vector<Vec2> pentagon_vertices(const SceneObject& o) {
  std::vector<Vec2> v;
  for (int k = 0; k < 5; ++k) {
    const double a = (-90.0 + 72.0 * k + o.rotation) * M_PI / 180.0;
    v.push_back({o.center.x + o.size.x * std::cos(a), o.center.y + o.size.x * std::sin(a)});
  }
  return v;
}

inline bool point_in_polygon(const std::vector<Vec2>& poly, double px, double py) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const bool crosses = (poly[i].y > py) != (poly[j].y > py);
    if (crosses) {
      const double xint = poly[j].x + (py - poly[j].y) / (poly[i].y - poly[j].y) * (poly[i].x - poly[j].x);
      if (px < xint) inside = !inside;
    }
  }
  return inside;
}

}  // namespace detail

inline bool object_footprint_contains(const SceneObject& o, double px, double py) {
  const double dx = px - o.center.x;
  const double dy = py - o.center.y;
  switch (o.kind) {
    case ObjectKind::circle:
      return dx * dx + dy * dy <= o.size.x * o.size.x;
    case ObjectKind::rectangle:
    case ObjectKind::region:
    case ObjectKind::container: {
      const double a = -o.rotation * M_PI / 180.0;
      const double u = dx * std::cos(a) - dy * std::sin(a);
      const double v = dx * std::sin(a) + dy * std::cos(a);
      return std::abs(u) <= o.size.x && std::abs(v) <= o.size.y;
    }
    case ObjectKind::star:
      return detail::point_in_polygon(detail::star_vertices(o), px, py);
    case ObjectKind::polygon:
      return detail::point_in_polygon(detail::pentagon_vertices(o), px, py);
  }
  return false;
}

// Conservative outer bound used as the scan window for exact boxes.
inline BoundingBox object_outer_bound(const SceneObject& o) {
  switch (o.kind) {
    case ObjectKind::circle: {
      const int r = static_cast<int>(std::ceil(o.size.x));
      return {{o.center.x - r, o.center.y - r}, {o.center.x + r, o.center.y + r}};
    }
    case ObjectKind::rectangle:
    case ObjectKind::region:
    case ObjectKind::container: {
      const double a = o.rotation * M_PI / 180.0;
      const double hx = o.size.x * std::abs(std::cos(a)) + o.size.y * std::abs(std::sin(a));
      const double hy = o.size.x * std::abs(std::sin(a)) + o.size.y * std::abs(std::cos(a));
      return {{static_cast<int>(std::floor(o.center.x - hx)), static_cast<int>(std::floor(o.center.y - hy))},
              {static_cast<int>(std::ceil(o.center.x + hx)), static_cast<int>(std::ceil(o.center.y + hy))}};
    }
    case ObjectKind::star:
    case ObjectKind::polygon: {
      const int r = static_cast<int>(std::ceil(o.size.x));
      return {{o.center.x - r, o.center.y - r}, {o.center.x + r, o.center.y + r}};
    }
  }
  return {{0, 0}, {1, 1}};
}

// Tight axis-aligned box of the rendered footprint. Circles and unrotated
// rectangle-family objects are closed form; everything else scans pixel
// membership within the outer bound.
inline BoundingBox object_bbox(const Scene& scene, const std::string& id) {
  const SceneObject& o = scene.get(id);
  const bool axis_aligned = std::fmod(std::abs(o.rotation), 360.0) == 0.0;
  if (o.kind == ObjectKind::circle) {
    const int r = static_cast<int>(std::lround(o.size.x));
    return {{o.center.x - r, o.center.y - r}, {o.center.x + r, o.center.y + r}};
  }
  if (axis_aligned && o.kind != ObjectKind::star && o.kind != ObjectKind::polygon) {
    return {{o.center.x - static_cast<int>(std::lround(o.size.x)),
             o.center.y - static_cast<int>(std::lround(o.size.y))},
            {o.center.x + static_cast<int>(std::lround(o.size.x)),
             o.center.y + static_cast<int>(std::lround(o.size.y))}};
  }
  const BoundingBox outer = object_outer_bound(o);
  int min_x = outer.max.x, min_y = outer.max.y, max_x = outer.min.x, max_y = outer.min.y;
  bool any = false;
  for (int y = outer.min.y; y <= outer.max.y; ++y)
    for (int x = outer.min.x; x <= outer.max.x; ++x)
      if (object_footprint_contains(o, x, y)) {
        any = true;
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
      }
  if (!any) throw Error(Errc::validation_error, "object '" + id + "' has empty footprint");
  if (max_x == min_x) max_x++;
  if (max_y == min_y) max_y++;
  return {{min_x, min_y}, {max_x, max_y}};
}

// ---------------------------------------------------------------------------
// Calibration: pixel -> workspace millimeters, 2x3 affine plus z offset.
// ---------------------------------------------------------------------------

struct Calibration {
  // row-major [a b c; d e f]: world_x = a*px + b*py + c, world_y = d*px + e*py + f
  std::array<double, 6> matrix = {1, 0, 0, 0, 1, 0};
  double z_offset_mm = 0.0;

  double det() const { return matrix[0] * matrix[4] - matrix[1] * matrix[3]; }

  void validate() const {
    if (std::abs(det()) < 1e-12)
      throw Error(Errc::calibration_error, "affine linear part is singular");
  }

  Vec2 pixel_to_world_xy(const Vec2& p) const {
    return {matrix[0] * p.x + matrix[1] * p.y + matrix[2],
            matrix[3] * p.x + matrix[4] * p.y + matrix[5]};
  }

  Vec2 world_to_pixel_xy(const Vec2& w) const {
    validate();
    const double d = det();
    const double x = w.x - matrix[2];
    const double y = w.y - matrix[5];
    return {(matrix[4] * x - matrix[1] * y) / d, (-matrix[3] * x + matrix[0] * y) / d};
  }
};

// ---------------------------------------------------------------------------
// Scene (de)serialization + validation
// ---------------------------------------------------------------------------

inline void validate_scene(const Scene& scene) {
  std::map<std::string, const SceneObject*> by_id;
  for (const auto& o : scene.objects) {
    if (o.id.empty()) throw Error(Errc::validation_error, "object with empty id");
    if (!by_id.emplace(o.id, &o).second)
      throw Error(Errc::validation_error, "duplicate object id '" + o.id + "'");
    if (o.size.x <= 0 || o.size.y <= 0)
      throw Error(Errc::validation_error, "object '" + o.id + "' has non-positive size");
  }
  for (const auto& o : scene.objects) {
    if (o.lid_of) {
      const auto it = by_id.find(*o.lid_of);
      if (it == by_id.end())
        throw Error(Errc::validation_error, "lid_of references missing object '" + *o.lid_of + "'");
      if (it->second->kind != ObjectKind::container)
        throw Error(Errc::validation_error, "lid_of target '" + *o.lid_of + "' is not a container");
    }
    const BoundingBox b = object_outer_bound(o);
    if (b.min.x < 0 || b.min.y < 0 || b.max.x > scene.width || b.max.y > scene.height)
      throw Error(Errc::validation_error, "object '" + o.id + "' extends outside the canvas");
  }
  for (const auto& [obj, target] : scene.goal.bindings) {
    if (!by_id.count(obj))
      throw Error(Errc::validation_error, "goal binding references missing object '" + obj + "'");
    if (!by_id.count(target))
      throw Error(Errc::validation_error, "goal binding references missing target '" + target + "'");
  }
}

inline Scene scene_from_json(const json& j) {
  Scene scene;
  try {
    scene.width = j.value("width", 640);
    scene.height = j.value("height", 480);
    scene.seed = j.value("seed", std::uint64_t{0});
    for (const auto& jo : j.at("objects")) {
      SceneObject o;
      o.id = jo.at("id").get<std::string>();
      o.kind = kind_from_name(jo.at("kind").get<std::string>());
      o.color = jo.at("color").get<std::string>();
      o.center = {jo.at("center").at(0).get<int>(), jo.at("center").at(1).get<int>()};
      const auto& js = jo.at("size");
      if (js.is_array()) {
        o.size = {js.at(0).get<double>(), js.at(1).get<double>()};
      } else {
        const double s = js.get<double>();
        o.size = {s, s};
      }
      o.rotation = jo.value("rotation", 0.0);
      o.height_mm = jo.value("height_mm", 20.0);
      o.has_lid = jo.value("has_lid", false);
      if (jo.contains("lid_of")) o.lid_of = jo.at("lid_of").get<std::string>();
      scene.objects.push_back(std::move(o));
    }
    const auto& jg = j.at("goal");
    scene.goal.kind = goal_kind_from_name(jg.at("kind").get<std::string>());
    scene.goal.tolerance = jg.value("tolerance", 0.0);
    if (jg.contains("bindings"))
      for (const auto& [k, v] : jg.at("bindings").items())
        scene.goal.bindings[k] = v.get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("scene json: ") + e.what());
  }
  resolve_color(scene.objects.empty() ? "grey" : scene.objects.front().color);
  for (const auto& o : scene.objects) resolve_color(o.color);
  validate_scene(scene);
  return scene;
}

inline json scene_to_json(const Scene& scene) {
  json j;
  j["width"] = scene.width;
  j["height"] = scene.height;
  j["seed"] = scene.seed;
  j["objects"] = json::array();
  for (const auto& o : scene.objects) {
    json jo;
    jo["id"] = o.id;
    jo["kind"] = kind_name(o.kind);
    jo["color"] = o.color;
    jo["center"] = {o.center.x, o.center.y};
    jo["size"] = {o.size.x, o.size.y};
    jo["rotation"] = o.rotation;
    jo["height_mm"] = o.height_mm;
    jo["has_lid"] = o.has_lid;
    if (o.lid_of) jo["lid_of"] = *o.lid_of;
    j["objects"].push_back(jo);
  }
  j["goal"]["kind"] = goal_kind_name(scene.goal.kind);
  j["goal"]["tolerance"] = scene.goal.tolerance;
  j["goal"]["bindings"] = json::object();
  for (const auto& [k, v] : scene.goal.bindings) j["goal"]["bindings"][k] = v;
  return j;
}

inline Scene load_scene(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, path + ": " + e.what());
  }
  return scene_from_json(j);
}

inline void save_scene(const std::string& path, const Scene& scene) {
  write_file(path, scene_to_json(scene).dump(2) + "\n");
}

}  // namespace planground
