#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "planground/agent.hpp"
#include "planground/errors.hpp"
#include "planground/geometry.hpp"
#include "planground/scene.hpp"
#include "planground/types.hpp"

namespace planground {

enum class PrimitiveKind { move_to, pick, place, push, rotate_gripper, pen_down, pen_up };

inline std::string primitive_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::move_to: return "move_to";
    case PrimitiveKind::pick: return "pick";
    case PrimitiveKind::place: return "place";
    case PrimitiveKind::push: return "push";
    case PrimitiveKind::rotate_gripper: return "rotate_gripper";
    case PrimitiveKind::pen_down: return "pen_down";
    case PrimitiveKind::pen_up: return "pen_up";
  }
  return "move_to";
}

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

struct ActionPrimitive {
  PrimitiveKind kind = PrimitiveKind::move_to;
  std::string target;  // descriptor this primitive acts on (may be empty)
  PixelCoord pixel;
  Vec3 world_mm;
  // per-kind extras
  std::optional<PixelCoord> push_end;
  std::optional<Vec3> push_end_world;
  double rotation_degrees = 0.0;
};

struct Waypoints {
  std::vector<PixelCoord> points;
  bool closed = false;
};

// ---------------------------------------------------------------------------
// Geometry helpers
// ---------------------------------------------------------------------------

// Start pose for a push: behind the object relative to the goal, one
// clearance beyond the box extent along the push direction.
inline PixelCoord push_start_point(const BoundingBox& obj_box, const PixelCoord& goal,
                                   double clearance) {
  if (obj_box.contains(goal))
    throw Error(Errc::goal_inside_object, "push goal lies inside the object box");
  const Vec2 c = obj_box.center();
  Vec2 dir = Vec2(goal) - c;
  const double len = dir.norm();
  if (len <= 0.0) throw Error(Errc::goal_inside_object, "push goal coincides with object center");
  dir = dir * (1.0 / len);
  const double hx = obj_box.width() / 2.0;
  const double hy = obj_box.height() / 2.0;
  const double support = hx * std::abs(dir.x) + hy * std::abs(dir.y);
  Vec2 start = c - dir * (support + clearance);
  PixelCoord p = round_to_pixel(start);
  // integer rounding must not land back on the box
  for (int guard = 0; guard < 4 && obj_box.contains(p); ++guard) {
    start = start - dir;
    p = round_to_pixel(start);
  }
  return p;
}

// Five-pointed star traced in pentagram (skip-two) vertex order, closed.
// Angles use the screen convention, so -90 degrees points up.
inline Waypoints star_waypoints(const PixelCoord& center, double radius) {
  if (radius < 5.0) throw Error(Errc::validation_error, "star radius must be >= 5 px");
  std::array<Vec2, 5> vertex;
  for (int k = 0; k < 5; ++k) {
    const double a = (-90.0 + 72.0 * k) * M_PI / 180.0;
    vertex[k] = {center.x + radius * std::cos(a), center.y + radius * std::sin(a)};
  }
  static constexpr int order[6] = {0, 2, 4, 1, 3, 0};
  Waypoints w;
  w.closed = true;
  for (int idx : order) w.points.push_back(round_to_pixel(vertex[idx]));
  return w;
}

// Coverage path for wiping: an Archimedean spiral grown from the box center,
// clipped to the box interior.
inline Waypoints spiral_waypoints(const BoundingBox& box, double pitch_px = 15.0) {
  const Vec2 c = box.center();
  const double max_r = std::min(box.width(), box.height()) / 2.0;
  Waypoints w;
  w.closed = false;
  w.points.push_back(round_to_pixel(c));
  const double dtheta = 0.35;
  for (double theta = dtheta;; theta += dtheta) {
    const double r = pitch_px * theta / (2.0 * M_PI);
    if (r > max_r) break;
    const PixelCoord p = round_to_pixel({c.x + r * std::cos(theta), c.y + r * std::sin(theta)});
    if (p == w.points.back()) continue;
    w.points.push_back(p);
  }
  if (w.points.size() < 2) w.points.push_back({w.points.front().x + 1, w.points.front().y});
  return w;
}

// ---------------------------------------------------------------------------
// Pixel -> world mapping
// ---------------------------------------------------------------------------

// (x, y) from the affine calibration; z from the median of the 5x5 depth
// window around p (clipped at image borders), minus the calibration offset.
inline Vec3 pixel_to_world(const PixelCoord& p, const Calibration& calib, const DepthMap& depth) {
  if (!depth.in_bounds(p.x, p.y))
    throw Error(Errc::out_of_bounds, "pixel " + point_to_string(p) + " outside depth map");
  calib.validate();
  std::vector<double> window;
  window.reserve(25);
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx)
      if (depth.in_bounds(p.x + dx, p.y + dy)) window.push_back(depth.get(p.x + dx, p.y + dy));
  std::sort(window.begin(), window.end());
  const double z = window[window.size() / 2] - calib.z_offset_mm;
  const Vec2 xy = calib.pixel_to_world_xy(Vec2(p));
  return {xy.x, xy.y, z};
}

// ---------------------------------------------------------------------------
// Action compilation
// ---------------------------------------------------------------------------

struct CompileOptions {
  double push_clearance_px = 10.0;
  double star_radius_frac = 0.4;    // of the surface box's shorter extent
  double spiral_pitch_px = 15.0;
  int shake_cycles = 3;
  double shake_amplitude_mm = 40.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline const ActionPoint& require_point(const std::map<std::string, ActionPoint>& points,
                                        const std::string& target) {
  const auto it = points.find(target);
  if (it == points.end())
    throw Error(Errc::missing_action_point, "no action point for target '" + target + "'");
  return it->second;
}

inline ActionPrimitive make_primitive(PrimitiveKind kind, const std::string& target,
                                      const PixelCoord& pixel, const Calibration& calib,
                                      const DepthMap& depth) {
  ActionPrimitive prim;
  prim.kind = kind;
  prim.target = target;
  prim.pixel = pixel;
  prim.world_mm = pixel_to_world(pixel, calib, depth);
  return prim;
}

}  // namespace detail

// The supervisor's final call: with the stage outputs in context it converts
// the verified plan plus grounded action points into executable primitives.
// The reply's action entries are expanded into primitives; trace and shake
// entries expand through the deterministic built-in curve generators.
inline std::vector<ActionPrimitive> compile_actions(
    const Plan& plan, const std::map<std::string, ActionPoint>& points,
    const std::map<std::string, BoundingBox>& boxes, const SystemMemory* mem,
    const std::string& inline_context, ChatBackend& backend, const AgentSpec& supervisor,
    AgentTranscript& transcript, const Calibration& calib, const DepthMap& depth,
    const CompileOptions& opt = {}) {
  if (!plan.approved) throw Error(Errc::not_approved, "cannot compile an unapproved plan");
  for (const auto& sg : plan.subgoals) {
    if (sg.verb == SubgoalVerb::trace_path) {
      if (sg.target_ref) detail::require_point(points, *sg.target_ref);
      continue;
    }
    detail::require_point(points, sg.object_ref);
    if (sg.target_ref) detail::require_point(points, *sg.target_ref);
  }

  std::string context_block;
  if (mem != nullptr) {
    context_block = "System memory:\n" + memory_lines(mem->snapshot_all());
  } else {
    context_block = "Stage outputs:\n" + inline_context;
  }

  AgentCall call;
  call.user_template =
      "{context_block}\n"
      "Verified plan:\n{plan_json}\n"
      "The top-view environment image is attached by the caller when available.\n"
      "Convert the plan and the grounded action points into the executable action sequence, "
      "one entry per primitive, aligned with the plan subgoals and their order.\n"
      "Output a fenced JSON block: {\"actions\": [{\"kind\": \"pick\"|\"place\"|\"push\"|"
      "\"move_to\"|\"rotate_gripper\"|\"trace\"|\"shake\", \"target\": name, \"point\": [x, y], "
      "\"end\": [x, y] (push only), \"degrees\": d (rotate only), \"pattern\": \"star\"|\"spiral\" "
      "(trace only)}]}";
  call.context["context_block"] = context_block;
  call.context["plan_json"] = fenced_json(nlohmann::json{{"subgoals", subgoals_to_json(plan.subgoals)}});
  call.expect = Expect::action_list;
  call.seed = opt.seed;

  const ParsedPayload payload = invoke_agent(supervisor, call, backend, transcript);

  std::vector<ActionPrimitive> out;
  for (const auto& entry : payload.body.at("actions")) {
    const std::string kind = entry.at("kind").get<std::string>();
    const std::string target = entry.value("target", "");
    PixelCoord point;
    if (entry.contains("point")) {
      point = point_from_json(entry.at("point"));
    } else if (!target.empty() && points.count(target)) {
      point = points.at(target).point;
    } else {
      throw Error(Errc::missing_action_point, "action entry without point or known target");
    }

    if (kind == "pick" || kind == "place" || kind == "move_to") {
      const PrimitiveKind pk = kind == "pick" ? PrimitiveKind::pick
                               : kind == "place" ? PrimitiveKind::place
                                                 : PrimitiveKind::move_to;
      out.push_back(detail::make_primitive(pk, target, point, calib, depth));
    } else if (kind == "push") {
      ActionPrimitive prim = detail::make_primitive(PrimitiveKind::push, target, point, calib, depth);
      const PixelCoord end = point_from_json(entry.at("end"));
      if (end == point) throw Error(Errc::validation_error, "push with identical start and end");
      prim.push_end = end;
      prim.push_end_world = pixel_to_world(end, calib, depth);
      out.push_back(std::move(prim));
    } else if (kind == "rotate_gripper") {
      ActionPrimitive prim =
          detail::make_primitive(PrimitiveKind::rotate_gripper, target, point, calib, depth);
      prim.rotation_degrees = entry.value("degrees", 90.0);
      out.push_back(std::move(prim));
    } else if (kind == "trace") {
      const std::string pattern = entry.value("pattern", "star");
      const auto box_it = boxes.find(target);
      Waypoints wp;
      if (pattern == "spiral") {
        if (box_it == boxes.end())
          throw Error(Errc::missing_action_point, "trace target '" + target + "' has no box");
        wp = spiral_waypoints(box_it->second, opt.spiral_pitch_px);
      } else {
        PixelCoord center = point;
        double radius;
        if (box_it != boxes.end()) {
          center = round_to_pixel(box_it->second.center());
          radius = opt.star_radius_frac * std::min(box_it->second.width(), box_it->second.height());
        } else {
          radius = 40.0;
        }
        wp = star_waypoints(center, std::max(radius, 5.0));
      }
      out.push_back(detail::make_primitive(PrimitiveKind::move_to, target, wp.points.front(), calib, depth));
      out.push_back(detail::make_primitive(PrimitiveKind::pen_down, target, wp.points.front(), calib, depth));
      for (std::size_t i = 1; i < wp.points.size(); ++i)
        out.push_back(detail::make_primitive(PrimitiveKind::move_to, target, wp.points[i], calib, depth));
      out.push_back(detail::make_primitive(PrimitiveKind::pen_up, target, wp.points.back(), calib, depth));
    } else if (kind == "shake") {
      const double amp_px =
          opt.shake_amplitude_mm / std::max(1e-9, std::sqrt(std::abs(calib.det())));
      out.push_back(detail::make_primitive(PrimitiveKind::pick, target, point, calib, depth));
      for (int cycle = 0; cycle < opt.shake_cycles; ++cycle) {
        PixelCoord left{point.x - static_cast<int>(std::lround(amp_px)), point.y};
        PixelCoord right{point.x + static_cast<int>(std::lround(amp_px)), point.y};
        left.x = std::clamp(left.x, 0, depth.width() - 1);
        right.x = std::clamp(right.x, 0, depth.width() - 1);
        out.push_back(detail::make_primitive(PrimitiveKind::move_to, target, left, calib, depth));
        out.push_back(detail::make_primitive(PrimitiveKind::move_to, target, right, calib, depth));
      }
      out.push_back(detail::make_primitive(PrimitiveKind::place, target, point, calib, depth));
    } else {
      throw Error(Errc::parse_error, "unknown action kind '" + kind + "'");
    }
  }
  return out;
}

inline nlohmann::json primitives_to_json(const std::vector<ActionPrimitive>& actions) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : actions) {
    nlohmann::json j;
    j["kind"] = primitive_name(a.kind);
    j["target"] = a.target;
    j["pixel"] = {a.pixel.x, a.pixel.y};
    j["world_mm"] = {a.world_mm.x, a.world_mm.y, a.world_mm.z};
    if (a.push_end) {
      j["push_end"] = {a.push_end->x, a.push_end->y};
      j["push_end_world_mm"] = {a.push_end_world->x, a.push_end_world->y, a.push_end_world->z};
    }
    if (a.kind == PrimitiveKind::rotate_gripper) j["degrees"] = a.rotation_degrees;
    arr.push_back(j);
  }
  return arr;
}

}  // namespace planground
