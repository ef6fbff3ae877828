#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "planground/actuation.hpp"
#include "planground/errors.hpp"
#include "planground/image.hpp"
#include "planground/imaging.hpp"
#include "planground/scene.hpp"
#include "planground/util.hpp"

namespace planground {

inline constexpr double kCameraHeightMm = 800.0;
inline const Color kMatColor{200, 200, 200};

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

inline Color blend(Color a, Color b, int num, int den) {
  return {static_cast<std::uint8_t>((a.r * num + b.r * (den - num)) / den),
          static_cast<std::uint8_t>((a.g * num + b.g * (den - num)) / den),
          static_cast<std::uint8_t>((a.b * num + b.b * (den - num)) / den)};
}

// Paint order: regions under containers under plain objects, lids on top.
inline std::vector<std::size_t> paint_order(const Scene& scene) {
  std::vector<std::size_t> order;
  const auto rank = [&](const SceneObject& o) {
    if (o.lid_of) return 3;
    if (o.kind == ObjectKind::region) return 0;
    if (o.kind == ObjectKind::container) return 1;
    return 2;
  };
  for (std::size_t i = 0; i < scene.objects.size(); ++i) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rank(scene.objects[a]) < rank(scene.objects[b]);
  });
  return order;
}

inline void paint_object(const Scene& scene, const SceneObject& o, int object_index,
                         RasterImage& img, DepthMap& depth, std::vector<int>* mask) {
  const Color color = resolve_color(o.color);
  const BoundingBox bound = object_outer_bound(o);
  const Color fill = o.kind == ObjectKind::region ? blend(color, kMatColor, 115, 256)
                     : o.kind == ObjectKind::container ? blend(color, Color{0, 0, 0}, 200, 256)
                                                       : color;
  for (int y = std::max(0, bound.min.y); y <= std::min(img.height() - 1, bound.max.y); ++y)
    for (int x = std::max(0, bound.min.x); x <= std::min(img.width() - 1, bound.max.x); ++x) {
      if (!object_footprint_contains(o, x, y)) continue;
      img.set(x, y, fill);
      depth.set(x, y, kCameraHeightMm - o.height_mm);
      if (mask) (*mask)[std::size_t(y) * img.width() + x] = object_index + 1;
    }
  if (o.kind == ObjectKind::container || o.kind == ObjectKind::region) {
    // visible rim so containers and regions read as areas, not solids
    const BoundingBox rim = object_bbox(scene, o.id);
    draw_rect_outline(img, clamp_box(rim, img.width(), img.height()), color, 2);
  }
}

}  // namespace detail

struct RenderOutput {
  RasterImage image;
  DepthMap depth;
  std::vector<int> mask;  // object index + 1 per pixel, 0 = mat
};

inline RenderOutput render_scene(const Scene& scene) {
  RenderOutput out;
  out.image = RasterImage(scene.width, scene.height, kMatColor);
  out.depth = DepthMap(scene.width, scene.height, kCameraHeightMm);
  out.mask.assign(std::size_t(scene.width) * scene.height, 0);
  for (std::size_t idx : detail::paint_order(scene))
    detail::paint_object(scene, scene.objects[idx], static_cast<int>(idx), out.image, out.depth,
                         &out.mask);
  return out;
}

// ---------------------------------------------------------------------------
// Containers and lids
// ---------------------------------------------------------------------------

inline const SceneObject* lid_covering(const Scene& scene, const std::string& container_id) {
  const SceneObject& cont = scene.get(container_id);
  if (cont.kind != ObjectKind::container) return nullptr;
  const BoundingBox cont_box = object_bbox(scene, container_id);
  for (const auto& o : scene.objects) {
    if (!o.lid_of || *o.lid_of != container_id) continue;
    const BoundingBox lid_box = object_bbox(scene, o.id);
    const double overlap = intersection_area(lid_box, cont_box);
    if (overlap >= 0.5 * std::min(lid_box.area(), cont_box.area())) return &o;
  }
  return nullptr;
}

inline bool container_is_closed(const Scene& scene, const std::string& container_id) {
  return lid_covering(scene, container_id) != nullptr;
}

// The closed container an object sits in, if any.
inline const SceneObject* enclosing_closed_container(const Scene& scene, const SceneObject& obj) {
  if (obj.kind == ObjectKind::container || obj.lid_of) return nullptr;
  for (const auto& cont : scene.objects) {
    if (cont.kind != ObjectKind::container || cont.id == obj.id) continue;
    if (object_footprint_contains(cont, obj.center.x, obj.center.y) &&
        container_is_closed(scene, cont.id))
      return &cont;
  }
  return nullptr;
}

// Deterministic "free table area" point: the grid candidate farthest from
// every object box (ties resolved by scan order).
inline PixelCoord free_area_point(const Scene& scene) {
  std::vector<BoundingBox> boxes;
  for (const auto& o : scene.objects) boxes.push_back(object_bbox(scene, o.id));
  const int margin = 40;
  const int step = 16;
  PixelCoord best{margin, margin};
  double best_score = -1.0;
  for (int y = margin; y <= scene.height - margin; y += step)
    for (int x = margin; x <= scene.width - margin; x += step) {
      double score = 1e18;
      for (const auto& b : boxes) {
        const double dx = std::max({double(b.min.x - x), 0.0, double(x - b.max.x)});
        const double dy = std::max({double(b.min.y - y), 0.0, double(y - b.max.y)});
        score = std::min(score, std::hypot(dx, dy));
      }
      if (score > best_score) {
        best_score = score;
        best = {x, y};
      }
    }
  return best;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct SimEvent {
  int step = 0;
  std::string kind;
  std::string target;
  PixelCoord pixel;
  bool ok = true;
  std::string detail;
};

struct SimState {
  Scene scene;
  std::optional<std::string> held;
  bool pen_down = false;
  std::vector<PixelCoord> trace;
  PixelCoord gripper{0, 0};
  int step_count = 0;
  std::vector<SimEvent> events;
};

inline SimState make_sim(const Scene& scene) {
  SimState s;
  s.scene = scene;
  return s;
}

namespace detail {

// Topmost pickable object under the point: lids first, then plain objects,
// then containers; regions are mat markings and never pickable.
inline SceneObject* object_at(Scene& scene, const PixelCoord& p) {
  SceneObject* best = nullptr;
  int best_rank = -1;
  for (auto& o : scene.objects) {
    if (o.kind == ObjectKind::region) continue;
    if (!object_footprint_contains(o, p.x, p.y)) continue;
    const int rank = o.lid_of ? 2 : (o.kind == ObjectKind::container ? 0 : 1);
    if (rank >= best_rank) {
      best_rank = rank;
      best = &o;
    }
  }
  return best;
}

inline SceneObject* object_on_segment(Scene& scene, const PixelCoord& a, const PixelCoord& b) {
  const double len = distance(a, b);
  const int samples = std::max(2, static_cast<int>(len));
  for (int i = 0; i <= samples; ++i) {
    const double t = double(i) / samples;
    const PixelCoord p = round_to_pixel({a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t});
    if (SceneObject* o = object_at(scene, p)) return o;
  }
  return nullptr;
}

}  // namespace detail

// Executes primitives against the state. Failures are logged outcomes, not
// exceptions, so closed-loop replanning can observe them.
inline std::vector<SimEvent> execute_actions(SimState& state,
                                             const std::vector<ActionPrimitive>& actions) {
  std::vector<SimEvent> log;
  const auto emit = [&](const ActionPrimitive& a, bool ok, const std::string& detail) {
    SimEvent e{state.step_count, primitive_name(a.kind), a.target, a.pixel, ok, detail};
    log.push_back(e);
    state.events.push_back(e);
  };

  for (const auto& a : actions) {
    ++state.step_count;
    switch (a.kind) {
      case PrimitiveKind::move_to: {
        state.gripper = a.pixel;
        if (state.held)
          if (auto* o = state.scene.find(*state.held)) o->center = a.pixel;
        if (state.pen_down) state.trace.push_back(a.pixel);
        emit(a, true, "");
        break;
      }
      case PrimitiveKind::pick: {
        state.gripper = a.pixel;
        if (state.held) {
          emit(a, false, "already_holding");
          break;
        }
        SceneObject* obj = detail::object_at(state.scene, a.pixel);
        if (!obj) {
          emit(a, false, "pick_missed");
          break;
        }
        if (const SceneObject* cont = enclosing_closed_container(state.scene, *obj)) {
          emit(a, false, "blocked_by_lid:" + cont->id);
          break;
        }
        state.held = obj->id;
        obj->center = a.pixel;
        emit(a, true, obj->id);
        break;
      }
      case PrimitiveKind::place: {
        state.gripper = a.pixel;
        if (!state.held) {
          emit(a, false, "nothing_held");
          break;
        }
        SceneObject* obj = state.scene.find(*state.held);
        obj->center = a.pixel;
        state.held.reset();
        bool blocked = false;
        for (const auto& cont : state.scene.objects) {
          if (cont.kind != ObjectKind::container || cont.id == obj->id) continue;
          if (obj->lid_of && *obj->lid_of == cont.id) continue;  // putting a lid back is fine
          if (object_footprint_contains(cont, a.pixel.x, a.pixel.y) &&
              container_is_closed(state.scene, cont.id)) {
            emit(a, false, "blocked_by_lid:" + cont.id);
            blocked = true;
            break;
          }
        }
        if (!blocked) emit(a, true, obj->id);
        break;
      }
      case PrimitiveKind::push: {
        state.gripper = a.pixel;
        if (!a.push_end) {
          emit(a, false, "push_without_end");
          break;
        }
        SceneObject* probe = detail::object_at(state.scene, a.pixel);
        if (probe) {
          emit(a, false, "push_start_inside:" + probe->id);
          break;
        }
        SceneObject* obj = detail::object_on_segment(state.scene, a.pixel, *a.push_end);
        if (!obj) {
          emit(a, false, "push_missed");
          break;
        }
        if (const SceneObject* cont = enclosing_closed_container(state.scene, *obj)) {
          emit(a, false, "blocked_by_lid:" + cont->id);
          break;
        }
        obj->center = *a.push_end;
        state.gripper = *a.push_end;
        emit(a, true, obj->id);
        break;
      }
      case PrimitiveKind::rotate_gripper: {
        if (state.held) {
          if (auto* o = state.scene.find(*state.held)) o->rotation += a.rotation_degrees;
          emit(a, true, *state.held);
        } else {
          emit(a, true, "no_object");
        }
        break;
      }
      case PrimitiveKind::pen_down: {
        state.pen_down = true;
        state.gripper = a.pixel;
        state.trace.push_back(a.pixel);
        emit(a, true, "");
        break;
      }
      case PrimitiveKind::pen_up: {
        state.pen_down = false;
        emit(a, true, "");
        break;
      }
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// Goal checking
// ---------------------------------------------------------------------------

struct GoalReport {
  bool success = false;
  std::string detail;
};

namespace detail {

// fraction of the object's footprint pixels lying inside the target footprint
inline double containment_fraction(const Scene& scene, const SceneObject& obj,
                                   const SceneObject& target) {
  const BoundingBox bound = object_outer_bound(obj);
  long inside = 0, total = 0;
  for (int y = bound.min.y; y <= bound.max.y; ++y)
    for (int x = bound.min.x; x <= bound.max.x; ++x) {
      if (!object_footprint_contains(obj, x, y)) continue;
      ++total;
      if (object_footprint_contains(target, x, y)) ++inside;
    }
  if (total == 0) return 0.0;
  return double(inside) / double(total);
}

inline std::vector<Vec2> densify(const std::vector<PixelCoord>& pts, double step = 2.0) {
  std::vector<Vec2> out;
  if (pts.empty()) return out;
  out.push_back(Vec2(pts.front()));
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec2 a(pts[i - 1]), b(pts[i]);
    const double len = (b - a).norm();
    const int n = std::max(1, static_cast<int>(len / step));
    for (int k = 1; k <= n; ++k) out.push_back(a + (b - a) * (double(k) / n));
  }
  return out;
}

inline double hausdorff(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  double worst = 0.0;
  for (const auto& p : a) {
    double best = 1e18;
    for (const auto& q : b) best = std::min(best, (p - q).norm());
    worst = std::max(worst, best);
  }
  for (const auto& q : b) {
    double best = 1e18;
    for (const auto& p : a) best = std::min(best, (p - q).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace detail

inline GoalReport goal_check(const SimState& state, const GoalSpec& goal) {
  const Scene& scene = state.scene;
  const auto lookup = [&](const std::string& id) -> const SceneObject& {
    const SceneObject* o = scene.find(id);
    if (!o) throw Error(Errc::unknown_binding, "goal references missing object '" + id + "'");
    return *o;
  };

  switch (goal.kind) {
    case GoalKind::place_in_region:
    case GoalKind::place_in_container:
    case GoalKind::push_into_region: {
      for (const auto& [obj_id, target_id] : goal.bindings) {
        const SceneObject& obj = lookup(obj_id);
        const SceneObject& target = lookup(target_id);
        if (goal.kind == GoalKind::place_in_container && container_is_closed(scene, target_id))
          return {false, obj_id + ": container '" + target_id + "' still closed"};
        const double frac = detail::containment_fraction(scene, obj, target);
        if (frac < 0.5)
          return {false, obj_id + ": only " + std::to_string(frac) + " of footprint inside '" +
                             target_id + "'"};
      }
      return {true, "all placements satisfied"};
    }
    case GoalKind::ordering: {
      std::vector<std::pair<const SceneObject*, const SceneObject*>> pairs;
      for (const auto& [obj_id, target_id] : goal.bindings)
        pairs.push_back({&lookup(obj_id), &lookup(target_id)});
      for (std::size_t i = 0; i < pairs.size(); ++i)
        for (std::size_t j = i + 1; j < pairs.size(); ++j) {
          const int obj_order = pairs[i].first->center.x - pairs[j].first->center.x;
          const int target_order = pairs[i].second->center.x - pairs[j].second->center.x;
          if ((obj_order < 0) != (target_order < 0))
            return {false, "order of '" + pairs[i].first->id + "' and '" + pairs[j].first->id +
                               "' does not match their targets"};
        }
      return {true, "ordering consistent"};
    }
    case GoalKind::trajectory_trace: {
      if (state.trace.empty()) return {false, "empty trace"};
      if (goal.bindings.empty()) return {false, "trace goal without surface binding"};
      const SceneObject& surface = lookup(goal.bindings.begin()->second);
      const BoundingBox sbox = object_bbox(scene, surface.id);
      const double radius = 0.4 * std::min(sbox.width(), sbox.height());
      const Waypoints ref = star_waypoints(round_to_pixel(sbox.center()), std::max(radius, 5.0));
      const double dist =
          detail::hausdorff(detail::densify(state.trace), detail::densify(ref.points));
      if (dist > goal.tolerance)
        return {false, "trace deviates " + std::to_string(dist) + " px (tolerance " +
                           std::to_string(goal.tolerance) + ")"};
      return {true, "trace within tolerance"};
    }
  }
  return {false, "unknown goal kind"};
}

// ---------------------------------------------------------------------------
// Deviation classes (coordinate quality relative to a target circle)
// ---------------------------------------------------------------------------

enum class DeviationClass { actionable, close_within_3r, close_within_4r, far };

inline std::string deviation_name(DeviationClass c) {
  switch (c) {
    case DeviationClass::actionable: return "Actionable";
    case DeviationClass::close_within_3r: return "CloseWithin3R";
    case DeviationClass::close_within_4r: return "CloseWithin4R";
    case DeviationClass::far: return "Far";
  }
  return "Far";
}

inline DeviationClass classify_deviation(const PixelCoord& point, const SceneObject& target) {
  if (target.kind != ObjectKind::circle)
    throw Error(Errc::not_a_circle, "deviation target '" + target.id + "' is not a circle");
  const double r = target.size.x;
  const double d = distance(point, target.center);
  if (d < r) return DeviationClass::actionable;
  if (d <= 3 * r) return DeviationClass::close_within_3r;
  if (d <= 4 * r) return DeviationClass::close_within_4r;
  return DeviationClass::far;
}

// ---------------------------------------------------------------------------
// Toy environment generation
// ---------------------------------------------------------------------------

// Grey mat, 4-8 distractor shapes and exactly one 50 px target circle,
// placed without overlap by rejection sampling, deterministic per seed.
inline Scene gen_toy_env(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "toy_env"));
  Scene scene;
  scene.width = 640;
  scene.height = 480;
  scene.seed = seed;
  scene.goal.kind = GoalKind::place_in_region;
  scene.goal.tolerance = 0.0;

  const std::vector<std::string> colors = {"red",    "green", "blue", "orange",
                                           "purple", "yellow", "pink", "cyan"};
  const std::vector<ObjectKind> kinds = {ObjectKind::rectangle, ObjectKind::star,
                                         ObjectKind::polygon};

  std::vector<BoundingBox> placed;
  const auto try_place = [&](SceneObject& o, double extent) -> bool {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const int margin = static_cast<int>(std::ceil(extent)) + 4;
      o.center = {static_cast<int>(rng.uniform_int(margin, scene.width - margin)),
                  static_cast<int>(rng.uniform_int(margin, scene.height - margin))};
      const BoundingBox bound = object_outer_bound(o);
      const BoundingBox padded{{bound.min.x - 6, bound.min.y - 6}, {bound.max.x + 6, bound.max.y + 6}};
      bool clash = false;
      for (const auto& b : placed)
        if (!boxes_disjoint(padded, b)) clash = true;
      if (!clash) {
        placed.push_back(bound);
        return true;
      }
    }
    return false;
  };

  SceneObject target;
  target.id = "target";
  target.kind = ObjectKind::circle;
  target.color = colors[std::size_t(rng.uniform_int(0, std::int64_t(colors.size()) - 1))];
  target.size = {50, 50};
  if (!try_place(target, 50))
    throw Error(Errc::placement_failure, "could not place target circle");
  scene.objects.push_back(target);

  const int n = static_cast<int>(rng.uniform_int(4, 8));
  for (int i = 0; i < n; ++i) {
    SceneObject d;
    d.id = "distractor_" + std::to_string(i);
    d.kind = kinds[std::size_t(rng.uniform_int(0, std::int64_t(kinds.size()) - 1))];
    d.color = colors[std::size_t(rng.uniform_int(0, std::int64_t(colors.size()) - 1))];
    const double s = rng.uniform(20.0, 45.0);
    d.size = d.kind == ObjectKind::rectangle ? Vec2{s, rng.uniform(15.0, 35.0)} : Vec2{s, s};
    d.rotation = rng.uniform(0.0, 360.0);
    const double extent = std::max(d.size.x, d.size.y) * 1.5;
    if (!try_place(d, extent))
      throw Error(Errc::placement_failure, "could not place distractor " + std::to_string(i));
    scene.objects.push_back(d);
  }
  validate_scene(scene);
  return scene;
}

inline nlohmann::json event_to_json(const SimEvent& e) {
  nlohmann::json j;
  j["step"] = e.step;
  j["kind"] = e.kind;
  j["target"] = e.target;
  j["pixel"] = {e.pixel.x, e.pixel.y};
  j["ok"] = e.ok;
  j["detail"] = e.detail;
  return j;
}

}  // namespace planground
