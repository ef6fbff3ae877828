#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "planground/errors.hpp"

namespace planground {

// Screen convention throughout: x = column growing rightward, y = row growing
// downward, origin at the top-left pixel of the image.
struct PixelCoord {
  int x = 0;
  int y = 0;

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double px, double py) : x(px), y(py) {}
  explicit Vec2(const PixelCoord& p) : x(p.x), y(p.y) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
};

inline PixelCoord round_to_pixel(const Vec2& v) {
  return {static_cast<int>(std::lround(v.x)), static_cast<int>(std::lround(v.y))};
}

inline double distance(const PixelCoord& a, const PixelCoord& b) {
  return std::hypot(double(a.x) - b.x, double(a.y) - b.y);
}

// Axis-aligned box with closed extents: pixels with min.x <= x <= max.x and
// min.y <= y <= max.y belong to the box. Width/height and IoU use the
// continuous convention (max - min).
struct BoundingBox {
  PixelCoord min;
  PixelCoord max;

  int width() const { return max.x - min.x; }
  int height() const { return max.y - min.y; }
  double area() const { return double(width()) * double(height()); }
  Vec2 center() const { return {(min.x + max.x) / 2.0, (min.y + max.y) / 2.0}; }

  bool valid() const { return min.x < max.x && min.y < max.y; }

  bool contains(const PixelCoord& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }

  bool contains_strict(const PixelCoord& p) const {
    return p.x > min.x && p.x < max.x && p.y > min.y && p.y < max.y;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline BoundingBox make_box(int x0, int y0, int x1, int y1) {
  return BoundingBox{{x0, y0}, {x1, y1}};
}

inline BoundingBox box_around(const Vec2& center, double half_w, double half_h) {
  return BoundingBox{{static_cast<int>(std::lround(center.x - half_w)),
                      static_cast<int>(std::lround(center.y - half_h))},
                     {static_cast<int>(std::lround(center.x + half_w)),
                      static_cast<int>(std::lround(center.y + half_h))}};
}

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.max.x, b.max.x) - std::max(a.min.x, b.min.x);
  const double h = std::min(a.max.y, b.max.y) - std::max(a.min.y, b.min.y);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

inline bool boxes_disjoint(const BoundingBox& a, const BoundingBox& b) {
  return intersection_area(a, b) <= 0.0;
}

inline BoundingBox clamp_box(const BoundingBox& b, int width, int height) {
  BoundingBox r = b;
  r.min.x = std::clamp(r.min.x, 0, width - 1);
  r.min.y = std::clamp(r.min.y, 0, height - 1);
  r.max.x = std::clamp(r.max.x, 1, width);
  r.max.y = std::clamp(r.max.y, 1, height);
  if (r.max.x <= r.min.x) r.max.x = r.min.x + 1;
  if (r.max.y <= r.min.y) r.max.y = r.min.y + 1;
  return r;
}

inline std::string box_to_string(const BoundingBox& b) {
  return "[" + std::to_string(b.min.x) + ", " + std::to_string(b.min.y) + ", " +
         std::to_string(b.max.x) + ", " + std::to_string(b.max.y) + "]";
}

inline std::string point_to_string(const PixelCoord& p) {
  return "[" + std::to_string(p.x) + ", " + std::to_string(p.y) + "]";
}

}  // namespace planground
