#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "planground/errors.hpp"
#include "planground/geometry.hpp"
#include "planground/image.hpp"

namespace planground {

struct Rational {
  int num = 1;
  int den = 1;
  double value() const { return double(num) / den; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

// A margin-expanded crop of a source image with exact transforms between
// crop-local and original ("global") pixel coordinates.
struct ZoomFrame {
  BoundingBox source_box;  // region of the original image the crop shows
  Rational scale;          // crop pixels per source pixel
  RasterImage crop;

  // Center of the scaled block that represents source pixel p.
  PixelCoord to_zoom(const PixelCoord& p) const {
    const int k = scale.num;
    return {(p.x - source_box.min.x) * k + k / 2, (p.y - source_box.min.y) * k + k / 2};
  }

  PixelCoord from_zoom(const PixelCoord& q) const {
    const int k = scale.num;
    return {source_box.min.x + q.x / k, source_box.min.y + q.y / k};
  }
};

struct Annotation {
  enum class Kind { tick_grid, bbox, point, labeled_point };
  Kind kind = Kind::point;
  std::variant<int, BoundingBox, PixelCoord> geometry;  // tick spacing, box, or point
  std::string label;
  Color color{20, 20, 20};
};

namespace detail {

inline void draw_ticks_into(RasterImage& img, int spacing, int origin_x, int origin_y, int step_scale) {
  const Color ink{20, 20, 20};
  // ticks along the top edge, labeled with original-frame x coordinates
  int gx = origin_x % spacing == 0 ? origin_x : origin_x + (spacing - origin_x % spacing);
  for (; (gx - origin_x) * step_scale < img.width(); gx += spacing) {
    const int cx = (gx - origin_x) * step_scale;
    draw_vline(img, 0, 6, cx, ink);
    draw_text(img, cx + 2, 8, std::to_string(gx), ink);
  }
  int gy = origin_y % spacing == 0 ? origin_y : origin_y + (spacing - origin_y % spacing);
  for (; (gy - origin_y) * step_scale < img.height(); gy += spacing) {
    const int cy = (gy - origin_y) * step_scale;
    draw_hline(img, 0, 6, cy, ink);
    draw_text(img, 8, cy + 2, std::to_string(gy), ink);
  }
}

}  // namespace detail

// Axis tick marks with numeric labels every `spacing` px on both axes.
inline RasterImage overlay_ticks(const RasterImage& img, int spacing) {
  spacing = std::max(spacing, 10);
  RasterImage out = img;
  detail::draw_ticks_into(out, spacing, 0, 0, 1);
  return out;
}

// Tick overlay for a zoomed view. Labels carry original-image coordinates so
// agents always answer in the global frame.
inline RasterImage overlay_zoom_ticks(const ZoomFrame& frame, int spacing) {
  spacing = std::max(spacing, 10);
  RasterImage out = frame.crop;
  detail::draw_ticks_into(out, spacing, frame.source_box.min.x, frame.source_box.min.y,
                          frame.scale.num);
  return out;
}

// Crop `box` expanded by margin_frac of its dimensions per side, clamped to
// the image, and upscaled (nearest neighbor) until the shorter crop edge is
// at least `min_edge` px. The scale is recorded exactly.
inline ZoomFrame crop_with_margin(const RasterImage& img, const BoundingBox& box,
                                  double margin_frac, int min_edge = 320) {
  BoundingBox probe = box;
  probe.min.x = std::max(probe.min.x, 0);
  probe.min.y = std::max(probe.min.y, 0);
  probe.max.x = std::min(probe.max.x, img.width());
  probe.max.y = std::min(probe.max.y, img.height());
  if (probe.min.x >= probe.max.x || probe.min.y >= probe.max.y)
    throw Error(Errc::empty_intersection, "crop box does not intersect the image");

  const int mx = static_cast<int>(std::lround(margin_frac * box.width()));
  const int my = static_cast<int>(std::lround(margin_frac * box.height()));
  BoundingBox src{{box.min.x - mx, box.min.y - my}, {box.max.x + mx, box.max.y + my}};
  src.min.x = std::max(src.min.x, 0);
  src.min.y = std::max(src.min.y, 0);
  src.max.x = std::min(src.max.x, img.width());
  src.max.y = std::min(src.max.y, img.height());

  const int sw = src.width();
  const int sh = src.height();
  const int k = std::max(1, (min_edge + std::min(sw, sh) - 1) / std::min(sw, sh));

  ZoomFrame frame;
  frame.source_box = src;
  frame.scale = {k, 1};
  frame.crop = RasterImage(sw * k, sh * k);
  for (int y = 0; y < sh * k; ++y)
    for (int x = 0; x < sw * k; ++x)
      frame.crop.set(x, y, img.get(src.min.x + x / k, src.min.y + y / k));
  return frame;
}

// Draws annotations in listed order onto a copy of the image.
inline RasterImage draw_annotations(const RasterImage& img, const std::vector<Annotation>& items) {
  RasterImage out = img;
  for (const auto& a : items) {
    switch (a.kind) {
      case Annotation::Kind::tick_grid:
        detail::draw_ticks_into(out, std::max(std::get<int>(a.geometry), 10), 0, 0, 1);
        break;
      case Annotation::Kind::bbox: {
        const auto& b = std::get<BoundingBox>(a.geometry);
        if (b.min.x < 0 || b.min.y < 0 || b.max.x >= out.width() || b.max.y >= out.height())
          throw Error(Errc::out_of_bounds, "bbox annotation outside image");
        draw_rect_outline(out, b, a.color, 2);
        break;
      }
      case Annotation::Kind::point:
      case Annotation::Kind::labeled_point: {
        const auto& p = std::get<PixelCoord>(a.geometry);
        if (!out.in_bounds(p.x, p.y))
          throw Error(Errc::out_of_bounds, "point annotation outside image");
        fill_disk(out, p, 4, a.color);
        if (a.kind == Annotation::Kind::labeled_point && !a.label.empty())
          draw_text(out, p.x + 6, p.y - 3, a.label, a.color);
        break;
      }
    }
  }
  return out;
}

}  // namespace planground
