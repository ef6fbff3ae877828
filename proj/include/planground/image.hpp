#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "planground/errors.hpp"
#include "planground/geometry.hpp"
#include "planground/util.hpp"

namespace planground {

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Color&, const Color&) = default;
};

// Plain 8-bit RGB raster, row-major.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, Color fill = {0, 0, 0})
      : width_(width), height_(height), pixels_(std::size_t(width) * height * 3) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) set(x, y, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

  Color get(int x, int y) const {
    const std::size_t i = (std::size_t(y) * width_ + x) * 3;
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }

  void set(int x, int y, Color c) {
    const std::size_t i = (std::size_t(y) * width_ + x) * 3;
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  void set_clipped(int x, int y, Color c) {
    if (in_bounds(x, y)) set(x, y, c);
  }

  const std::vector<std::uint8_t>& buffer() const { return pixels_; }

  std::string digest() const {
    Sha256 h;
    const std::uint32_t dims[2] = {std::uint32_t(width_), std::uint32_t(height_)};
    h.update(dims, sizeof(dims));
    h.update(pixels_.data(), pixels_.size());
    const auto d = h.digest();
    return to_hex(d.data(), d.size());
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Per-pixel depth in millimeters, paired with a RasterImage of equal size.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, double fill = 0.0)
      : width_(width), height_(height), depth_(std::size_t(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

  double get(int x, int y) const { return depth_[std::size_t(y) * width_ + x]; }
  void set(int x, int y, double mm) { depth_[std::size_t(y) * width_ + x] = mm; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> depth_;
};

// -------------------------------------------------------------------------
// Drawing primitives. All mutate in place; callers that need purity copy
// first (the imaging ops do).
// -------------------------------------------------------------------------

inline void draw_hline(RasterImage& img, int x0, int x1, int y, Color c) {
  if (x0 > x1) std::swap(x0, x1);
  for (int x = x0; x <= x1; ++x) img.set_clipped(x, y, c);
}

inline void draw_vline(RasterImage& img, int y0, int y1, int x, Color c) {
  if (y0 > y1) std::swap(y0, y1);
  for (int y = y0; y <= y1; ++y) img.set_clipped(x, y, c);
}

inline void draw_rect_outline(RasterImage& img, const BoundingBox& box, Color c, int thickness = 2) {
  for (int t = 0; t < thickness; ++t) {
    draw_hline(img, box.min.x, box.max.x, box.min.y + t, c);
    draw_hline(img, box.min.x, box.max.x, box.max.y - t, c);
    draw_vline(img, box.min.y, box.max.y, box.min.x + t, c);
    draw_vline(img, box.min.y, box.max.y, box.max.x - t, c);
  }
}

inline void fill_rect(RasterImage& img, const BoundingBox& box, Color c) {
  for (int y = box.min.y; y <= box.max.y; ++y)
    for (int x = box.min.x; x <= box.max.x; ++x) img.set_clipped(x, y, c);
}

inline void fill_disk(RasterImage& img, const PixelCoord& center, int radius, Color c) {
  const int r2 = radius * radius;
  for (int y = center.y - radius; y <= center.y + radius; ++y)
    for (int x = center.x - radius; x <= center.x + radius; ++x) {
      const int dx = x - center.x, dy = y - center.y;
      if (dx * dx + dy * dy <= r2) img.set_clipped(x, y, c);
    }
}

inline void draw_line(RasterImage& img, PixelCoord a, PixelCoord b, Color c) {
  // Bresenham
  int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  int x = a.x, y = a.y;
  while (true) {
    img.set_clipped(x, y, c);
    if (x == b.x && y == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x += sx; }
    if (e2 <= dx) { err += dx; y += sy; }
  }
}

// 5x7 bitmap glyphs for digits plus the few symbols labels need.
inline const std::array<std::uint8_t, 7>* glyph_rows(char ch) {
  static constexpr std::array<std::array<std::uint8_t, 7>, 12> glyphs = {{
      {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110},  // 0
      {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110},  // 1
      {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111},  // 2
      {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110},  // 3
      {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010},  // 4
      {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110},  // 5
      {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110},  // 6
      {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000},  // 7
      {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110},  // 8
      {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100},  // 9
      {0b00000, 0b00000, 0b00000, 0b11111, 0b00000, 0b00000, 0b00000},  // -
      {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00100, 0b00000},  // .
  }};
  if (ch >= '0' && ch <= '9') return &glyphs[std::size_t(ch - '0')];
  if (ch == '-') return &glyphs[10];
  if (ch == '.') return &glyphs[11];
  return nullptr;
}

inline void draw_text(RasterImage& img, int x, int y, const std::string& text, Color c) {
  int cx = x;
  for (char ch : text) {
    if (const auto* rows = glyph_rows(ch)) {
      for (int ry = 0; ry < 7; ++ry)
        for (int rx = 0; rx < 5; ++rx)
          if ((*rows)[ry] & (1 << (4 - rx))) img.set_clipped(cx + rx, y + ry, c);
    }
    cx += 6;
  }
}

inline int text_width(const std::string& text) { return static_cast<int>(text.size()) * 6; }

// -------------------------------------------------------------------------
// PNG encoding. The zlib stream uses stored deflate blocks so output bytes
// depend only on the pixel data, never on a compressor version.
// -------------------------------------------------------------------------

namespace detail {

inline std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t crc = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t n = 0; n < 256; ++n) {
      std::uint32_t c = n;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[n] = c;
    }
    return t;
  }();
  crc ^= 0xffffffffu;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

inline std::uint32_t adler32(const unsigned char* data, std::size_t len) {
  std::uint32_t a = 1, b = 0;
  for (std::size_t i = 0; i < len; ++i) {
    a = (a + data[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

inline void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

inline void put_chunk(std::vector<unsigned char>& out, const char type[4],
                      const std::vector<unsigned char>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::vector<unsigned char> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  out.insert(out.end(), body.begin(), body.end());
  put_be32(out, crc32(body.data(), body.size()));
}

}  // namespace detail

inline std::vector<unsigned char> encode_png(const RasterImage& img) {
  // raw = one filter byte (0 = none) per scanline followed by RGB bytes
  std::vector<unsigned char> raw;
  raw.reserve(std::size_t(img.height()) * (1 + std::size_t(img.width()) * 3));
  const auto& px = img.buffer();
  for (int y = 0; y < img.height(); ++y) {
    raw.push_back(0);
    const std::size_t off = std::size_t(y) * img.width() * 3;
    raw.insert(raw.end(), px.begin() + off, px.begin() + off + std::size_t(img.width()) * 3);
  }

  std::vector<unsigned char> idat;
  idat.push_back(0x78);  // zlib header, 32K window
  idat.push_back(0x01);
  std::size_t pos = 0;
  while (pos < raw.size() || raw.empty()) {
    const std::size_t chunk = std::min<std::size_t>(65535, raw.size() - pos);
    const bool final_block = pos + chunk >= raw.size();
    idat.push_back(final_block ? 1 : 0);  // BFINAL, BTYPE=00 (stored)
    idat.push_back(static_cast<unsigned char>(chunk & 0xff));
    idat.push_back(static_cast<unsigned char>(chunk >> 8));
    idat.push_back(static_cast<unsigned char>(~chunk & 0xff));
    idat.push_back(static_cast<unsigned char>((~chunk >> 8) & 0xff));
    idat.insert(idat.end(), raw.begin() + pos, raw.begin() + pos + chunk);
    pos += chunk;
    if (final_block) break;
  }
  detail::put_be32(idat, detail::adler32(raw.data(), raw.size()));

  std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<unsigned char> ihdr;
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.width()));
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.height()));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::put_chunk(out, "IHDR", ihdr);
  detail::put_chunk(out, "IDAT", idat);
  detail::put_chunk(out, "IEND", {});
  return out;
}

inline void write_png(const std::string& path, const RasterImage& img) {
  const auto bytes = encode_png(img);
  write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace planground
