#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace occhmm {

/// Row-major single-channel intensity image.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Frame() = default;
  Frame(int w, int h, double fill = 0.0)
      : width(w), height(h),
        pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h),
               fill) {
    if (w < 1 || h < 1) throw std::invalid_argument("frame must be non-empty");
  }

  double at(int y, int x) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
  double& at(int y, int x) {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

struct BoundingBox {
  int x = 0;  // top-left column
  int y = 0;  // top-left row
  int w = 1;
  int h = 1;

  bool inside(const Frame& frame) const {
    return w > 0 && h > 0 && x >= 0 && y >= 0 && x + w <= frame.width &&
           y + h <= frame.height;
  }
  BoundingBox shifted(int dx, int dy) const { return {x + dx, y + dy, w, h}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const int ix = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const int iy = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = static_cast<double>(ix) * iy;
  const double uni = static_cast<double>(a.w) * a.h +
                     static_cast<double>(b.w) * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace occhmm
