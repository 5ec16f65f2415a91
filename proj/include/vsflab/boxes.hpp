#pragma once

#include <algorithm>
#include <cstdint>

#include "vsflab/common.hpp"

namespace vsflab {

// Half-open pixel box: x in [x1, x2), y in [y1, y2).
struct BoxI {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  std::int64_t area() const {
    return static_cast<std::int64_t>(width()) * height();
  }
  bool operator==(const BoxI&) const = default;
};

// Continuous box with the same half-open convention.
struct BoxD {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool operator==(const BoxD&) const = default;
};

inline BoxD to_boxd(const BoxI& b) {
  return BoxD{static_cast<double>(b.x1), static_cast<double>(b.y1),
              static_cast<double>(b.x2), static_cast<double>(b.y2)};
}

inline BoxD clip_box(const BoxD& b, double w, double h) {
  return BoxD{std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h),
              std::clamp(b.x2, 0.0, w), std::clamp(b.y2, 0.0, h)};
}

// Intersection over union. Degenerate (non-positive area) boxes are a
// caller error.
inline double iou(const BoxD& a, const BoxD& b) {
  require(a.area() > 0 && b.area() > 0, "iou: degenerate box");
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

// One scored box on one frame of a clip.
struct Detection {
  int frame = 0;
  BoxD box;
  double score = 0.0;
  bool operator==(const Detection&) const = default;
};

}  // namespace vsflab
