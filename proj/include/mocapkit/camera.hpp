#pragma once

#include <cmath>

#include "mocapkit/common.hpp"

namespace mocapkit {

// Orthographic projection followed by a uniform scale and an image-plane shift.
// Image axes: x right, y down, origin at the crop's top-left corner.
struct WeakPerspectiveCamera {
  double scale = 1.0;                   // px per model unit, > 0
  Vec2 translation = Vec2::Zero();      // px

  bool valid() const { return scale > 0.0 && std::isfinite(scale) && translation.allFinite(); }
};

inline Vec2 project(const WeakPerspectiveCamera& cam, const Vec3& point) {
  return cam.scale * point.head<2>() + cam.translation;
}

inline Points2 project(const WeakPerspectiveCamera& cam, const Points3& points) {
  Points2 out = cam.scale * points.leftCols<2>();
  out.rowwise() += cam.translation.transpose();
  return out;
}

}  // namespace mocapkit
