#pragma once

#include <array>

#include "kinemo/linalg.hpp"

namespace kinemo {

/// Oriented bounding box: center, three orthonormal axes, half-lengths.
struct OBB {
  Vec3 center;
  std::array<Vec3, 3> axes;
  std::array<double, 3> extents{0, 0, 0};

  double volume() const { return 8.0 * extents[0] * extents[1] * extents[2]; }

  /// Point expressed in box coordinates.
  Vec3 to_local(const Vec3& p) const {
    const Vec3 d = p - center;
    return {d.dot(axes[0]), d.dot(axes[1]), d.dot(axes[2])};
  }

  Vec3 to_world(const Vec3& local) const {
    return center + axes[0] * local.x + axes[1] * local.y + axes[2] * local.z;
  }

  bool contains(const Vec3& p, double slack) const {
    const Vec3 l = to_local(p);
    return std::fabs(l.x) <= extents[0] + slack &&
           std::fabs(l.y) <= extents[1] + slack &&
           std::fabs(l.z) <= extents[2] + slack;
  }
};

/// Infinite line: unit direction + a point on it.
struct Line {
  Vec3 dir;
  Vec3 point;
};

}  // namespace kinemo
