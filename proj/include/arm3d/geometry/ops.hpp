#pragma once

#include <algorithm>
#include <cmath>

#include "arm3d/geometry/box.hpp"

namespace arm3d::geometry {

enum class Plane { xy, yz, zx };
enum class GapDirection { vertical, horizontal };

/// Axis indices spanning a projection plane.
constexpr std::pair<int, int> plane_axes(Plane p) {
  switch (p) {
    case Plane::xy:
      return {0, 1};
    case Plane::yz:
      return {1, 2};
    case Plane::zx:
      return {2, 0};
  }
  return {0, 1};
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar center_distance(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  return (a - b).norm();
}

/// Overlap length of [a.min, a.max] and [b.min, b.max] along `axis`.
template <typename S>
S interval_overlap(const Box3<S>& a, const Box3<S>& b, int axis) {
  const S lo = std::max(a.center[axis] - a.size[axis] / S(2), b.center[axis] - b.size[axis] / S(2));
  const S hi = std::min(a.center[axis] + a.size[axis] / S(2), b.center[axis] + b.size[axis] / S(2));
  return std::max(S(0), hi - lo);
}

/// Separation between the two intervals along `axis`; zero when they touch or overlap.
template <typename S>
S interval_gap(const Box3<S>& a, const Box3<S>& b, int axis) {
  const S a_lo = a.center[axis] - a.size[axis] / S(2);
  const S a_hi = a.center[axis] + a.size[axis] / S(2);
  const S b_lo = b.center[axis] - b.size[axis] / S(2);
  const S b_hi = b.center[axis] + b.size[axis] / S(2);
  return std::max({S(0), a_lo - b_hi, b_lo - a_hi});
}

template <typename S>
S projected_area(const Box3<S>& a, Plane p) {
  const auto [u, v] = plane_axes(p);
  return a.size[u] * a.size[v];
}

template <typename S>
S projected_intersection(const Box3<S>& a, const Box3<S>& b, Plane p) {
  const auto [u, v] = plane_axes(p);
  return interval_overlap(a, b, u) * interval_overlap(a, b, v);
}

/// max(inter / area(a), inter / area(b)) of the projections on plane `p`.
template <typename S>
S projected_overlap_ratio(const Box3<S>& a, const Box3<S>& b, Plane p) {
  const S inter = projected_intersection(a, b, p);
  if (inter <= S(0)) return S(0);
  return std::min(S(1), std::max(inter / projected_area(a, p), inter / projected_area(b, p)));
}

/// Vertical: gap between z-intervals. Horizontal: Euclidean distance between
/// the xy-projected rectangles. Both are zero when the extents overlap.
template <typename S>
S axis_gap(const Box3<S>& a, const Box3<S>& b, GapDirection direction) {
  if (direction == GapDirection::vertical) return interval_gap(a, b, 2);
  return std::hypot(interval_gap(a, b, 0), interval_gap(a, b, 1));
}

template <typename S>
S intersection_volume(const Box3<S>& a, const Box3<S>& b) {
  return interval_overlap(a, b, 0) * interval_overlap(a, b, 1) * interval_overlap(a, b, 2);
}

template <typename S>
S iou_3d(const Box3<S>& a, const Box3<S>& b) {
  const S inter = intersection_volume(a, b);
  if (inter <= S(0)) return S(0);
  return inter / (a.volume() + b.volume() - inter);
}

}  // namespace arm3d::geometry
