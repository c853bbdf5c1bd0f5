#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arm3d/core.hpp"

namespace arm3d::geometry {

using CategoryId = int;
inline constexpr CategoryId kNoCategory = -1;

/// Axis-aligned box. `size` holds the full extents along x, y, z.
template <typename S>
struct Box3 {
  Vector3T<S> center = Vector3T<S>::Zero();
  Vector3T<S> size = Vector3T<S>::Ones();
  CategoryId category = kNoCategory;
  std::int64_t instance_id = -1;

  Vector3T<S> min_corner() const { return center - size / S(2); }
  Vector3T<S> max_corner() const { return center + size / S(2); }
  S volume() const { return size.prod(); }
  bool valid() const { return size.allFinite() && center.allFinite() && (size.array() > S(0)).all(); }

  static Box3 from_corners(const Vector3T<S>& lo, const Vector3T<S>& hi, CategoryId category = kNoCategory,
                           std::int64_t instance = -1) {
    Box3 b;
    b.center = (lo + hi) / S(2);
    b.size = hi - lo;
    b.category = category;
    b.instance_id = instance;
    return b;
  }
};

using Box3D = Box3<Scalar>;

struct Scene {
  std::string scene_id;
  std::vector<Box3D> ground_truth;
  std::uint64_t point_count_hint = 0;
};

/// Throws FormatError on non-positive extents or duplicate instance ids.
void validate_scene(const Scene& scene);

}  // namespace arm3d::geometry
