#pragma once

#include <span>
#include <vector>

#include "arm3d/geometry/box.hpp"

namespace arm3d::geometry {

struct ScoredBox {
  Box3D box;
  Scalar score = 0;
};

/// Class-aware greedy NMS. Boxes are visited by descending score (ties by
/// lower index); a box is dropped when its IoU with an already kept box of
/// the same category exceeds `iou_threshold`. Returns kept indices in visit
/// order.
std::vector<std::size_t> nms_3d(std::span<const ScoredBox> detections, Scalar iou_threshold);

}  // namespace arm3d::geometry
