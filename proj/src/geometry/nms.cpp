#include "arm3d/geometry/nms.hpp"

#include <algorithm>
#include <numeric>

#include "arm3d/geometry/ops.hpp"

namespace arm3d::geometry {

std::vector<std::size_t> nms_3d(std::span<const ScoredBox> detections, Scalar iou_threshold) {
  for (const auto& d : detections) {
    if (!std::isfinite(d.score)) throw UsageError("nms_3d: non-finite score");
  }
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const Box3D& candidate = detections[idx].box;
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      const Box3D& other = detections[k].box;
      return other.category == candidate.category && iou_3d(other, candidate) > iou_threshold;
    });
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

}  // namespace arm3d::geometry
