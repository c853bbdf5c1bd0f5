#include "arm3d/labels/labeler.hpp"

#include <algorithm>
#include <limits>

#include "arm3d/geometry/ops.hpp"

namespace arm3d::labels {

using geometry::GapDirection;
using geometry::Plane;

std::vector<ObjectnessLabel> label_objectness(std::span<const Vector3> proposal_centers,
                                              const Scene& scene, Scalar xi) {
  if (!(xi > 0)) throw UsageError("label_objectness: xi must be positive");
  std::vector<ObjectnessLabel> out;
  out.reserve(proposal_centers.size());
  for (std::size_t i = 0; i < proposal_centers.size(); ++i) {
    ObjectnessLabel l;
    l.proposal_index = static_cast<Index>(i);
    l.distance = std::numeric_limits<Scalar>::infinity();
    for (std::size_t g = 0; g < scene.ground_truth.size(); ++g) {
      const Scalar d = geometry::center_distance(proposal_centers[i], scene.ground_truth[g].center);
      if (d < l.distance) {
        l.distance = d;
        l.nearest_gt_index = static_cast<Index>(g);
      }
    }
    if (l.nearest_gt_index >= 0) {
      l.nearest_gt = scene.ground_truth[static_cast<std::size_t>(l.nearest_gt_index)].instance_id;
      l.label = l.distance <= xi ? 1 : 0;
    }
    out.push_back(l);
  }
  return out;
}

int label_semantic(const Box3D& a, const Box3D& b) {
  return (a.category == b.category && a.instance_id != b.instance_id) ? 1 : 0;
}

SpatialEvidence spatial_evidence(const Box3D& a, const Box3D& b, Scalar tau_d, Scalar tau_r) {
  SpatialEvidence e;
  e.vertical_gap = geometry::axis_gap(a, b, GapDirection::vertical);
  e.horizontal_gap = geometry::axis_gap(a, b, GapDirection::horizontal);
  e.xy_ratio = geometry::projected_overlap_ratio(a, b, Plane::xy);
  e.yz_ratio = geometry::projected_overlap_ratio(a, b, Plane::yz);
  e.zx_ratio = geometry::projected_overlap_ratio(a, b, Plane::zx);
  const bool vertical = e.vertical_gap <= tau_d && e.xy_ratio >= tau_r;
  const bool horizontal = e.horizontal_gap <= tau_d && std::max(e.yz_ratio, e.zx_ratio) >= tau_r;
  e.label = (vertical || horizontal) ? 1 : 0;
  return e;
}

int label_spatial(const Box3D& a, const Box3D& b, Scalar tau_d, Scalar tau_r) {
  if (!(tau_d > 0) || !(tau_r > 0) || tau_r > 1) {
    throw UsageError("label_spatial: need tau_d > 0 and 0 < tau_r <= 1");
  }
  return spatial_evidence(a, b, tau_d, tau_r).label;
}

std::vector<RelationLabels> label_pairs(std::span<const ObjectnessLabel> objectness,
                                        std::span<const std::pair<Index, Index>> pairs,
                                        const Scene& scene, const LabelThresholds& thresholds) {
  const auto n = static_cast<Index>(objectness.size());
  std::vector<RelationLabels> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw UsageError("label_pairs: pair (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") out of range for " + std::to_string(n) + " proposals");
    }
    const ObjectnessLabel& a = objectness[static_cast<std::size_t>(i)];
    const ObjectnessLabel& b = objectness[static_cast<std::size_t>(j)];
    RelationLabels r;
    r.pair_index = {i, j};
    r.valid = a.label == 1 && b.label == 1;
    if (a.nearest_gt_index >= 0 && b.nearest_gt_index >= 0) {
      const Box3D& ga = scene.ground_truth[static_cast<std::size_t>(a.nearest_gt_index)];
      const Box3D& gb = scene.ground_truth[static_cast<std::size_t>(b.nearest_gt_index)];
      r.semantic = label_semantic(ga, gb);
      // a box is not adjacent to itself
      r.spatial = ga.instance_id == gb.instance_id
                      ? 0
                      : label_spatial(ga, gb, thresholds.tau_d, thresholds.tau_r);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace arm3d::labels
