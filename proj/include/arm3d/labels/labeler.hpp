#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "arm3d/geometry/box.hpp"

namespace arm3d::labels {

using geometry::Box3D;
using geometry::Scene;

/// Ground-truth thresholds: objectness distance, spatial gap, overlap ratio.
struct LabelThresholds {
  Scalar xi = 0.3;
  Scalar tau_d = 0.1;
  Scalar tau_r = 0.5;
};

struct ObjectnessLabel {
  Index proposal_index = 0;
  int label = 0;
  /// Instance id of the nearest ground-truth box; empty for an empty scene.
  std::optional<std::int64_t> nearest_gt;
  /// Position of that box in scene.ground_truth, -1 when empty.
  Index nearest_gt_index = -1;
  /// Infinity for an empty scene.
  Scalar distance = 0;
};

/// Label 1 iff the nearest ground-truth center is within `xi` (inclusive).
std::vector<ObjectnessLabel> label_objectness(std::span<const Vector3> proposal_centers,
                                              const Scene& scene, Scalar xi);

/// Same category, different instance.
int label_semantic(const Box3D& a, const Box3D& b);

/// Gap and overlap quantities behind a spatial label, kept for audit dumps.
struct SpatialEvidence {
  Scalar vertical_gap = 0;
  Scalar horizontal_gap = 0;
  Scalar xy_ratio = 0;
  Scalar yz_ratio = 0;
  Scalar zx_ratio = 0;
  int label = 0;
};

SpatialEvidence spatial_evidence(const Box3D& a, const Box3D& b, Scalar tau_d, Scalar tau_r);

/// 1 iff (vertical gap <= tau_d and xy ratio >= tau_r) or
///      (horizontal gap <= tau_d and max(yz, zx ratio) >= tau_r).
int label_spatial(const Box3D& a, const Box3D& b, Scalar tau_d, Scalar tau_r);

struct RelationLabels {
  std::pair<Index, Index> pair_index;
  int semantic = 0;
  int spatial = 0;
  bool valid = false;
};

/// Relation labels for proposal pairs, computed on each endpoint's nearest
/// ground-truth object. Pairs with an objectness-0 endpoint are not valid.
/// Throws UsageError for out-of-range indices.
std::vector<RelationLabels> label_pairs(std::span<const ObjectnessLabel> objectness,
                                        std::span<const std::pair<Index, Index>> pairs,
                                        const Scene& scene, const LabelThresholds& thresholds);

}  // namespace arm3d::labels
