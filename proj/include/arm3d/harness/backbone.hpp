#pragma once

#include <vector>

#include "arm3d/geometry/box.hpp"
#include "arm3d/rng.hpp"

namespace arm3d::harness {

using geometry::Box3D;
using geometry::Scene;

/// Stand-in for a point-cloud backbone. Produces GT-anchored candidates with
/// perturbed boxes plus background candidates, each described by a noisy
/// descriptor that a learned embedding turns into proposal features.
struct BackboneConfig {
  int category_count = 10;
  int style_dims = 4;
  int proposals_per_object = 3;
  Scalar center_jitter = 0.08;
  Scalar size_jitter = 0.1;
  Scalar feature_noise = 0.1;
  Scalar offset_noise = 0.02;
  Scalar objectness_cue_noise = 0.3;
  Scalar ambiguity_rate = 0.3;
  /// Share of a corrupted object's category evidence moved to its confusable category.
  Scalar corruption_shift = 0.5;
};

/// Descriptor layout, in order: objectness cue (1), category evidence (K),
/// appearance style (S), center-offset evidence (3, x10), log-size residual
/// evidence (3, x10), log seed extents (3).
Index descriptor_width(const BackboneConfig& config);

struct RawProposals {
  Matrix descriptors;          // N x D
  std::vector<Box3D> seeds;    // candidate boxes (category unset)
  std::vector<Vector3> centers;
  /// Index into scene.ground_truth of the object a candidate was drawn
  /// around, -1 for background.
  std::vector<Index> anchor;
  /// Per ground-truth object: whether its category evidence is ambiguous.
  std::vector<bool> ambiguous;
};

/// Appearance style shared by all instances of `category` in the scene.
Eigen::VectorXd scene_style(const std::string& scene_id, int category, int dims);

/// Whether an instance's unary evidence is corrupted. Depends only on the
/// scene id and instance id, so it is stable across epochs.
bool is_ambiguous(const std::string& scene_id, std::int64_t instance_id, Scalar rate);

RawProposals backbone_stub(const Scene& scene, Index proposal_count, Rng& rng, const BackboneConfig& config);

}  // namespace arm3d::harness
