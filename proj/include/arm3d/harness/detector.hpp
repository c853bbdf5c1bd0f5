#pragma once

#include <optional>
#include <span>
#include <vector>

#include "arm3d/geometry/box.hpp"
#include "arm3d/harness/backbone.hpp"
#include "arm3d/harness/losses.hpp"
#include "arm3d/labels/labeler.hpp"
#include "arm3d/model/arm3d.hpp"

namespace arm3d::harness {

using model::Arm3dModule;
using nn::ParamStore;

enum class RelationSet { all, semantic, spatial };

struct DetectorConfig {
  Index descriptor_width = 0;
  Index channels = 128;
  int category_count = 10;
  model::Arm3dConfig arm3d;
  /// When false, relation features are replaced by zeros and relation heads
  /// are not run (the host-detector baseline).
  bool use_arm3d = true;

  Index class_count() const { return category_count + 1; }
  Index background_class() const { return category_count; }
};

/// Toy proposal-based detector: learned descriptor embedding, a vote
/// regression head, ARM3D, and classification and box branches over the
/// fused [proposal, relation] features.
struct DetectorOutput {
  Matrix features;         // N x C
  Matrix votes;            // N x 3 predicted offsets to the object center
  model::Arm3dOutput arm3d;
  Matrix class_logits;     // N x (K + 1); last column is background
  Matrix box_residuals;    // N x 6: center delta (m), log-size delta
};

struct DetectorCache {
  nn::Tape embed;
  nn::Tape vote;
  nn::Tape class_head;
  nn::Tape box_head;
  model::Arm3dCache arm3d;
};

struct DetectorGrads {
  Matrix votes;
  Matrix class_logits;
  Matrix box_residuals;
  model::Arm3dGrads arm3d;
};

struct Detection {
  Box3D box;
  geometry::CategoryId category = geometry::kNoCategory;
  Scalar score = 0;
  Index proposal = -1;
};

class Detector {
 public:
  explicit Detector(DetectorConfig config);

  const DetectorConfig& config() const { return config_; }
  const Arm3dModule& arm3d() const { return arm3d_; }

  void init_params(ParamStore& params, Rng& rng) const;

  DetectorOutput forward(ParamStore& params, const Matrix& descriptors, const std::vector<Vector3>& centers,
                         Rng& rng, Mode mode, DetectorCache* cache = nullptr,
                         const model::PairIndices* fixed_pairs = nullptr,
                         std::optional<std::span<const int>> selection_override = std::nullopt) const;

  void backward(ParamStore& params, DetectorCache& cache, const DetectorGrads& grads) const;

  /// Decodes non-background proposals into boxes (before NMS).
  std::vector<Detection> decode(const DetectorOutput& out, std::span<const Box3D> seeds) const;

  const nn::MlpSpec& embed_spec() const { return embed_; }
  const nn::MlpSpec& vote_spec() const { return vote_; }
  const nn::MlpSpec& class_head_spec() const { return class_head_; }
  const nn::MlpSpec& box_head_spec() const { return box_head_; }

 private:
  DetectorConfig config_;
  Arm3dModule arm3d_;
  nn::MlpSpec embed_;
  nn::MlpSpec vote_;
  nn::MlpSpec class_head_;
  nn::MlpSpec box_head_;
};

/// Box decoded from a seed and residuals: center + delta, size * exp(delta).
Box3D apply_residuals(const Box3D& seed, const Eigen::Ref<const RowVector>& residuals);

/// Supervision for one scene's proposals.
struct ProposalTargets {
  std::vector<labels::ObjectnessLabel> objectness;
  std::vector<int> objectness_flags;
  std::vector<int> class_targets;
  Matrix vote_targets;  // N x 3, rows of negatives unused
  Matrix box_targets;   // N x 6
};

ProposalTargets make_targets(const Scene& scene, const RawProposals& proposals, int category_count,
                             Scalar xi);

struct LossConfig {
  Scalar w0 = 0.2;
  Scalar w1 = 0.8;
  LossWeights lambdas;
  RelationSet relations = RelationSet::all;
  Scalar smooth_l1_beta = 0.1;
  labels::LabelThresholds thresholds;
};

struct LossResult {
  LossBreakdown breakdown;
  DetectorGrads grads;
  std::vector<labels::RelationLabels> relation_labels;
};

/// Loss terms and their gradients for one scene.
///   vote_analogue: smooth-L1 of vote offsets vs. nearest-GT center offsets, mean over positives
///   objectness:    weighted BCE on logit(obj) - logit(no obj), all proposals
///   box:           smooth-L1 of the 6 residuals, mean over positives
///   classification: softmax cross-entropy over K + 1 classes, mean over proposals
///   relation:      semantic + spatial weighted BCE over valid pairs
LossResult compute_losses(const Detector& detector, const DetectorOutput& out, const Scene& scene,
                          const ProposalTargets& targets, const LossConfig& config);

}  // namespace arm3d::harness
