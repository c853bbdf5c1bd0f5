#include "arm3d/harness/detector.hpp"

#include <cmath>
#include <memory>

#include "arm3d/nn/softmax.hpp"

namespace arm3d::harness {

using nn::LayerSpec;

Detector::Detector(DetectorConfig config) : config_(std::move(config)), arm3d_([&] {
      model::Arm3dConfig a = config_.arm3d;
      a.channels = config_.channels;
      return a;
    }()) {
  if (config_.descriptor_width <= 0) throw DimensionError("detector: descriptor width must be positive");
  if (config_.category_count < 1) throw UsageError("detector: need at least one category");
  config_.arm3d.channels = config_.channels;
  const Index c = config_.channels;
  embed_ = {LayerSpec::linear("backbone.embed", config_.descriptor_width, c, true), LayerSpec::relu(c)};
  vote_ = {LayerSpec::linear("backbone.vote", c, 3, true)};
  class_head_ = {LayerSpec::linear("head.cls.l1", 2 * c, c, false), LayerSpec::batchnorm("head.cls.bn1", c),
                 LayerSpec::relu(c), LayerSpec::linear("head.cls.out", c, config_.class_count(), true)};
  box_head_ = {LayerSpec::linear("head.box.l1", 2 * c, c, false), LayerSpec::batchnorm("head.box.bn1", c),
               LayerSpec::relu(c), LayerSpec::linear("head.box.out", c, 6, true)};
}

void Detector::init_params(ParamStore& params, Rng& rng) const {
  nn::init_mlp(params, embed_, rng);
  nn::init_mlp(params, vote_, rng);
  arm3d_.init_params(params, rng);
  nn::init_mlp(params, class_head_, rng);
  nn::init_mlp(params, box_head_, rng);
}

DetectorOutput Detector::forward(ParamStore& params, const Matrix& descriptors,
                                 const std::vector<Vector3>& centers, Rng& rng, Mode mode,
                                 DetectorCache* cache, const model::PairIndices* fixed_pairs,
                                 std::optional<std::span<const int>> selection_override) const {
  DetectorOutput out;
  out.features = nn::mlp_forward(params, embed_, descriptors, mode, cache ? &cache->embed : nullptr);
  out.votes = nn::mlp_forward(params, vote_, out.features, mode, cache ? &cache->vote : nullptr);

  const Index n = out.features.rows();
  const Index c = config_.channels;
  Matrix fused(n, 2 * c);
  fused.leftCols(c) = out.features;
  model::Arm3dCache* acache = cache ? &cache->arm3d : nullptr;
  if (config_.use_arm3d) {
    model::ProposalBatch batch{out.features, centers};
    out.arm3d = fixed_pairs ? arm3d_.forward_with_pairs(params, batch, *fixed_pairs, mode, acache)
                            : arm3d_.forward(params, batch, rng, mode, acache, selection_override);
    fused.rightCols(c) = out.arm3d.relation_features;
  } else {
    model::ObjectnessResult obj =
        arm3d_.objectness_forward(params, out.features, mode, acache ? &acache->objectness : nullptr);
    out.arm3d.objectness_logits = std::move(obj.logits);
    out.arm3d.predicted_labels = std::move(obj.labels);
    fused.rightCols(c).setZero();
  }

  out.class_logits = nn::mlp_forward(params, class_head_, fused, mode, cache ? &cache->class_head : nullptr);
  out.box_residuals = nn::mlp_forward(params, box_head_, fused, mode, cache ? &cache->box_head : nullptr);
  return out;
}

void Detector::backward(ParamStore& params, DetectorCache& cache, const DetectorGrads& grads) const {
  const Index c = config_.channels;
  const Index n = cache.embed.entries().back().output.rows();

  Matrix d_fused = Matrix::Zero(n, 2 * c);
  if (grads.class_logits.size() > 0) d_fused += nn::backward(cache.class_head, grads.class_logits, params);
  if (grads.box_residuals.size() > 0) d_fused += nn::backward(cache.box_head, grads.box_residuals, params);

  Matrix d_features = d_fused.leftCols(c);
  if (config_.use_arm3d) {
    model::Arm3dGrads ag = grads.arm3d;
    ag.relation_features = d_fused.rightCols(c);
    d_features += arm3d_.backward(params, cache.arm3d, ag);
  } else if (grads.arm3d.objectness_logits.size() > 0) {
    d_features += nn::backward(cache.arm3d.objectness, grads.arm3d.objectness_logits, params);
  }
  if (grads.votes.size() > 0) d_features += nn::backward(cache.vote, grads.votes, params);
  nn::backward(cache.embed, d_features, params);
  cache.vote.clear();
  cache.class_head.clear();
  cache.box_head.clear();
  cache.arm3d.objectness.clear();
}

Box3D apply_residuals(const Box3D& seed, const Eigen::Ref<const RowVector>& residuals) {
  Box3D b = seed;
  for (int a = 0; a < 3; ++a) {
    b.center[a] = seed.center[a] + residuals[a];
    b.size[a] = seed.size[a] * std::exp(residuals[3 + a]);
  }
  return b;
}

std::vector<Detection> Detector::decode(const DetectorOutput& out, std::span<const Box3D> seeds) const {
  const Matrix probs = nn::softmax_rows(out.class_logits);
  const Index bg = config_.background_class();
  std::vector<Detection> dets;
  for (Index i = 0; i < probs.rows(); ++i) {
    if (nn::argmax_row(probs, i) == bg) continue;
    Index best = 0;
    for (Index c = 1; c < bg; ++c) {
      if (probs(i, c) > probs(i, best)) best = c;
    }
    Detection d;
    d.box = apply_residuals(seeds[static_cast<std::size_t>(i)], out.box_residuals.row(i));
    d.category = static_cast<geometry::CategoryId>(best);
    d.box.category = d.category;
    d.score = probs(i, best);
    d.proposal = i;
    dets.push_back(d);
  }
  return dets;
}

ProposalTargets make_targets(const Scene& scene, const RawProposals& proposals, int category_count,
                             Scalar xi) {
  ProposalTargets t;
  const auto n = static_cast<Index>(proposals.seeds.size());
  t.objectness = labels::label_objectness(proposals.centers, scene, xi);
  t.objectness_flags.resize(static_cast<std::size_t>(n));
  t.class_targets.resize(static_cast<std::size_t>(n));
  t.vote_targets = Matrix::Zero(n, 3);
  t.box_targets = Matrix::Zero(n, 6);
  for (Index i = 0; i < n; ++i) {
    const auto& l = t.objectness[static_cast<std::size_t>(i)];
    t.objectness_flags[static_cast<std::size_t>(i)] = l.label;
    t.class_targets[static_cast<std::size_t>(i)] = category_count;
    if (l.nearest_gt_index < 0) continue;
    const Box3D& gt = scene.ground_truth[static_cast<std::size_t>(l.nearest_gt_index)];
    const Box3D& seed = proposals.seeds[static_cast<std::size_t>(i)];
    if (l.label == 1) t.class_targets[static_cast<std::size_t>(i)] = gt.category;
    for (int a = 0; a < 3; ++a) {
      t.vote_targets(i, a) = gt.center[a] - seed.center[a];
      t.box_targets(i, a) = gt.center[a] - seed.center[a];
      t.box_targets(i, 3 + a) = std::log(gt.size[a] / seed.size[a]);
    }
  }
  return t;
}

namespace {

// mean over positive rows of summed smooth-L1; gradient written into `grad`
Scalar regression_loss(const Matrix& pred, const Matrix& target, std::span<const int> positive, Scalar beta,
                       Matrix& grad) {
  grad = Matrix::Zero(pred.rows(), pred.cols());
  Index count = 0;
  for (int p : positive) count += p;
  if (count == 0) return 0;
  const auto m = static_cast<Scalar>(count);
  Scalar sum = 0;
  for (Index i = 0; i < pred.rows(); ++i) {
    if (positive[static_cast<std::size_t>(i)] != 1) continue;
    for (Index a = 0; a < pred.cols(); ++a) {
      const Scalar diff = pred(i, a) - target(i, a);
      sum += smooth_l1(diff, beta);
      grad(i, a) = smooth_l1_grad(diff, beta) / m;
    }
  }
  return sum / m;
}

}  // namespace

LossResult compute_losses(const Detector& detector, const DetectorOutput& out, const Scene& scene,
                          const ProposalTargets& targets, const LossConfig& config) {
  const DetectorConfig& dc = detector.config();
  const Index n = out.features.rows();
  const LossWeights& lw = config.lambdas;
  LossResult r;
  LossParts parts;

  parts.vote_analogue = regression_loss(out.votes, targets.vote_targets, targets.objectness_flags,
                                        config.smooth_l1_beta, r.grads.votes);
  parts.box = regression_loss(out.box_residuals, targets.box_targets, targets.objectness_flags,
                              config.smooth_l1_beta, r.grads.box_residuals);

  {
    std::vector<Scalar> logit(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      logit[static_cast<std::size_t>(i)] = out.arm3d.objectness_logits(i, 1) - out.arm3d.objectness_logits(i, 0);
    }
    const BceResult bce = loss_weighted_bce(logit, targets.objectness_flags, {}, config.w0, config.w1);
    parts.objectness = bce.value;
    r.grads.arm3d.objectness_logits.resize(n, 2);
    r.grads.arm3d.objectness_logits.col(1) = bce.grad;
    r.grads.arm3d.objectness_logits.col(0) = -bce.grad;
  }

  {
    const Matrix probs = nn::softmax_rows(out.class_logits);
    r.grads.class_logits = probs;
    Scalar sum = 0;
    for (Index i = 0; i < n; ++i) {
      const int t = targets.class_targets[static_cast<std::size_t>(i)];
      const RowVector row = out.class_logits.row(i);
      const Scalar peak = row.maxCoeff();
      const Scalar log_z = peak + std::log((row.array() - peak).exp().sum());
      sum += log_z - row[t];
      r.grads.class_logits(i, t) -= 1.0;
    }
    parts.classification = sum / static_cast<Scalar>(n);
    r.grads.class_logits /= static_cast<Scalar>(n);
  }

  if (dc.use_arm3d) {
    const model::PairIndices& pairs = out.arm3d.attention.pairs;
    const auto pair_list = pairs.as_pairs();
    r.relation_labels = labels::label_pairs(targets.objectness, pair_list, scene, config.thresholds);
    const std::size_t np = pair_list.size();
    std::vector<int> sem(np), spa(np);
    auto mask = std::make_unique<bool[]>(np);
    for (std::size_t p = 0; p < np; ++p) {
      sem[p] = r.relation_labels[p].semantic;
      spa[p] = r.relation_labels[p].spatial;
      mask[p] = r.relation_labels[p].valid;
    }
    const std::span<const bool> mask_span(mask.get(), np);
    const std::span<const Scalar> sem_logits(out.arm3d.semantic_logits.data(), np);
    const std::span<const Scalar> spa_logits(out.arm3d.spatial_logits.data(), np);

    if (config.relations != RelationSet::spatial) {
      const BceResult b = loss_weighted_bce(sem_logits, sem, mask_span, config.w0, config.w1);
      parts.relation += b.value;
      r.grads.arm3d.semantic_logits = b.grad * lw.relation;
    }
    if (config.relations != RelationSet::semantic) {
      const BceResult b = loss_weighted_bce(spa_logits, spa, mask_span, config.w0, config.w1);
      parts.relation += b.value;
      r.grads.arm3d.spatial_logits = b.grad * lw.relation;
    }
  }

  r.breakdown = loss_total(parts, lw);
  r.grads.votes *= lw.vote;
  r.grads.box_residuals *= lw.box;
  r.grads.class_logits *= lw.classification;
  r.grads.arm3d.objectness_logits *= lw.objectness;
  return r;
}

}  // namespace arm3d::harness
