#include "arm3d/harness/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "arm3d/harness/synthetic.hpp"

namespace arm3d::harness {

namespace {

// offsets are a few centimetres; scaled so they sit on the same footing as the other inputs
constexpr Scalar kEvidenceScale = 10.0;

}  // namespace

Index descriptor_width(const BackboneConfig& config) {
  return 1 + config.category_count + config.style_dims + 9;
}

Eigen::VectorXd scene_style(const std::string& scene_id, int category, int dims) {
  Rng rng(derive_seed(hash_string(scene_id), static_cast<std::uint64_t>(category) + 0x5151));
  Eigen::VectorXd s(dims);
  for (int i = 0; i < dims; ++i) s[i] = rng.normal();
  return s;
}

bool is_ambiguous(const std::string& scene_id, std::int64_t instance_id, Scalar rate) {
  Rng rng(derive_seed(hash_string(scene_id), static_cast<std::uint64_t>(instance_id) + 0xa3b1c5));
  return rng.uniform() < rate;
}

RawProposals backbone_stub(const Scene& scene, Index proposal_count, Rng& rng, const BackboneConfig& config) {
  const int k = config.category_count;
  const int s = config.style_dims;
  const Index d = descriptor_width(config);
  const Index cue = 0;
  const Index evidence = 1;
  const Index style = evidence + k;
  const Index offset = style + s;
  const Index residual = offset + 3;
  const Index extent = residual + 3;

  RawProposals out;
  out.descriptors = Matrix::Zero(proposal_count, d);
  const auto& gt = scene.ground_truth;
  for (const auto& b : gt) out.ambiguous.push_back(is_ambiguous(scene.scene_id, b.instance_id, config.ambiguity_rate));

  // anchored candidates round-robin over objects, so each object gets one
  // before any gets a second
  std::vector<Index> anchors;
  for (int r = 0; r < config.proposals_per_object; ++r) {
    for (std::size_t g = 0; g < gt.size(); ++g) anchors.push_back(static_cast<Index>(g));
  }
  if (static_cast<Index>(anchors.size()) > proposal_count) anchors.resize(static_cast<std::size_t>(proposal_count));

  Vector3 lo(0, 0, 0);
  Vector3 hi(8, 8, 2);
  if (!gt.empty()) {
    lo = gt.front().min_corner();
    hi = gt.front().max_corner();
    for (const auto& b : gt) {
      lo = lo.cwiseMin(b.min_corner());
      hi = hi.cwiseMax(b.max_corner());
    }
    lo -= Vector3::Constant(0.5);
    hi += Vector3::Constant(0.5);
    lo.z() = std::max<Scalar>(lo.z(), 0.0);
  }

  for (Index p = 0; p < proposal_count; ++p) {
    auto row = out.descriptors.row(p);
    Box3D seed;
    const bool anchored = p < static_cast<Index>(anchors.size());
    if (anchored) {
      const Index g = anchors[static_cast<std::size_t>(p)];
      const Box3D& obj = gt[static_cast<std::size_t>(g)];
      for (int a = 0; a < 3; ++a) {
        seed.center[a] = obj.center[a] + rng.normal(0.0, config.center_jitter);
        seed.size[a] = obj.size[a] * std::exp(rng.normal(0.0, config.size_jitter));
      }
      row[cue] = 1.0 + rng.normal(0.0, config.objectness_cue_noise);
      const int c = obj.category;
      const Scalar shift = out.ambiguous[static_cast<std::size_t>(g)] ? config.corruption_shift : 0.0;
      row[evidence + c] += 1.0 - shift;
      row[evidence + confusable_category(c, k)] += shift;
      const Eigen::VectorXd st = scene_style(scene.scene_id, c, s);
      for (int i = 0; i < s; ++i) row[style + i] = st[i];
      for (int a = 0; a < 3; ++a) {
        row[offset + a] = kEvidenceScale * (obj.center[a] - seed.center[a] + rng.normal(0.0, config.offset_noise));
        row[residual + a] =
            kEvidenceScale * (std::log(obj.size[a] / seed.size[a]) + rng.normal(0.0, config.offset_noise));
      }
      out.anchor.push_back(g);
    } else {
      const auto c = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
      const Vector3 base = base_size(c);
      for (int a = 0; a < 3; ++a) {
        seed.size[a] = base[a] * std::exp(rng.normal(0.0, 0.3));
        seed.center[a] = rng.uniform(lo[a], hi[a]);
      }
      row[cue] = rng.normal(0.0, config.objectness_cue_noise);
      row[evidence + c] = 1.0;
      for (int i = 0; i < s; ++i) row[style + i] = rng.normal();
      for (int a = 0; a < 3; ++a) {
        row[offset + a] = kEvidenceScale * rng.normal(0.0, 0.1);
        row[residual + a] = kEvidenceScale * rng.normal(0.0, 0.1);
      }
      out.anchor.push_back(-1);
    }
    for (Index i = evidence; i < offset; ++i) row[i] += rng.normal(0.0, config.feature_noise);
    for (int a = 0; a < 3; ++a) row[extent + a] = std::log(seed.size[a]);
    out.seeds.push_back(seed);
    out.centers.push_back(seed.center);
  }
  return out;
}

}  // namespace arm3d::harness
