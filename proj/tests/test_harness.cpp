#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "arm3d/geometry/ops.hpp"
#include "arm3d/harness/synthetic.hpp"
#include "arm3d/harness/train.hpp"
#include "arm3d/labels/labeler.hpp"
#include "arm3d/nn/softmax.hpp"

using namespace arm3d;
using namespace arm3d::harness;

namespace {

Box3D unit_box(Vector3 lo, CategoryId c, std::int64_t id = 0) {
  Box3D b = Box3D::from_corners(lo, lo + Vector3::Ones(), c);
  b.instance_id = id;
  return b;
}

Scene one_chair_scene() {
  Scene s;
  s.scene_id = "fixture";
  s.ground_truth = {unit_box({0, 0, 0}, 0)};
  return s;
}

Dataset tiny_dataset(int train_scenes, int val_scenes) {
  SyntheticConfig sc;
  sc.category_count = 4;
  sc.max_objects = 6;
  Dataset ds;
  ds.categories = default_category_table(4);
  Rng rng(derive_seed(99, "data"));
  for (int i = 0; i < train_scenes; ++i) ds.train.push_back(generate_scene(sc, rng, "tr" + std::to_string(i)).scene);
  for (int i = 0; i < val_scenes; ++i) ds.val.push_back(generate_scene(sc, rng, "va" + std::to_string(i)).scene);
  return ds;
}

TrainConfig tiny_train_config(int epochs, std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.seed = seed;
  tc.model.channels = 16;
  tc.model.proposals = 24;
  tc.model.partners = 4;
  tc.model.backbone.category_count = 4;
  return tc;
}

}  // namespace

TEST(WeightedBce, ClosedForms) {
  const std::vector<Scalar> zero{0.0};
  EXPECT_NEAR(loss_weighted_bce(zero, std::vector<int>{1}, {}, 0.2, 0.8).value, 0.8 * std::log(2.0), 1e-12);
  EXPECT_NEAR(loss_weighted_bce(zero, std::vector<int>{0}, {}, 0.2, 0.8).value, 0.2 * std::log(2.0), 1e-12);
  const std::vector<Scalar> huge{1e4};
  const auto r = loss_weighted_bce(huge, std::vector<int>{1}, {}, 0.2, 0.8);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_LT(r.value, 1e-12);
  EXPECT_TRUE(std::isfinite(loss_weighted_bce(huge, std::vector<int>{0}, {}, 0.2, 0.8).value));
}

TEST(WeightedBce, UnitWeightsEqualPlainBce) {
  Rng rng(1);
  std::vector<Scalar> logits(50);
  std::vector<int> labels(50);
  for (std::size_t i = 0; i < 50; ++i) {
    logits[i] = rng.normal(0, 3);
    labels[i] = static_cast<int>(rng.uniform_index(2));
  }
  Scalar plain = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    const Scalar p = 1.0 / (1.0 + std::exp(-logits[i]));
    plain -= labels[i] ? std::log(p) : std::log(1 - p);
  }
  EXPECT_NEAR(loss_weighted_bce(logits, labels, {}, 1.0, 1.0).value, plain / 50, 1e-12);
}

TEST(WeightedBce, MaskingAndGradient) {
  const std::vector<Scalar> logits{0.3, -1.0, 2.0};
  const std::vector<int> labels{1, 0, 1};
  const bool mask[] = {true, false, true};
  const auto r = loss_weighted_bce(logits, labels, mask, 0.2, 0.8);
  EXPECT_EQ(r.count, 2);
  EXPECT_EQ(r.grad[1], 0.0);
  const Scalar h = 1e-6;
  for (std::size_t i : {0u, 2u}) {
    auto up = logits, dn = logits;
    up[i] += h;
    dn[i] -= h;
    const Scalar num =
        (loss_weighted_bce(up, labels, mask, 0.2, 0.8).value - loss_weighted_bce(dn, labels, mask, 0.2, 0.8).value) /
        (2 * h);
    EXPECT_NEAR(r.grad[static_cast<Index>(i)], num, 1e-8);
  }
  const bool none[] = {false, false, false};
  const auto e = loss_weighted_bce(logits, labels, none, 0.2, 0.8);
  EXPECT_TRUE(e.empty());
  EXPECT_EQ(e.value, 0.0);
}

TEST(LossTotal, PaperWeightsAndRecombination) {
  const LossBreakdown b = loss_total({1, 1, 1, 1, 1}, LossWeights{});
  EXPECT_EQ(b.total, 2.7);
  EXPECT_EQ(loss_total({}, LossWeights{}).total, 0.0);
  const LossParts p{0.3, 1.7, 0.25, 2.5, 0.9};
  const LossBreakdown r = loss_total(p, LossWeights{});
  EXPECT_EQ(r.total, 1.0 * 0.3 + 0.5 * 1.7 + 1.0 * 0.25 + 0.1 * 2.5 + 0.1 * 0.9);
  EXPECT_THROW(loss_total({1, std::nan(""), 0, 0, 0}, LossWeights{}), DivergenceError);
}

TEST(SmoothL1, Values) {
  EXPECT_NEAR(smooth_l1(0.05, 0.1), 0.5 * 0.05 * 0.05 / 0.1, 1e-15);
  EXPECT_NEAR(smooth_l1(-1.0, 0.1), 1.0 - 0.05, 1e-15);
  EXPECT_EQ(smooth_l1_grad(-1.0, 0.1), -1.0);
  EXPECT_NEAR(smooth_l1_grad(0.05, 0.1), 0.5, 1e-15);
}

TEST(Generator, InjectedRelationsRecoveredByLabeler) {
  SyntheticConfig sc;
  Rng rng(3);
  std::size_t checked = 0;
  for (int s = 0; s < 100; ++s) {
    const auto g = generate_scene(sc, rng, "g" + std::to_string(s));
    for (const auto& box : g.scene.ground_truth) {
      EXPECT_GT(box.size.minCoeff(), 0.0);
    }
    for (const auto& rel : g.injected) {
      const auto find = [&](std::int64_t id) {
        return *std::find_if(g.scene.ground_truth.begin(), g.scene.ground_truth.end(),
                             [&](const Box3D& b) { return b.instance_id == id; });
      };
      const Box3D a = find(rel.a), b = find(rel.b);
      if (rel.kind == RelationKind::semantic) {
        EXPECT_EQ(labels::label_semantic(a, b), 1);
      } else {
        EXPECT_EQ(labels::label_spatial(a, b, 0.1, 0.5), 1);
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(Generator, EdgeCasesAndValidation) {
  SyntheticConfig one;
  one.min_objects = one.max_objects = 1;
  Rng rng(4);
  const auto g = generate_scene(one, rng, "single");
  EXPECT_EQ(g.scene.ground_truth.size(), 1u);
  EXPECT_TRUE(g.injected.empty());

  SyntheticConfig stacked;
  stacked.min_objects = stacked.max_objects = 2;
  stacked.relation_injection.stacked_probability = 1.0;
  stacked.relation_injection.adjacent_probability = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto s = generate_scene(stacked, rng, "stack" + std::to_string(i));
    ASSERT_EQ(s.scene.ground_truth.size(), 2u);
    EXPECT_EQ(labels::label_spatial(s.scene.ground_truth[0], s.scene.ground_truth[1], 0.1, 0.5), 1);
  }

  SyntheticConfig bad;
  bad.ambiguity_rate = 1.5;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = {};
  bad.feature_noise = -1;
  EXPECT_THROW(bad.validate(), UsageError);

  Rng a(5), b(5);
  EXPECT_EQ(geometry::scene_to_json(generate_scene({}, a, "x").scene, default_category_table(10)),
            geometry::scene_to_json(generate_scene({}, b, "x").scene, default_category_table(10)));
}

TEST(Generator, SpatialPairFractionNearTarget) {
  SyntheticConfig sc;
  Rng rng(6);
  std::size_t pairs = 0, positive = 0;
  for (int s = 0; s < 500; ++s) {
    const auto g = generate_scene(sc, rng, "a" + std::to_string(s));
    const auto& gt = g.scene.ground_truth;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      for (std::size_t j = i + 1; j < gt.size(); ++j) {
        ++pairs;
        positive += labels::label_spatial(gt[i], gt[j], 0.1, 0.5);
      }
    }
  }
  const Scalar fraction = static_cast<Scalar>(positive) / static_cast<Scalar>(pairs);
  EXPECT_NEAR(fraction, target_spatial_pair_fraction(sc), 0.05);
}

TEST(Backbone, ExactProposalsWithoutNoise) {
  SyntheticConfig sc;
  Rng rng(7);
  const Scene s = generate_scene(sc, rng, "clean").scene;
  BackboneConfig bc;
  bc.center_jitter = bc.size_jitter = bc.feature_noise = bc.offset_noise = 0;
  bc.ambiguity_rate = 0;
  const auto p = backbone_stub(s, 64, rng, bc);
  const auto obj = labels::label_objectness(p.centers, s, 0.3);
  for (std::size_t g = 0; g < s.ground_truth.size(); ++g) {
    bool exact = false;
    for (const auto& l : obj) exact |= l.nearest_gt_index == static_cast<Index>(g) && l.distance == 0.0;
    EXPECT_TRUE(exact) << g;
  }
  EXPECT_EQ(p.descriptors.rows(), 64);
  EXPECT_EQ(p.descriptors.cols(), descriptor_width(bc));
  // background dominates when N is large
  const auto n_bg = std::count(p.anchor.begin(), p.anchor.end(), -1);
  EXPECT_GT(n_bg, 64 / 2);

  Rng a(8), b(8);
  EXPECT_EQ(backbone_stub(s, 64, a, {}).descriptors, backbone_stub(s, 64, b, {}).descriptors);
}

TEST(Detector, ZeroResidualsAndBackgroundSkipped) {
  DetectorConfig dc;
  dc.descriptor_width = 5;
  dc.channels = 8;
  dc.category_count = 3;
  const Detector det(dc);
  DetectorOutput out;
  out.class_logits.resize(3, 4);
  out.class_logits << 2, 0, 0, 0,  //
      0, 0, 0, 5,                  //
      0, 1, 3, 2.5;
  out.box_residuals = Matrix::Zero(3, 6);
  out.box_residuals(2, 0) = 0.5;
  out.box_residuals(2, 3) = std::log(2.0);
  const std::vector<Box3D> seeds{unit_box({0, 0, 0}, -1), unit_box({3, 0, 0}, -1), unit_box({6, 0, 0}, -1)};
  const auto dets = det.decode(out, seeds);
  ASSERT_EQ(dets.size(), 2u);
  EXPECT_EQ(dets[0].box.center, seeds[0].center);
  EXPECT_EQ(dets[0].box.size, seeds[0].size);
  EXPECT_EQ(dets[0].category, 0);
  const Matrix probs = nn::softmax_rows(out.class_logits);
  EXPECT_DOUBLE_EQ(dets[0].score, probs(0, 0));
  EXPECT_EQ(dets[1].proposal, 2);
  EXPECT_EQ(dets[1].category, 2);
  EXPECT_DOUBLE_EQ(dets[1].box.center.x(), 7.0);
  EXPECT_DOUBLE_EQ(dets[1].box.size.x(), 2.0);
}

TEST(Detector, TargetsFollowNearestGroundTruth) {
  Scene s = one_chair_scene();
  s.ground_truth[0].category = 2;
  RawProposals p;
  p.seeds = {Box3D::from_corners({0.1, 0, 0}, {1.1, 2, 1}), Box3D::from_corners({4, 4, 4}, {5, 5, 5})};
  for (const auto& b : p.seeds) p.centers.push_back(b.center);
  const auto t = make_targets(s, p, 4, 0.3);
  EXPECT_EQ(t.class_targets, (std::vector<int>{4, 4}));  // first center is 0.5 m away in y
  p.seeds[0] = Box3D::from_corners({0.1, 0, 0}, {1.1, 1, 2});
  p.centers[0] = p.seeds[0].center;
  const auto u = make_targets(s, p, 4, 0.6);
  EXPECT_EQ(u.class_targets[0], 2);
  EXPECT_NEAR(u.box_targets(0, 0), -0.1, 1e-15);
  EXPECT_NEAR(u.box_targets(0, 5), std::log(0.5), 1e-15);
  EXPECT_EQ(u.objectness_flags, (std::vector<int>{1, 0}));
}

TEST(MapEvaluator, HandComputedFixtures) {
  const Scene s = one_chair_scene();
  const std::vector<Scene> scenes{s};
  const Scalar thr[] = {0.5};
  const Box3D hit = unit_box({0, 0, 0}, 0);
  const Box3D miss = unit_box({5, 5, 5}, 0);
  std::vector<std::vector<ScoredDetection>> tp_first{{{hit, 0.9}, {miss, 0.8}}};
  const auto a = evaluate_map(tp_first, scenes, thr, 1);
  EXPECT_EQ(a.map_at(0.5), 1.0);
  const auto& curve = a.thresholds[0].per_category.at(0).curve;
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve[0].precision, 1.0);
  EXPECT_EQ(curve[0].recall, 1.0);
  EXPECT_EQ(curve[1].precision, 0.5);
  EXPECT_EQ(curve[1].recall, 1.0);

  std::vector<std::vector<ScoredDetection>> fp_first{{{hit, 0.8}, {miss, 0.9}}};
  EXPECT_EQ(evaluate_map(fp_first, scenes, thr, 1).map_at(0.5), 0.5);

  std::vector<std::vector<ScoredDetection>> nothing{{}};
  EXPECT_EQ(evaluate_map(nothing, scenes, thr, 1).map_at(0.5), 0.0);

  // wrong category never matches
  Box3D wrong = hit;
  wrong.category = 1;
  std::vector<std::vector<ScoredDetection>> mislabeled{{{wrong, 0.9}}};
  const auto m = evaluate_map(mislabeled, scenes, thr, 2);
  EXPECT_EQ(m.map_at(0.5), 0.0);
  EXPECT_EQ(m.excluded, std::vector<geometry::CategoryId>{1});

  // duplicates: the second one is a false positive
  std::vector<std::vector<ScoredDetection>> dup{{{hit, 0.9}, {hit, 0.7}}};
  EXPECT_EQ(evaluate_map(dup, scenes, thr, 1).map_at(0.5), 1.0);
  std::vector<std::vector<ScoredDetection>> nan_score{{{hit, std::nan("")}}};
  EXPECT_THROW(evaluate_map(nan_score, scenes, thr, 1), UsageError);
}

TEST(MapEvaluator, AveragePrecisionAreaAndMacroMean) {
  // recall steps 0.5, 0.5, 1.0 with precision 1, 0.5, 2/3: envelope 1 on [0, .5], 2/3 on (.5, 1]
  const std::vector<PrPoint> curve{{0.5, 1.0}, {0.5, 0.5}, {1.0, 2.0 / 3.0}};
  EXPECT_NEAR(average_precision(curve), 0.5 + 0.5 * 2.0 / 3.0, 1e-15);

  Scene s;
  s.scene_id = "two";
  s.ground_truth = {unit_box({0, 0, 0}, 0, 0), unit_box({3, 0, 0}, 1, 1)};
  const std::vector<Scene> scenes{s};
  const Scalar thr[] = {0.25, 0.5};
  std::vector<std::vector<ScoredDetection>> d{{{unit_box({0, 0, 0}, 0), 0.9}}};
  const auto r = evaluate_map(d, scenes, thr, 2);
  EXPECT_EQ(r.map_at(0.25), 0.5);
  EXPECT_EQ(r.thresholds[0].per_category.at(1).ap, 0.0);
}

TEST(MapEvaluator, InvariantToInputOrder) {
  Rng rng(9);
  std::vector<Scene> scenes;
  std::vector<std::vector<ScoredDetection>> dets;
  SyntheticConfig sc;
  for (int i = 0; i < 5; ++i) {
    scenes.push_back(generate_scene(sc, rng, "o" + std::to_string(i)).scene);
    std::vector<ScoredDetection> d;
    for (const auto& gt : scenes.back().ground_truth) {
      for (int k = 0; k < 3; ++k) {
        Box3D b = gt;
        b.center += Vector3(rng.normal(0, 0.2), rng.normal(0, 0.2), rng.normal(0, 0.1));
        if (rng.bernoulli(0.2)) b.category = static_cast<CategoryId>(rng.uniform_index(10));
        d.push_back({b, rng.uniform()});
      }
    }
    dets.push_back(d);
  }
  const auto ref = evaluate_map(dets, scenes, kIouThresholds, 10);
  for (int t = 0; t < 5; ++t) {
    auto shuffled = dets;
    for (auto& d : shuffled) {
      for (std::size_t i = d.size(); i > 1; --i) std::swap(d[i - 1], d[rng.uniform_index(i)]);
    }
    const auto r = evaluate_map(shuffled, scenes, kIouThresholds, 10);
    EXPECT_EQ(r.map_at(0.25), ref.map_at(0.25));
    EXPECT_EQ(r.map_at(0.5), ref.map_at(0.5));
  }
  EXPECT_GT(ref.map_at(0.25), ref.map_at(0.5));
}

TEST(Training, ZeroEpochsReturnsInitialParameters) {
  const Dataset ds = tiny_dataset(3, 2);
  const auto r = train(tiny_train_config(0, 1), ds);
  EXPECT_TRUE(r.log.empty());
  EXPECT_TRUE(nn::bitwise_equal(r.initial, r.best));
  Dataset empty = ds;
  empty.train.clear();
  EXPECT_THROW(train(tiny_train_config(1, 1), empty), UsageError);
}

TEST(Training, SameSeedSameMetrics) {
  const Dataset ds = tiny_dataset(4, 3);
  std::string a, b;
  train(tiny_train_config(2, 5), ds, [&](const EpochMetrics& m) { a += metrics_csv_row(m) + "\n"; });
  train(tiny_train_config(2, 5), ds, [&](const EpochMetrics& m) { b += metrics_csv_row(m) + "\n"; });
  EXPECT_EQ(a, b);
  std::string c;
  train(tiny_train_config(2, 6), ds, [&](const EpochMetrics& m) { c += metrics_csv_row(m) + "\n"; });
  EXPECT_NE(a, c);
}

TEST(Training, LossDecreasesOverFiveEpochs) {
  const Dataset ds = tiny_dataset(20, 2);
  std::vector<Scalar> drops;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig tc = tiny_train_config(5, seed);
    tc.eval_from_epoch = 5;
    const auto r = train(tc, ds);
    ASSERT_EQ(r.log.size(), 5u);
    drops.push_back(r.log.front().loss.total - r.log.back().loss.total);
  }
  std::sort(drops.begin(), drops.end());
  EXPECT_GT(drops[1], 0.0);
}
