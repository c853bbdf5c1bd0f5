// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures. Pass criterion names to run a subset, and
// --work DIR to keep the training runs of the benchmark comparison.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>

#include "arm3d/cli/commands.hpp"
#include "arm3d/cli/manifest.hpp"
#include "arm3d/cli/report.hpp"
#include "arm3d/geometry/ops.hpp"
#include "arm3d/harness/losses.hpp"
#include "arm3d/harness/synthetic.hpp"
#include "arm3d/harness/train.hpp"
#include "arm3d/labels/labeler.hpp"
#include "oracles.hpp"

using namespace arm3d;
using geometry::Box3D;
using geometry::Scene;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Matrix random_matrix(Index r, Index c, Rng& rng, Scalar scale = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

fs::path g_work;

// ---------------------------------------------------------------------------
// analytic gradients of the total loss against central differences

Outcome gradient_oracle() {
  constexpr Scalar h = 1e-5;
  constexpr Scalar floor = 1e-5;  // |grad| below this is compared in absolute terms
  const std::vector<std::string> modules = {"arm3d.objectness",        "arm3d.relation.trunk",
                                            "arm3d.relation.semantic", "arm3d.relation.spatial",
                                            "arm3d.attention.key",     "arm3d.attention.query",
                                            "arm3d.fphi",              "backbone.embed",
                                            "backbone.vote",           "head.cls",
                                            "head.box"};
  std::map<std::string, Scalar> worst;
  for (const auto& m : modules) worst[m] = -1;
  Scalar overall = 0;
  const int configs = 24;
  for (int cfg = 0; cfg < configs; ++cfg) {
    Rng rng(derive_seed(1000 + static_cast<std::uint64_t>(cfg), "gradient"));
    harness::SyntheticConfig sc;
    sc.category_count = 4;
    sc.min_objects = 2;
    sc.max_objects = 5;
    const Scene scene = harness::generate_scene(sc, rng, "grad").scene;
    harness::ModelConfig mc;
    mc.channels = 4 * (2 + static_cast<Index>(rng.uniform_index(2)));
    mc.proposals = 8 + static_cast<Index>(rng.uniform_index(6));
    mc.partners = 1 + static_cast<Index>(rng.uniform_index(4));
    mc.objectness_selection = cfg % 2 == 0;
    mc.attention = cfg % 3 != 2;
    mc.backbone.category_count = 4;
    harness::LossConfig lc;
    lc.relations = static_cast<harness::RelationSet>(cfg % 3);
    const harness::Detector det(mc.detector_config());
    nn::ParamStore params;
    det.init_params(params, rng);
    const auto props = harness::backbone_stub(scene, mc.proposals, rng, mc.backbone);
    const auto targets = harness::make_targets(scene, props, 4, lc.thresholds.xi);

    // the partner draw is discrete, so it is held fixed
    Rng pair_rng(7);
    const auto first = det.forward(params, props.descriptors, props.centers, pair_rng, Mode::train);
    const model::PairIndices pairs = first.arm3d.attention.pairs;
    auto loss_at = [&](nn::ParamStore& p) {
      Rng r(0);
      const auto out = det.forward(p, props.descriptors, props.centers, r, Mode::train, nullptr, &pairs);
      return harness::compute_losses(det, out, scene, targets, lc).breakdown.total;
    };

    nn::ParamStore work = params;
    work.zero_grad();
    harness::DetectorCache cache;
    Rng r0(0);
    const auto out = det.forward(work, props.descriptors, props.centers, r0, Mode::train, &cache, &pairs);
    const auto loss = harness::compute_losses(det, out, scene, targets, lc);
    det.backward(work, cache, loss.grads);

    nn::ParamStore probe = params;
    for (const auto& [name, p] : params.entries()) {
      std::string module;
      for (const auto& m : modules) {
        if (name.rfind(m + ".", 0) == 0) module = m;
      }
      if (module.empty()) {
        std::cerr << "gradient oracle: parameter " << name << " belongs to no listed module\n";
        return {false, "unlisted parameter " + name};
      }
      Matrix& v = probe.at(name).value;
      for (Index i = 0; i < v.size(); ++i) {
        const Scalar orig = v.data()[i];
        v.data()[i] = orig + h;
        const Scalar up = loss_at(probe);
        v.data()[i] = orig - h;
        const Scalar down = loss_at(probe);
        v.data()[i] = orig;
        const Scalar numeric = (up - down) / (2 * h);
        const Scalar analytic = work.at(name).grad.data()[i];
        const Scalar rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), floor});
        worst[module] = std::max(worst[module], rel);
        overall = std::max(overall, rel);
      }
    }
  }
  std::string detail = std::to_string(configs) + " configs, max rel err " + fmt("%.2e", overall) + " (";
  bool all_seen = true;
  for (const auto& [m, w] : worst) {
    if (w < 0) all_seen = false;
    detail += m + " " + fmt("%.1e", w) + ", ";
  }
  detail.resize(detail.size() - 2);
  detail += ")";
  return {all_seen && overall < 1e-4, detail};
}

// ---------------------------------------------------------------------------

model::ProposalBatch random_batch(Index n, Index c, Rng& rng, Scalar scale) {
  model::ProposalBatch b;
  b.features = random_matrix(n, c, rng, scale);
  for (Index i = 0; i < n; ++i) b.centers.emplace_back(rng.normal(), rng.normal(), rng.normal());
  return b;
}

Index first_argmax(const Eigen::Ref<const RowVector>& row) {
  Index best = 0;
  for (Index k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

Outcome attention_invariants() {
  Rng rng(derive_seed(11, "attention"));
  Scalar worst_sum = 0;
  int argmax_mismatch = 0, rounding_ties = 0, non_uniform = 0, rows = 0;
  for (int pass = 0; pass < 1000; ++pass) {
    model::Arm3dConfig cfg;
    cfg.channels = 4 * (1 + static_cast<Index>(rng.uniform_index(8)));
    cfg.partners = 1 + static_cast<Index>(rng.uniform_index(8));
    cfg.objectness_selection = rng.bernoulli(0.5);
    const Index n = 1 + static_cast<Index>(rng.uniform_index(40));
    // large feature scales push tanh into saturation and logits apart
    const Scalar scale = std::pow(10.0, rng.uniform(-1.0, 1.5));
    const model::ProposalBatch batch = random_batch(n, cfg.channels, rng, scale);
    const std::uint64_t pair_seed = rng.next_u64();

    model::Arm3dModule soft(cfg);
    nn::ParamStore params;
    soft.init_params(params, rng);
    Rng r1(pair_seed);
    const auto out = soft.forward(params, batch, r1, Mode::eval);
    const Matrix& w = out.attention.weights;
    for (Index i = 0; i < w.rows(); ++i) {
      worst_sum = std::max(worst_sum, std::abs(w.row(i).sum() - 1.0));
      // weights may tie where logits differ by an ulp; the top logit must still carry the top weight
      const Index top = first_argmax(out.attention.logits.row(i));
      if (w(i, top) != w.row(i).maxCoeff()) ++argmax_mismatch;
      if (first_argmax(w.row(i)) != top) ++rounding_ties;
      ++rows;
    }

    cfg.attention = false;
    model::Arm3dModule equal(cfg);
    Rng r2(pair_seed);
    const auto eq = equal.forward(params, batch, r2, Mode::eval);
    const Scalar u = 1.0 / static_cast<Scalar>(cfg.partners);
    for (Index i = 0; i < eq.attention.weights.size(); ++i) {
      if (eq.attention.weights.data()[i] != u) ++non_uniform;
    }
  }
  return {worst_sum <= 1e-9 && argmax_mismatch == 0 && non_uniform == 0,
          "1000 passes, " + std::to_string(rows) + " rows: max |sum-1| " + fmt("%.1e", worst_sum) +
              ", argmax mismatches " + std::to_string(argmax_mismatch) + " (rounding ties " +
              std::to_string(rounding_ties) + "), non-uniform equal-weight entries " + std::to_string(non_uniform)};
}

// ---------------------------------------------------------------------------

Outcome outside_inside_sum() {
  Rng rng(derive_seed(12, "fphi"));
  Scalar worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    model::Arm3dConfig cfg;
    cfg.channels = 4 * (1 + static_cast<Index>(rng.uniform_index(8)));
    cfg.partners = 1 + static_cast<Index>(rng.uniform_index(8));
    const Index n = 2 + static_cast<Index>(rng.uniform_index(30));
    const model::Arm3dModule m(cfg);
    nn::ParamStore params;
    m.init_params(params, rng);
    params.set_value("arm3d.fphi.bias", random_matrix(1, cfg.channels, rng));
    const model::ProposalBatch batch = random_batch(n, cfg.channels, rng, 1.0);
    Rng pr(rng.next_u64());
    const auto out = m.forward(params, batch, pr, Mode::eval);
    const Matrix pf = model::build_pair_features(batch.features, out.attention.pairs);
    const Matrix outside = m.relation_features(params, out.attention, pf);

    // sum_j w_ij * (W pair_ij + b), evaluated term by term
    const Matrix& w = params.at("arm3d.fphi.weight").value;
    const Matrix& b = params.at("arm3d.fphi.bias").value;
    const Index nk = cfg.partners;
    Matrix inside = Matrix::Zero(n, cfg.channels);
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < nk; ++k) {
        const Scalar wk = out.attention.weights(i, k);
        for (Index o = 0; o < cfg.channels; ++o) {
          Scalar s = b(0, o);
          for (Index c = 0; c < pf.cols(); ++c) s += w(o, c) * pf(i * nk + k, c);
          inside(i, o) += wk * s;
        }
      }
    }
    worst = std::max(worst, (outside - inside).cwiseAbs().maxCoeff());
    worst = std::max(worst, (outside - m.relation_features_inside_sum(params, out.attention, pf)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, "100 instances, max |outside - inside| " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------------------
// Monte-Carlo geometry with a plain 64-bit engine

struct FastUniform {
  std::mt19937_64 engine;
  explicit FastUniform(std::uint64_t seed) : engine(seed) {}
  Scalar operator()() { return static_cast<Scalar>(engine() >> 11) * 0x1.0p-53; }
};

bool in_interval(Scalar x, Scalar center, Scalar size) { return std::abs(x - center) <= size / 2; }

Scalar mc_ratio(const Box3D& a, const Box3D& b, int u, int v, FastUniform& rand, int samples) {
  auto frac = [&](const Box3D& from, const Box3D& other) {
    int hits = 0;
    for (int s = 0; s < samples; ++s) {
      const Scalar x = from.center[u] + from.size[u] * (rand() - 0.5);
      const Scalar y = from.center[v] + from.size[v] * (rand() - 0.5);
      hits += in_interval(x, other.center[u], other.size[u]) && in_interval(y, other.center[v], other.size[v]);
    }
    return static_cast<Scalar>(hits) / samples;
  };
  return std::max(frac(a, b), frac(b, a));
}

Scalar mc_iou(const Box3D& a, const Box3D& b, FastUniform& rand, int samples) {
  const Vector3 lo = a.min_corner().cwiseMin(b.min_corner());
  const Vector3 hi = a.max_corner().cwiseMax(b.max_corner());
  int in_a = 0, in_b = 0, both = 0;
  for (int s = 0; s < samples; ++s) {
    Vector3 p;
    for (int k = 0; k < 3; ++k) p[k] = lo[k] + (hi[k] - lo[k]) * rand();
    const bool ia = oracle::inside(a, p), ib = oracle::inside(b, p);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  const int uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<Scalar>(both) / uni;
}

int spatial_by_corners(const Box3D& a, const Box3D& b, Scalar tau_d, Scalar tau_r) {
  const Vector3 alo = a.min_corner(), ahi = a.max_corner(), blo = b.min_corner(), bhi = b.max_corner();
  auto overlap = [&](int k) { return std::max(0.0, std::min(ahi[k], bhi[k]) - std::max(alo[k], blo[k])); };
  auto gap = [&](int k) { return std::max({0.0, alo[k] - bhi[k], blo[k] - ahi[k]}); };
  auto ratio = [&](int u, int v) {
    const Scalar inter = overlap(u) * overlap(v);
    if (inter <= 0) return 0.0;
    return std::min(1.0, std::max(inter / (a.size[u] * a.size[v]), inter / (b.size[u] * b.size[v])));
  };
  const bool vertical = gap(2) <= tau_d && ratio(0, 1) >= tau_r;
  const bool horizontal =
      std::hypot(gap(0), gap(1)) <= tau_d && std::max(ratio(1, 2), ratio(2, 0)) >= tau_r;
  return vertical || horizontal;
}

Outcome geometric_oracles() {
  constexpr int samples = 1000000;
  Rng rng(derive_seed(13, "geometry"));
  FastUniform rand(derive_seed(13, "mc"));
  Scalar worst_ratio = 0, worst_iou = 0;
  for (int i = 0; i < 1000; ++i) {
    const Box3D a = oracle::random_box(rng);
    const Box3D b = oracle::random_box(rng);
    for (auto plane : {geometry::Plane::xy, geometry::Plane::yz, geometry::Plane::zx}) {
      const auto [u, v] = geometry::plane_axes(plane);
      worst_ratio = std::max(worst_ratio, std::abs(geometry::projected_overlap_ratio(a, b, plane) -
                                                   mc_ratio(a, b, u, v, rand, samples)));
    }
    worst_iou = std::max(worst_iou, std::abs(geometry::iou_3d(a, b) - mc_iou(a, b, rand, samples)));
  }

  int objectness_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Scene s;
    s.scene_id = "obj";
    const int gts = static_cast<int>(rng.uniform_index(8));
    for (int g = 0; g < gts; ++g) {
      Box3D b = oracle::random_box(rng, 2.0);
      b.instance_id = g;
      s.ground_truth.push_back(b);
    }
    std::vector<Vector3> props;
    for (int p = 0; p < 16; ++p) {
      Vector3 c(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
      if (gts > 0 && p % 2) {
        c = s.ground_truth[rng.uniform_index(static_cast<std::uint64_t>(gts))].center +
            Vector3(rng.normal(0, 0.2), rng.normal(0, 0.2), rng.normal(0, 0.2));
      }
      props.push_back(c);
    }
    const auto labels = labels::label_objectness(props, s, 0.3);
    for (std::size_t p = 0; p < props.size(); ++p) {
      Scalar best = std::numeric_limits<Scalar>::infinity();
      Index arg = -1;
      for (int g = 0; g < gts; ++g) {
        const Vector3 d = props[p] - s.ground_truth[static_cast<std::size_t>(g)].center;
        const Scalar dist = std::sqrt(d.x() * d.x() + d.y() * d.y() + d.z() * d.z());
        if (dist < best) {
          best = dist;
          arg = g;
        }
      }
      const int expected = best <= 0.3 ? 1 : 0;
      if (labels[p].label != expected || labels[p].nearest_gt_index != arg) ++objectness_mismatch;
    }
  }

  int asym = 0, non_monotone = 0, oracle_mismatch = 0;
  for (int i = 0; i < 10000; ++i) {
    const Box3D a = oracle::random_box(rng, 1.5);
    const Box3D b = oracle::random_box(rng, 1.5);
    const Scalar td = rng.uniform(0.0, 0.5), tr = rng.uniform(0.05, 1.0);
    const int l = labels::label_spatial(a, b, td, tr);
    asym += l != labels::label_spatial(b, a, td, tr);
    oracle_mismatch += l != spatial_by_corners(a, b, td, tr);
    const Scalar td2 = td + rng.uniform(0.0, 0.3), tr2 = tr * rng.uniform(0.0, 1.0);
    non_monotone += l > labels::label_spatial(a, b, td2, tr2);
  }
  const bool ok = worst_ratio <= 1e-2 && worst_iou <= 1e-2 && objectness_mismatch == 0 && asym == 0 &&
                  non_monotone == 0 && oracle_mismatch == 0;
  return {ok, "1000 pairs x 1e6 samples: max ratio err " + fmt("%.2e", worst_ratio) + ", max IoU err " +
                  fmt("%.2e", worst_iou) + "; objectness mismatches " + std::to_string(objectness_mismatch) +
                  "; spatial on 1e4 pairs: asymmetric " + std::to_string(asym) + ", non-monotone " +
                  std::to_string(non_monotone) + ", corner-oracle mismatches " + std::to_string(oracle_mismatch)};
}

// ---------------------------------------------------------------------------

Outcome labeler_consistency() {
  const harness::SyntheticConfig sc;
  const labels::LabelThresholds t;
  Rng rng(derive_seed(14, "consistency"));
  std::size_t injected = 0, recovered = 0, semantic = 0, spatial = 0;
  for (int i = 0; i < 500; ++i) {
    const auto g = harness::generate_scene(sc, rng, "c" + std::to_string(i));
    std::map<std::int64_t, const Box3D*> by_id;
    for (const auto& b : g.scene.ground_truth) by_id[b.instance_id] = &b;
    for (const auto& rel : g.injected) {
      ++injected;
      const auto ia = by_id.find(rel.a), ib = by_id.find(rel.b);
      if (ia == by_id.end() || ib == by_id.end()) continue;
      const bool sem = rel.kind == harness::RelationKind::semantic;
      (sem ? semantic : spatial)++;
      recovered += sem ? labels::label_semantic(*ia->second, *ib->second)
                       : labels::label_spatial(*ia->second, *ib->second, t.tau_d, t.tau_r);
    }
  }
  return {injected > 0 && recovered == injected,
          "500 scenes: " + std::to_string(recovered) + " / " + std::to_string(injected) + " injected relations (" +
              std::to_string(semantic) + " semantic, " + std::to_string(spatial) + " spatial)"};
}

// ---------------------------------------------------------------------------

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "arm3d");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

Outcome benchmark_comparison() {
  const fs::path dir = g_work / "benchmark";
  fs::remove_all(dir);
  const std::string data = (dir / "data").string();
  if (run_cli({"generate", "--out", data, "--seed", "1", "--scenes", "200", "--val-scenes", "50"}) != 0) {
    return {false, "dataset generation failed"};
  }
  struct Variant {
    std::string name;
    std::vector<std::string> flags;
  };
  const std::vector<Variant> variants = {
      {"no-arm3d", {"--no-arm3d"}}, {"full", {}}, {"obm-only", {"--equal-attention"}}, {"atm-only", {"--no-obm"}}};
  std::vector<cli::RunSummary> runs;
  for (const auto& v : variants) {
    std::vector<std::string> args = {"train", "--data", data, "--out", (dir / v.name).string(), "--seed", "1,2,3",
                                     "--epochs", "20", "--eval-from", "10", "--quiet"};
    args.insert(args.end(), v.flags.begin(), v.flags.end());
    if (run_cli(args) != 0) return {false, "training " + v.name + " failed"};
    runs.push_back(cli::load_run(dir / v.name));
  }
  std::vector<std::string> report = {"report", "--out", (dir / "report").string()};
  for (const auto& v : variants) report.insert(report.end(), {"--run", (dir / v.name).string()});
  if (run_cli(report) != 0) return {false, "report failed"};

  const Scalar base = runs[0].mean_map_050(), full = runs[1].mean_map_050();
  const Scalar obm = runs[2].mean_map_050(), atm = runs[3].mean_map_050();
  std::string detail = "mean val mAP@0.5 over seeds 1-3: full " + fmt("%.4f", full) + ", no-arm3d " +
                       fmt("%.4f", base) + " (" + fmt("%+.4f", full - base) + "), obm-only " + fmt("%.4f", obm) +
                       " (" + fmt("%+.4f", full - obm) + "), atm-only " + fmt("%.4f", atm) + " (" +
                       fmt("%+.4f", full - atm) + ")";
  return {full > base && full >= obm && full >= atm, detail};
}

// ---------------------------------------------------------------------------

Outcome loss_arithmetic() {
  const auto b = harness::loss_total({1, 1, 1, 1, 1}, harness::LossWeights{});
  const std::vector<Scalar> zero{0.0};
  const Scalar pos = harness::loss_weighted_bce(zero, std::vector<int>{1}, {}, 0.2, 0.8).value;
  const Scalar neg = harness::loss_weighted_bce(zero, std::vector<int>{0}, {}, 0.2, 0.8).value;
  const Scalar e_pos = std::abs(pos - 0.8 * std::log(2.0)), e_neg = std::abs(neg - 0.2 * std::log(2.0));
  return {b.total == 2.7 && e_pos <= 1e-12 && e_neg <= 1e-12,
          "total " + fmt("%.17g", b.total) + ", BCE errors " + fmt("%.1e", e_pos) + " / " + fmt("%.1e", e_neg)};
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> files_under(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = cli::read_text_file(e.path());
  }
  return out;
}

Outcome determinism() {
  const fs::path dir = g_work / "determinism";
  fs::remove_all(dir);
  std::vector<std::string> differing;
  for (const char* run : {"a", "b"}) {
    const fs::path r = dir / run;
    const std::string data = (r / "data").string();
    if (run_cli({"generate", "--out", data, "--seed", "9", "--scenes", "30", "--val-scenes", "10"}) != 0 ||
        run_cli({"train", "--data", data, "--out", (r / "train").string(), "--seed", "4", "--epochs", "3", "--channels",
             "32", "--quiet"}) != 0 ||
        run_cli({"eval", "--checkpoint", (r / "train/seed_4/best.ckpt").string(), "--data", data, "--out",
             (r / "eval").string()}) != 0) {
      return {false, "pipeline run failed"};
    }
  }
  const auto data_a = files_under(dir / "a/data"), data_b = files_under(dir / "b/data");
  const bool data_same = data_a == data_b;
  const bool csv_same = cli::read_text_file(dir / "a/train/seed_4/metrics.csv") ==
                        cli::read_text_file(dir / "b/train/seed_4/metrics.csv");
  const bool eval_same = cli::read_text_file(dir / "a/eval/eval.json") == cli::read_text_file(dir / "b/eval/eval.json") &&
                         cli::read_text_file(dir / "a/train/seed_4/eval_val.json") ==
                             cli::read_text_file(dir / "b/train/seed_4/eval_val.json");
  const bool ckpt_same = cli::read_text_file(dir / "a/train/seed_4/best.ckpt") ==
                         cli::read_text_file(dir / "b/train/seed_4/best.ckpt");
  auto yn = [](bool b) { return b ? std::string("identical") : std::string("DIFFERENT"); };
  return {data_same && csv_same && eval_same && ckpt_same,
          "dataset (" + std::to_string(data_a.size()) + " files) " + yn(data_same) + ", metrics.csv " + yn(csv_same) +
              ", eval JSON " + yn(eval_same) + ", checkpoint " + yn(ckpt_same)};
}

// ---------------------------------------------------------------------------

Outcome map_fixtures() {
  Scene s;
  s.scene_id = "fixture";
  s.ground_truth = {Box3D::from_corners({0, 0, 0}, {1, 1, 1}, 0, 0)};
  const std::vector<Scene> scenes{s};
  const Scalar thr[] = {0.5};
  const Box3D hit = Box3D::from_corners({0, 0, 0}, {1, 1, 1}, 0);
  const Box3D miss = Box3D::from_corners({5, 5, 5}, {6, 6, 6}, 0);
  std::vector<std::vector<harness::ScoredDetection>> tp_first{{{hit, 0.9}, {miss, 0.8}}};
  std::vector<std::vector<harness::ScoredDetection>> fp_first{{{hit, 0.8}, {miss, 0.9}}};
  const Scalar a = harness::evaluate_map(tp_first, scenes, thr, 1).map_at(0.5);
  const Scalar b = harness::evaluate_map(fp_first, scenes, thr, 1).map_at(0.5);

  // two GT, detections TP, FP, TP: recall .5/.5/1, precision 1/.5/(2/3)
  Scene two;
  two.scene_id = "two";
  two.ground_truth = {Box3D::from_corners({0, 0, 0}, {1, 1, 1}, 0, 0), Box3D::from_corners({3, 0, 0}, {4, 1, 1}, 0, 1)};
  const std::vector<Scene> scenes2{two};
  std::vector<std::vector<harness::ScoredDetection>> three{
      {{hit, 0.9}, {miss, 0.8}, {Box3D::from_corners({3, 0, 0}, {4, 1, 1}, 0), 0.7}}};
  const Scalar c = harness::evaluate_map(three, scenes2, thr, 1).map_at(0.5);
  const Scalar c_expected = 0.5 * 1.0 + 0.5 * (2.0 / 3.0);
  return {a == 1.0 && b == 0.5 && std::abs(c - c_expected) <= 1e-15,
          "TP-then-FP AP " + fmt("%.17g", a) + ", FP-then-TP AP " + fmt("%.17g", b) + ", TP-FP-TP AP " +
              fmt("%.17g", c) + " (expected " + fmt("%.17g", c_expected) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  g_work = fs::temp_directory_path() / "arm3d_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      only.insert(a);
    }
  }
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-oracle", gradient_oracle},
      {"attention-invariants", attention_invariants},
      {"outside-inside-sum", outside_inside_sum},
      {"geometric-oracles", geometric_oracles},
      {"labeler-generator-consistency", labeler_consistency},
      {"benchmark-comparison", benchmark_comparison},
      {"loss-arithmetic", loss_arithmetic},
      {"determinism", determinism},
      {"map-fixtures", map_fixtures},
  };
  int failures = 0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt("%.1f", secs) << " s]"
              << std::endl;
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "total " << fmt("%.1f", total) << " s, " << failures << " failed" << std::endl;
  return failures;
}
