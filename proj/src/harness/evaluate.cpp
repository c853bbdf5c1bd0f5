#include "arm3d/harness/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "arm3d/geometry/ops.hpp"

namespace arm3d::harness {

Scalar EvalReport::map_at(Scalar iou) const {
  for (const auto& t : thresholds) {
    if (t.iou_threshold == iou) return t.map;
  }
  throw UsageError("EvalReport: no threshold " + std::to_string(iou));
}

Scalar average_precision(std::span<const PrPoint> curve) {
  if (curve.empty()) return 0;
  std::vector<Scalar> rec{0.0};
  std::vector<Scalar> prec{0.0};
  for (const auto& p : curve) {
    rec.push_back(p.recall);
    prec.push_back(p.precision);
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  Scalar ap = 0;
  for (std::size_t i = 1; i < rec.size(); ++i) ap += (rec[i] - rec[i - 1]) * prec[i];
  return ap;
}

namespace {

struct Flat {
  std::size_t scene;
  std::size_t index;
  const ScoredDetection* det;
};

}  // namespace

EvalReport evaluate_map(std::span<const std::vector<ScoredDetection>> detections, std::span<const Scene> scenes,
                        std::span<const Scalar> iou_thresholds, int category_count) {
  if (detections.size() != scenes.size()) {
    throw DimensionError("evaluate_map: one detection list per scene required");
  }
  EvalReport report;
  report.scene_count = static_cast<Index>(scenes.size());

  std::vector<Index> gt_count(static_cast<std::size_t>(category_count), 0);
  for (const auto& s : scenes) {
    for (const auto& b : s.ground_truth) {
      if (b.category < 0 || b.category >= category_count) throw UsageError("evaluate_map: GT category out of range");
      ++gt_count[static_cast<std::size_t>(b.category)];
    }
  }
  for (int c = 0; c < category_count; ++c) {
    if (gt_count[static_cast<std::size_t>(c)] == 0) report.excluded.push_back(c);
  }

  std::vector<std::vector<Flat>> by_category(static_cast<std::size_t>(category_count));
  for (std::size_t s = 0; s < detections.size(); ++s) {
    for (std::size_t i = 0; i < detections[s].size(); ++i) {
      const auto& d = detections[s][i];
      if (!std::isfinite(d.score)) throw UsageError("evaluate_map: non-finite score");
      if (d.box.category < 0 || d.box.category >= category_count) continue;
      by_category[static_cast<std::size_t>(d.box.category)].push_back({s, i, &d});
    }
  }
  for (auto& list : by_category) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Flat& a, const Flat& b) { return a.det->score > b.det->score; });
  }

  for (Scalar thr : iou_thresholds) {
    ThresholdReport tr;
    tr.iou_threshold = thr;
    for (int c = 0; c < category_count; ++c) {
      const Index total = gt_count[static_cast<std::size_t>(c)];
      if (total == 0) continue;
      const auto& list = by_category[static_cast<std::size_t>(c)];
      std::vector<std::vector<bool>> matched(scenes.size());
      for (std::size_t s = 0; s < scenes.size(); ++s) matched[s].assign(scenes[s].ground_truth.size(), false);

      CategoryAp cat;
      cat.gt_count = total;
      cat.detection_count = static_cast<Index>(list.size());
      Index tp = 0;
      for (std::size_t r = 0; r < list.size(); ++r) {
        const Flat& f = list[r];
        const auto& gts = scenes[f.scene].ground_truth;
        Scalar best_iou = -1;
        std::size_t best = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
          if (gts[g].category != c || matched[f.scene][g]) continue;
          const Scalar iou = geometry::iou_3d(f.det->box, gts[g]);
          if (iou > best_iou) {
            best_iou = iou;
            best = g;
          }
        }
        if (best < gts.size() && best_iou >= thr) {
          matched[f.scene][best] = true;
          ++tp;
        }
        cat.curve.push_back({static_cast<Scalar>(tp) / static_cast<Scalar>(total),
                             static_cast<Scalar>(tp) / static_cast<Scalar>(r + 1)});
      }
      cat.ap = average_precision(cat.curve);
      tr.per_category.emplace(c, std::move(cat));
    }
    Scalar sum = 0;
    for (const auto& [c, cat] : tr.per_category) sum += cat.ap;
    tr.map = tr.per_category.empty() ? 0.0 : sum / static_cast<Scalar>(tr.per_category.size());
    report.thresholds.push_back(std::move(tr));
  }
  return report;
}

nlohmann::json eval_report_to_json(const EvalReport& report, const geometry::CategoryTable& categories) {
  nlohmann::json j;
  j["scene_count"] = report.scene_count;
  nlohmann::json excluded = nlohmann::json::array();
  for (auto c : report.excluded) excluded.push_back(categories.name_of(c));
  j["excluded_categories"] = excluded;
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& t : report.thresholds) {
    nlohmann::json jt;
    jt["iou"] = t.iou_threshold;
    jt["map"] = t.map;
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [c, cat] : t.per_category) {
      nlohmann::json jc;
      jc["ap"] = cat.ap;
      jc["gt_count"] = cat.gt_count;
      jc["detection_count"] = cat.detection_count;
      nlohmann::json curve = nlohmann::json::array();
      for (const auto& p : cat.curve) curve.push_back({p.recall, p.precision});
      jc["pr_curve"] = curve;
      per[categories.name_of(c)] = jc;
    }
    jt["per_category"] = per;
    ts.push_back(jt);
  }
  j["thresholds"] = ts;
  return j;
}

}  // namespace arm3d::harness
