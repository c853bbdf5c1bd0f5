#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "arm3d/geometry/box.hpp"
#include "arm3d/geometry/scene_io.hpp"

namespace arm3d::harness {

using geometry::Box3D;
using geometry::Scene;

struct ScoredDetection {
  Box3D box;  // box.category is the predicted category
  Scalar score = 0;
};

struct PrPoint {
  Scalar recall = 0;
  Scalar precision = 0;
};

struct CategoryAp {
  Scalar ap = 0;
  Index gt_count = 0;
  Index detection_count = 0;
  std::vector<PrPoint> curve;  // one point per detection, in descending score order
};

struct ThresholdReport {
  Scalar iou_threshold = 0;
  std::map<geometry::CategoryId, CategoryAp> per_category;  // only categories with GT
  Scalar map = 0;
};

struct EvalReport {
  std::vector<ThresholdReport> thresholds;
  /// Categories without any GT in the split; not part of the macro mean.
  std::vector<geometry::CategoryId> excluded;
  Index scene_count = 0;

  Scalar map_at(Scalar iou) const;
};

/// Area under the precision-recall curve with all-point interpolation
/// (precision replaced by its running maximum from the right).
Scalar average_precision(std::span<const PrPoint> curve);

/// detections[s] holds the post-NMS detections of scenes[s]. Detections are
/// processed by descending score, ties by input order; each one matches the
/// unmatched same-category GT with highest IoU if that IoU >= threshold.
EvalReport evaluate_map(std::span<const std::vector<ScoredDetection>> detections, std::span<const Scene> scenes,
                        std::span<const Scalar> iou_thresholds, int category_count);

nlohmann::json eval_report_to_json(const EvalReport& report, const geometry::CategoryTable& categories);

}  // namespace arm3d::harness
