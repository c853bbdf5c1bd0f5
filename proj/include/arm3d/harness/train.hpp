#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "arm3d/geometry/scene_io.hpp"
#include "arm3d/harness/backbone.hpp"
#include "arm3d/harness/detector.hpp"
#include "arm3d/harness/evaluate.hpp"
#include "arm3d/nn/optimizer.hpp"

namespace arm3d::harness {

struct Dataset {
  geometry::CategoryTable categories;
  std::vector<Scene> train;
  std::vector<Scene> val;
};

/// Model-shape settings shared by training and evaluation. Stored in
/// checkpoint metadata so a checkpoint can be evaluated on its own.
struct ModelConfig {
  Index channels = 128;
  Index proposals = 64;
  Index partners = 8;
  bool use_arm3d = true;
  bool objectness_selection = true;
  bool attention = true;
  BackboneConfig backbone;

  DetectorConfig detector_config() const;
  std::map<std::string, std::string> to_metadata() const;
  static ModelConfig from_metadata(const std::map<std::string, std::string>& metadata);
};

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  nn::OptimizerConfig optimizer;
  int epochs = 60;
  Scalar learning_rate = 1e-3;
  std::uint64_t seed = 0;
  /// Choose partners from ground-truth objectness instead of predictions.
  bool teacher_forcing = false;
  Scalar nms_iou = 0.25;
  /// Skip validation for epochs before this one (validation still runs on the last epoch).
  int eval_from_epoch = 0;
};

struct EpochMetrics {
  int epoch = 0;
  LossBreakdown loss;  // mean over training scenes
  Scalar val_map_025 = 0;
  Scalar val_map_050 = 0;
  bool evaluated = false;
};

struct TrainResult {
  nn::ParamStore initial;
  nn::ParamStore best;
  int best_epoch = -1;
  Scalar best_map_050 = -1;
  std::vector<EpochMetrics> log;
};

/// Proposals for evaluation depend only on the scene id, never on the
/// training seed, so every configuration sees the same candidates.
RawProposals eval_proposals(const Scene& scene, const ModelConfig& model);
Rng eval_pairing_rng(const Scene& scene);

/// Eval-mode forward, decode and class-aware NMS for one scene.
std::vector<ScoredDetection> detect_scene(const Detector& detector, const nn::ParamStore& params,
                                          const Scene& scene, const ModelConfig& model, Scalar nms_iou);

EvalReport evaluate_split(const Detector& detector, const nn::ParamStore& params, const std::vector<Scene>& scenes,
                          const ModelConfig& model, int category_count, Scalar nms_iou);

inline constexpr Scalar kIouThresholds[] = {0.25, 0.5};

/// Per-scene Adam steps over a shuffled training split, step-decayed rate,
/// validation after each epoch. `on_epoch` sees each metrics row as it is produced.
TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

/// Attention weights, logits and partner indices for one scene under eval mode.
nlohmann::json attention_dump(const Detector& detector, const nn::ParamStore& params, const Scene& scene,
                              const ModelConfig& model);

}  // namespace arm3d::harness
