#include "arm3d/harness/train.hpp"

#include <cstdio>
#include <numeric>

#include "arm3d/geometry/nms.hpp"

namespace arm3d::harness {

DetectorConfig ModelConfig::detector_config() const {
  DetectorConfig d;
  d.descriptor_width = descriptor_width(backbone);
  d.channels = channels;
  d.category_count = backbone.category_count;
  d.use_arm3d = use_arm3d;
  d.arm3d.channels = channels;
  d.arm3d.partners = partners;
  d.arm3d.objectness_selection = objectness_selection;
  d.arm3d.attention = attention;
  return d;
}

namespace {

std::string format_real(Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::string& require_key(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw FormatError("checkpoint metadata lacks '" + key + "'");
  return it->second;
}

long long parse_int(const std::map<std::string, std::string>& m, const std::string& key) {
  const std::string& v = require_key(m, key);
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw FormatError("");
    return x;
  } catch (const std::exception&) {
    throw FormatError("checkpoint metadata '" + key + "' is not an integer: " + v);
  }
}

Scalar parse_real(const std::map<std::string, std::string>& m, const std::string& key) {
  const std::string& v = require_key(m, key);
  try {
    std::size_t used = 0;
    const Scalar x = std::stod(v, &used);
    if (used != v.size()) throw FormatError("");
    return x;
  } catch (const std::exception&) {
    throw FormatError("checkpoint metadata '" + key + "' is not a number: " + v);
  }
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_metadata() const {
  return {
      {"model.channels", std::to_string(channels)},
      {"model.proposals", std::to_string(proposals)},
      {"model.partners", std::to_string(partners)},
      {"model.use_arm3d", use_arm3d ? "1" : "0"},
      {"model.objectness_selection", objectness_selection ? "1" : "0"},
      {"model.attention", attention ? "1" : "0"},
      {"backbone.category_count", std::to_string(backbone.category_count)},
      {"backbone.style_dims", std::to_string(backbone.style_dims)},
      {"backbone.proposals_per_object", std::to_string(backbone.proposals_per_object)},
      {"backbone.center_jitter", format_real(backbone.center_jitter)},
      {"backbone.size_jitter", format_real(backbone.size_jitter)},
      {"backbone.feature_noise", format_real(backbone.feature_noise)},
      {"backbone.offset_noise", format_real(backbone.offset_noise)},
      {"backbone.objectness_cue_noise", format_real(backbone.objectness_cue_noise)},
      {"backbone.ambiguity_rate", format_real(backbone.ambiguity_rate)},
      {"backbone.corruption_shift", format_real(backbone.corruption_shift)},
  };
}

ModelConfig ModelConfig::from_metadata(const std::map<std::string, std::string>& m) {
  ModelConfig c;
  c.channels = parse_int(m, "model.channels");
  c.proposals = parse_int(m, "model.proposals");
  c.partners = parse_int(m, "model.partners");
  c.use_arm3d = parse_int(m, "model.use_arm3d") != 0;
  c.objectness_selection = parse_int(m, "model.objectness_selection") != 0;
  c.attention = parse_int(m, "model.attention") != 0;
  c.backbone.category_count = static_cast<int>(parse_int(m, "backbone.category_count"));
  c.backbone.style_dims = static_cast<int>(parse_int(m, "backbone.style_dims"));
  c.backbone.proposals_per_object = static_cast<int>(parse_int(m, "backbone.proposals_per_object"));
  c.backbone.center_jitter = parse_real(m, "backbone.center_jitter");
  c.backbone.size_jitter = parse_real(m, "backbone.size_jitter");
  c.backbone.feature_noise = parse_real(m, "backbone.feature_noise");
  c.backbone.offset_noise = parse_real(m, "backbone.offset_noise");
  c.backbone.objectness_cue_noise = parse_real(m, "backbone.objectness_cue_noise");
  c.backbone.ambiguity_rate = parse_real(m, "backbone.ambiguity_rate");
  c.backbone.corruption_shift = parse_real(m, "backbone.corruption_shift");
  return c;
}

RawProposals eval_proposals(const Scene& scene, const ModelConfig& model) {
  Rng rng(derive_seed(hash_string(scene.scene_id), "eval.proposals"));
  return backbone_stub(scene, model.proposals, rng, model.backbone);
}

Rng eval_pairing_rng(const Scene& scene) { return Rng(derive_seed(hash_string(scene.scene_id), "eval.pairing")); }

std::vector<ScoredDetection> detect_scene(const Detector& detector, const nn::ParamStore& params,
                                          const Scene& scene, const ModelConfig& model, Scalar nms_iou) {
  const RawProposals proposals = eval_proposals(scene, model);
  Rng rng = eval_pairing_rng(scene);
  // eval mode reads running statistics and never writes to the store
  auto& store = const_cast<nn::ParamStore&>(params);
  const DetectorOutput out = detector.forward(store, proposals.descriptors, proposals.centers, rng, Mode::eval);
  const std::vector<Detection> decoded = detector.decode(out, proposals.seeds);

  std::vector<geometry::ScoredBox> boxes;
  boxes.reserve(decoded.size());
  for (const auto& d : decoded) boxes.push_back({d.box, d.score});
  std::vector<ScoredDetection> kept;
  for (std::size_t i : geometry::nms_3d(boxes, nms_iou)) kept.push_back({boxes[i].box, boxes[i].score});
  return kept;
}

EvalReport evaluate_split(const Detector& detector, const nn::ParamStore& params, const std::vector<Scene>& scenes,
                          const ModelConfig& model, int category_count, Scalar nms_iou) {
  std::vector<std::vector<ScoredDetection>> dets;
  dets.reserve(scenes.size());
  for (const auto& s : scenes) dets.push_back(detect_scene(detector, params, s, model, nms_iou));
  return evaluate_map(dets, scenes, kIouThresholds, category_count);
}

namespace {

void accumulate(LossBreakdown& sum, const LossBreakdown& b) {
  sum.vote_analogue += b.vote_analogue;
  sum.objectness += b.objectness;
  sum.box += b.box;
  sum.classification += b.classification;
  sum.relation += b.relation;
  sum.total += b.total;
}

void scale(LossBreakdown& b, Scalar f) {
  b.vote_analogue *= f;
  b.objectness *= f;
  b.box *= f;
  b.classification *= f;
  b.relation *= f;
  b.total *= f;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (dataset.train.empty()) throw UsageError("train: at least one training scene is required");
  if (config.epochs < 0) throw UsageError("train: epochs must be >= 0");
  if (static_cast<int>(dataset.categories.size()) != config.model.backbone.category_count) {
    throw UsageError("train: dataset has " + std::to_string(dataset.categories.size()) +
                     " categories, model expects " + std::to_string(config.model.backbone.category_count));
  }
  const Detector detector(config.model.detector_config());
  const int k = config.model.backbone.category_count;

  TrainResult result;
  nn::ParamStore params;
  {
    Rng init_rng(derive_seed(config.seed, "init"));
    detector.init_params(params, init_rng);
  }
  result.initial = params;
  result.best = params;

  Rng rng(derive_seed(config.seed, "train"));
  std::vector<std::size_t> order(dataset.train.size());
  DetectorCache cache;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    const Scalar lr = nn::scheduled_learning_rate(config.learning_rate, epoch, config.epochs);
    EpochMetrics m;
    m.epoch = epoch;
    try {
      for (std::size_t idx : order) {
        const Scene& scene = dataset.train[idx];
        const RawProposals proposals = backbone_stub(scene, config.model.proposals, rng, config.model.backbone);
        const ProposalTargets targets = make_targets(scene, proposals, k, config.loss.thresholds.xi);
        std::optional<std::span<const int>> override;
        if (config.teacher_forcing) override = std::span<const int>(targets.objectness_flags);
        const DetectorOutput out = detector.forward(params, proposals.descriptors, proposals.centers, rng,
                                                    Mode::train, &cache, nullptr, override);
        const LossResult loss = compute_losses(detector, out, scene, targets, config.loss);
        detector.backward(params, cache, loss.grads);
        nn::optimizer_step(params, lr, config.optimizer);
        accumulate(m.loss, loss.breakdown);
      }
    } catch (const DivergenceError& e) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    scale(m.loss, 1.0 / static_cast<Scalar>(order.size()));

    if (epoch >= config.eval_from_epoch || epoch + 1 == config.epochs) {
      const EvalReport report = evaluate_split(detector, params, dataset.val, config.model, k, config.nms_iou);
      m.evaluated = true;
      m.val_map_025 = dataset.val.empty() ? 0.0 : report.map_at(0.25);
      m.val_map_050 = dataset.val.empty() ? 0.0 : report.map_at(0.5);
      if (m.val_map_050 > result.best_map_050) {
        result.best_map_050 = m.val_map_050;
        result.best_epoch = epoch;
        result.best = params;
      }
    }
    result.log.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

std::string metrics_csv_header() {
  return "epoch,vote_analogue,objectness,box,classification,relation,total,val_map_025,val_map_050";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  std::string row = std::to_string(m.epoch);
  for (Scalar v : {m.loss.vote_analogue, m.loss.objectness, m.loss.box, m.loss.classification, m.loss.relation,
                   m.loss.total}) {
    row += "," + format_real(v);
  }
  if (m.evaluated) {
    row += "," + format_real(m.val_map_025) + "," + format_real(m.val_map_050);
  } else {
    row += ",,";
  }
  return row;
}

nlohmann::json attention_dump(const Detector& detector, const nn::ParamStore& params, const Scene& scene,
                              const ModelConfig& model) {
  nlohmann::json j;
  j["scene_id"] = scene.scene_id;
  j["use_arm3d"] = model.use_arm3d;
  if (!model.use_arm3d) return j;
  const RawProposals proposals = eval_proposals(scene, model);
  Rng rng = eval_pairing_rng(scene);
  auto& store = const_cast<nn::ParamStore&>(params);
  const DetectorOutput out = detector.forward(store, proposals.descriptors, proposals.centers, rng, Mode::eval);
  const model::AttentionRecord& a = out.arm3d.attention;
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json logits = nlohmann::json::array();
  nlohmann::json partners = nlohmann::json::array();
  for (Index i = 0; i < a.weights.rows(); ++i) {
    nlohmann::json w = nlohmann::json::array();
    nlohmann::json l = nlohmann::json::array();
    nlohmann::json p = nlohmann::json::array();
    for (Index kk = 0; kk < a.weights.cols(); ++kk) {
      w.push_back(a.weights(i, kk));
      l.push_back(a.logits(i, kk));
      p.push_back(a.pairs.partner(i, kk));
    }
    weights.push_back(w);
    logits.push_back(l);
    partners.push_back(p);
  }
  nlohmann::json objectness = nlohmann::json::array();
  for (int v : out.arm3d.predicted_labels) objectness.push_back(v);
  nlohmann::json anchor = nlohmann::json::array();
  for (Index v : proposals.anchor) anchor.push_back(v);
  j["partners_per_proposal"] = a.pairs.partners_per_proposal;
  j["weights"] = weights;
  j["logits"] = logits;
  j["partners"] = partners;
  j["predicted_objectness"] = objectness;
  j["anchor"] = anchor;
  return j;
}

}  // namespace arm3d::harness
