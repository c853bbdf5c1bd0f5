#include "arm3d/cli/dataset.hpp"

#include <cstdio>

#include "arm3d/cli/manifest.hpp"
#include "arm3d/labels/labeler.hpp"

namespace arm3d::cli {

using geometry::Box3D;
using harness::GeneratedScene;
using harness::SyntheticConfig;

nlohmann::json synthetic_config_to_json(const SyntheticConfig& c) {
  const auto& r = c.relation_injection;
  return {{"category_count", c.category_count},
          {"min_objects", c.min_objects},
          {"max_objects", c.max_objects},
          {"cluster_probability", r.cluster_probability},
          {"max_cluster_size", r.max_cluster_size},
          {"confusable_probability", r.confusable_probability},
          {"stacked_probability", r.stacked_probability},
          {"adjacent_probability", r.adjacent_probability},
          {"feature_noise", c.feature_noise},
          {"ambiguity_rate", c.ambiguity_rate},
          {"room_extent", c.room_extent},
          {"clearance", c.clearance},
          {"contact_gap", c.contact_gap},
          {"max_retries", c.max_retries},
          {"point_count_hint", c.point_count_hint}};
}

namespace {

std::string scene_name(const char* split, int i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s_%04d", split, i);
  return buf;
}

struct AuditCounts {
  std::size_t injected = 0;
  std::size_t recovered = 0;
  std::size_t pairs = 0;
  std::size_t spatial = 0;
  std::size_t semantic = 0;
  std::size_t objects = 0;
};

void audit_scene(const GeneratedScene& g, AuditCounts& a) {
  const auto& gt = g.scene.ground_truth;
  const labels::LabelThresholds t;
  a.objects += gt.size();
  for (const auto& rel : g.injected) {
    const Box3D* x = nullptr;
    const Box3D* y = nullptr;
    for (const auto& b : gt) {
      if (b.instance_id == rel.a) x = &b;
      if (b.instance_id == rel.b) y = &b;
    }
    ++a.injected;
    if (!x || !y) continue;
    const int got = rel.kind == harness::RelationKind::semantic ? labels::label_semantic(*x, *y)
                                                                : labels::label_spatial(*x, *y, t.tau_d, t.tau_r);
    a.recovered += got;
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    for (std::size_t j = i + 1; j < gt.size(); ++j) {
      ++a.pairs;
      a.spatial += labels::label_spatial(gt[i], gt[j], t.tau_d, t.tau_r);
      a.semantic += labels::label_semantic(gt[i], gt[j]);
    }
  }
}

Scalar fraction(std::size_t num, std::size_t den) { return den ? static_cast<Scalar>(num) / den : 0.0; }

}  // namespace

nlohmann::json write_dataset(const fs::path& dir, const DatasetSpec& spec) {
  spec.generator.validate();
  if (spec.train_scenes < 0 || spec.val_scenes < 0) throw UsageError("scene counts must be >= 0");
  const geometry::CategoryTable table = harness::default_category_table(spec.generator.category_count);
  fs::create_directories(dir / "scenes");
  table.save(dir / "categories.json");

  AuditCounts counts;
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& [split, count] : {std::pair{"train", spec.train_scenes}, std::pair{"val", spec.val_scenes}}) {
    // each split has its own stream, so resizing one leaves the other unchanged
    Rng rng(derive_seed(spec.seed, std::string("generate.") + split));
    nlohmann::json files = nlohmann::json::array();
    for (int i = 0; i < count; ++i) {
      const std::string id = scene_name(split, i);
      const GeneratedScene g = harness::generate_scene(spec.generator, rng, id);
      const std::string rel = "scenes/" + id + ".json";
      geometry::write_scene_file(dir / rel, g.scene, table);
      audit_scene(g, counts);
      files.push_back(rel);
    }
    splits[split] = files;
  }

  nlohmann::json ds;
  ds["format"] = "arm3d-dataset";
  ds["version"] = 1;
  ds["seed"] = spec.seed;
  ds["generator"] = synthetic_config_to_json(spec.generator);
  ds["splits"] = splits;
  geometry::write_json_file(dir / "dataset.json", ds);

  nlohmann::json audit;
  audit["scenes"] = spec.train_scenes + spec.val_scenes;
  audit["objects"] = counts.objects;
  audit["injected_relations"] = counts.injected;
  audit["recovered_relations"] = counts.recovered;
  audit["recovered_fraction"] = counts.injected ? fraction(counts.recovered, counts.injected) : 1.0;
  audit["object_pairs"] = counts.pairs;
  audit["spatial_pair_fraction"] = fraction(counts.spatial, counts.pairs);
  audit["spatial_pair_target"] = harness::target_spatial_pair_fraction(spec.generator);
  audit["semantic_pair_fraction"] = fraction(counts.semantic, counts.pairs);
  geometry::write_json_file(dir / "audit.json", audit);
  return audit;
}

harness::Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("dataset directory not found: " + dir.string());
  const nlohmann::json ds = geometry::read_json_file(dir / "dataset.json");
  if (!ds.is_object() || ds.value("format", "") != "arm3d-dataset") {
    throw FormatError(dir.string() + "/dataset.json is not an arm3d dataset");
  }
  harness::Dataset out;
  out.categories = geometry::CategoryTable::load(dir / "categories.json");
  const nlohmann::json& splits = ds.at("splits");
  for (const auto& [split, target] : {std::pair{"train", &out.train}, std::pair{"val", &out.val}}) {
    if (!splits.contains(split)) throw FormatError("dataset.json lacks split '" + std::string(split) + "'");
    for (const auto& rel : splits.at(split)) {
      target->push_back(geometry::read_scene_file(dir / rel.get<std::string>(), out.categories));
    }
  }
  return out;
}

}  // namespace arm3d::cli
