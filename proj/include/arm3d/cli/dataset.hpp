#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "arm3d/harness/synthetic.hpp"
#include "arm3d/harness/train.hpp"

namespace arm3d::cli {

namespace fs = std::filesystem;

/// Dataset directory layout:
///
///   dataset.json      {"format": "arm3d-dataset", "version": 1, "seed": int,
///                      "generator": {...}, "splits": {"train": [path...], "val": [path...]}}
///   categories.json   category names, id = position
///   scenes/<id>.json  one scene per file (geometry/scene_io.hpp schema)
///   audit.json        generator/labeler cross-check statistics
struct DatasetSpec {
  harness::SyntheticConfig generator;
  int train_scenes = 200;
  int val_scenes = 50;
  std::uint64_t seed = 0;
};

nlohmann::json synthetic_config_to_json(const harness::SyntheticConfig& c);

/// Generates and writes the dataset; returns the audit document.
nlohmann::json write_dataset(const fs::path& dir, const DatasetSpec& spec);

/// Throws FormatError when the directory is missing pieces or inconsistent.
harness::Dataset load_dataset(const fs::path& dir);

}  // namespace arm3d::cli
