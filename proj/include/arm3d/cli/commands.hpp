#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "arm3d/cli/dataset.hpp"
#include "arm3d/harness/train.hpp"

namespace arm3d::cli {

namespace fs = std::filesystem;

/// Resolved settings of one invocation, recorded in the output manifest.
struct RunContext {
  nlohmann::json settings = nlohmann::json::object();
  std::string config_text;
};

struct GenerateOptions {
  fs::path out;
  DatasetSpec spec;
};

struct LabelOptions {
  fs::path data;
  fs::path out;  // defaults to <data>/labels
  labels::LabelThresholds thresholds;
};

struct TrainOptions {
  fs::path data;
  fs::path out;
  std::vector<std::uint64_t> seeds{1};
  harness::TrainConfig train;
  bool quiet = false;
};

struct EvalOptions {
  fs::path checkpoint;
  fs::path data;
  fs::path out;
  std::string split = "val";
  Scalar nms_iou = 0.25;
};

struct ReportOptions {
  std::vector<fs::path> runs;
  fs::path out;
};

int cmd_generate(const GenerateOptions& o, const RunContext& ctx = {});
int cmd_label(const LabelOptions& o, const RunContext& ctx = {});
int cmd_train(const TrainOptions& o, const RunContext& ctx = {});
int cmd_eval(const EvalOptions& o, const RunContext& ctx = {});
int cmd_report(const ReportOptions& o, const RunContext& ctx = {});

/// Checkpoint metadata written by cmd_train: model settings plus
/// "categories" (JSON array of names), "seed" and "best_epoch".
std::map<std::string, std::string> checkpoint_metadata(const harness::ModelConfig& model,
                                                       const geometry::CategoryTable& categories,
                                                       std::uint64_t seed, int best_epoch);

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(int argc, const char* const* argv);

}  // namespace arm3d::cli
