#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "arm3d/core.hpp"

namespace arm3d::cli {

namespace fs = std::filesystem;

struct SeedResult {
  std::uint64_t seed = 0;
  Scalar map_025 = 0;
  Scalar map_050 = 0;
  std::map<std::string, Scalar> ap_050;  // per category
  nlohmann::json eval;                   // eval_val.json
  nlohmann::json attention;              // attention.json, may be null
};

struct RunSummary {
  std::string name;
  fs::path dir;
  std::vector<SeedResult> seeds;

  Scalar mean_map_025() const;
  Scalar mean_map_050() const;
  std::map<std::string, Scalar> mean_ap_050() const;
};

/// Reads summary.json and the per-seed eval/attention dumps of a train run
/// directory. Throws FormatError when the directory is not a complete run.
RunSummary load_run(const fs::path& dir);

/// Side-by-side table; deltas are relative to the first run.
std::string comparison_text(const std::vector<RunSummary>& runs);
std::string comparison_csv(const std::vector<RunSummary>& runs);

/// Cells colored by weight on a fixed [0, 1] scale, so equal weights give
/// equal colors. At most `max_rows` rows are drawn.
std::string attention_heatmap_svg(const nlohmann::json& attention, int max_rows = 8);

/// One polyline per category from an eval report's PR curves at `iou`.
std::string pr_curves_svg(const nlohmann::json& eval, Scalar iou);

}  // namespace arm3d::cli
