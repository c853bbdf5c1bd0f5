#include "arm3d/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "arm3d/geometry/scene_io.hpp"

namespace arm3d::cli {

namespace {

std::string fmt(const char* f, Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const nlohmann::json* threshold(const nlohmann::json& eval, Scalar iou) {
  if (!eval.contains("thresholds")) return nullptr;
  for (const auto& t : eval.at("thresholds")) {
    if (std::abs(t.at("iou").get<Scalar>() - iou) < 1e-9) return &t;
  }
  return nullptr;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::vector<std::string> category_union(const std::vector<RunSummary>& runs) {
  std::set<std::string> names;
  for (const auto& r : runs) {
    for (const auto& [name, ap] : r.mean_ap_050()) names.insert(name);
  }
  return {names.begin(), names.end()};
}

// blue (low) to orange (high)
std::string weight_color(Scalar w) {
  const Scalar t = std::clamp(w, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(240 * t + 15 * (1 - t)));
  const int g = static_cast<int>(std::lround(120 * t + 60 * (1 - t)));
  const int b = static_cast<int>(std::lround(20 * t + 160 * (1 - t)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

Scalar RunSummary::mean_map_025() const {
  Scalar s = 0;
  for (const auto& r : seeds) s += r.map_025;
  return seeds.empty() ? 0.0 : s / static_cast<Scalar>(seeds.size());
}

Scalar RunSummary::mean_map_050() const {
  Scalar s = 0;
  for (const auto& r : seeds) s += r.map_050;
  return seeds.empty() ? 0.0 : s / static_cast<Scalar>(seeds.size());
}

std::map<std::string, Scalar> RunSummary::mean_ap_050() const {
  std::map<std::string, Scalar> sum;
  for (const auto& r : seeds) {
    for (const auto& [name, ap] : r.ap_050) sum[name] += ap;
  }
  for (auto& [name, v] : sum) v /= static_cast<Scalar>(seeds.size());
  return sum;
}

RunSummary load_run(const fs::path& dir) {
  RunSummary run;
  run.dir = dir;
  run.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  const nlohmann::json summary = geometry::read_json_file(dir / "summary.json");
  if (!summary.contains("seeds") || !summary.at("seeds").is_array() || summary.at("seeds").empty()) {
    throw FormatError(dir.string() + "/summary.json lists no seeds");
  }
  for (const auto& s : summary.at("seeds")) {
    SeedResult r;
    r.seed = s.at("seed").get<std::uint64_t>();
    const fs::path seed_dir = dir / s.at("dir").get<std::string>();
    r.eval = geometry::read_json_file(seed_dir / "eval_val.json");
    const nlohmann::json* t25 = threshold(r.eval, 0.25);
    const nlohmann::json* t50 = threshold(r.eval, 0.5);
    if (!t25 || !t50) throw FormatError(seed_dir.string() + "/eval_val.json lacks IoU 0.25/0.5 results");
    r.map_025 = t25->at("map").get<Scalar>();
    r.map_050 = t50->at("map").get<Scalar>();
    for (const auto& [name, cat] : t50->at("per_category").items()) r.ap_050[name] = cat.at("ap").get<Scalar>();
    if (fs::exists(seed_dir / "attention.json")) r.attention = geometry::read_json_file(seed_dir / "attention.json");
    run.seeds.push_back(std::move(r));
  }
  return run;
}

std::string comparison_text(const std::vector<RunSummary>& runs) {
  if (runs.empty()) return "";
  std::size_t w = 4;
  for (const auto& r : runs) w = std::max(w, r.name.size());
  w += 2;
  const RunSummary& ref = runs.front();
  std::string out = pad("run", w) + "seeds  mAP@0.25  mAP@0.5   d@0.25    d@0.5\n";
  for (const auto& r : runs) {
    out += pad(r.name, w) + pad(std::to_string(r.seeds.size()), 7) + fmt("%-10.4f", r.mean_map_025()) +
           fmt("%-10.4f", r.mean_map_050()) + fmt("%+-10.4f", r.mean_map_025() - ref.mean_map_025()) +
           fmt("%+.4f", r.mean_map_050() - ref.mean_map_050()) + "\n";
  }

  // seed-matched differences against the first run
  if (runs.size() > 1) {
    out += "\npaired mAP@0.5 vs " + ref.name + "\n" + pad("run", w) + "seed  " + pad(ref.name, 10) + "other     diff\n";
    for (std::size_t k = 1; k < runs.size(); ++k) {
      for (const auto& s : runs[k].seeds) {
        for (const auto& base : ref.seeds) {
          if (base.seed != s.seed) continue;
          out += pad(runs[k].name, w) + pad(std::to_string(s.seed), 6) +
                 pad(fmt("%.4f", base.map_050), std::max<std::size_t>(10, ref.name.size() + 1)) +
                 fmt("%-10.4f", s.map_050) + fmt("%+.4f", s.map_050 - base.map_050) + "\n";
        }
      }
    }
  }

  const auto cats = category_union(runs);
  out += "\nper-category AP@0.5 (mean over seeds)\n" + pad("run", w);
  for (const auto& c : cats) out += pad(c, std::max<std::size_t>(c.size() + 2, 8));
  out += "\n";
  for (const auto& r : runs) {
    const auto ap = r.mean_ap_050();
    out += pad(r.name, w);
    for (const auto& c : cats) {
      const auto it = ap.find(c);
      out += pad(it == ap.end() ? "-" : fmt("%.3f", it->second), std::max<std::size_t>(c.size() + 2, 8));
    }
    out += "\n";
  }
  return out;
}

std::string comparison_csv(const std::vector<RunSummary>& runs) {
  const auto cats = category_union(runs);
  std::string out = "run,seeds,map_025,map_050,delta_map_025,delta_map_050";
  for (const auto& c : cats) out += ",ap_050_" + c;
  out += "\n";
  if (runs.empty()) return out;
  const RunSummary& ref = runs.front();
  for (const auto& r : runs) {
    out += r.name + "," + std::to_string(r.seeds.size()) + fmt(",%.17g", r.mean_map_025()) +
           fmt(",%.17g", r.mean_map_050()) + fmt(",%.17g", r.mean_map_025() - ref.mean_map_025()) +
           fmt(",%.17g", r.mean_map_050() - ref.mean_map_050());
    const auto ap = r.mean_ap_050();
    for (const auto& c : cats) {
      const auto it = ap.find(c);
      out += it == ap.end() ? std::string(",") : fmt(",%.17g", it->second);
    }
    out += "\n";
  }
  return out;
}

std::string attention_heatmap_svg(const nlohmann::json& attention, int max_rows) {
  if (!attention.contains("weights")) throw FormatError("attention dump has no weights");
  const auto& weights = attention.at("weights");
  const int rows = std::min<int>(max_rows, static_cast<int>(weights.size()));
  const int cols = rows > 0 ? static_cast<int>(weights.at(0).size()) : 0;
  const int cell = 28, margin = 30;
  const int width = 2 * margin + cols * cell, height = 2 * margin + rows * cell;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(height) + "\">\n";
  svg += "<text x=\"" + std::to_string(margin) + "\" y=\"18\" font-family=\"sans-serif\" font-size=\"12\">" +
         attention.value("scene_id", std::string("attention")) + "</text>\n";
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cols; ++k) {
      const Scalar w = weights.at(i).at(k).get<Scalar>();
      svg += "<rect x=\"" + std::to_string(margin + k * cell) + "\" y=\"" + std::to_string(margin + i * cell) +
             "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" +
             weight_color(w) + "\"><title>" + fmt("%.4f", w) + "</title></rect>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string pr_curves_svg(const nlohmann::json& eval, Scalar iou) {
  const nlohmann::json* t = threshold(eval, iou);
  if (!t) throw FormatError("eval report has no results at IoU " + fmt("%g", iou));
  const int size = 320, margin = 40, legend = 140;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size + 2 * margin + legend) +
                    "\" height=\"" + std::to_string(size + 2 * margin) + "\">\n";
  svg += "<rect x=\"" + std::to_string(margin) + "\" y=\"" + std::to_string(margin) + "\" width=\"" +
         std::to_string(size) + "\" height=\"" + std::to_string(size) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  svg += "<text x=\"" + std::to_string(margin) + "\" y=\"" + std::to_string(margin + size + 28) +
         "\" font-family=\"sans-serif\" font-size=\"12\">recall (IoU " + fmt("%g", iou) +
         ")</text>\n<text x=\"4\" y=\"" + std::to_string(margin - 10) +
         "\" font-family=\"sans-serif\" font-size=\"12\">precision</text>\n";
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  int idx = 0;
  for (const auto& [name, cat] : t->at("per_category").items()) {
    const char* color = palette[idx % 10];
    std::string points;
    for (const auto& p : cat.at("pr_curve")) {
      const Scalar x = margin + size * p.at(0).get<Scalar>();
      const Scalar y = margin + size * (1.0 - p.at(1).get<Scalar>());
      points += fmt("%.2f", x) + "," + fmt("%.2f", y) + " ";
    }
    if (!points.empty()) {
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + points +
             "\"/>\n";
    }
    svg += "<text x=\"" + std::to_string(2 * margin + size) + "\" y=\"" + std::to_string(margin + 14 * (idx + 1)) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + color + "\">" + name + " " +
           fmt("%.3f", cat.at("ap").get<Scalar>()) + "</text>\n";
    ++idx;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace arm3d::cli
