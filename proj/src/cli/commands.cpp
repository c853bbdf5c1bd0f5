#include "arm3d/cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "arm3d/cli/manifest.hpp"
#include "arm3d/cli/report.hpp"
#include "arm3d/labels/labeler.hpp"
#include "arm3d/nn/checkpoint.hpp"

namespace arm3d::cli {

using harness::ModelConfig;
using harness::TrainConfig;

namespace {

std::string fmt(const char* f, Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// the generator-side corruption settings drive the backbone stub
void apply_generator_settings(const fs::path& data, harness::BackboneConfig& backbone) {
  const nlohmann::json ds = geometry::read_json_file(data / "dataset.json");
  const nlohmann::json& g = ds.at("generator");
  backbone.ambiguity_rate = g.at("ambiguity_rate").get<Scalar>();
  backbone.feature_noise = g.at("feature_noise").get<Scalar>();
}

std::vector<std::string> category_names_from_metadata(const std::map<std::string, std::string>& m) {
  auto it = m.find("categories");
  if (it == m.end()) throw FormatError("checkpoint metadata lacks 'categories'");
  try {
    return nlohmann::json::parse(it->second).get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("checkpoint metadata 'categories' is not a JSON list of names");
  }
}

// every parameter the model needs must be present with the right shape
void check_checkpoint_shapes(const harness::Detector& det, const nn::ParamStore& loaded) {
  nn::ParamStore expected;
  Rng rng(0);
  det.init_params(expected, rng);
  for (const auto& [name, p] : expected.entries()) {
    if (!loaded.contains(name)) throw FormatError("checkpoint lacks parameter '" + name + "'");
    const Matrix& v = loaded.at(name).value;
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw FormatError("checkpoint parameter '" + name + "' is " + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()) + ", model expects " + std::to_string(p.value.rows()) + "x" +
                        std::to_string(p.value.cols()));
    }
  }
  for (const auto& [name, b] : expected.buffers()) {
    if (!loaded.contains_buffer(name)) throw FormatError("checkpoint lacks buffer '" + name + "'");
  }
}

std::string eval_table(const harness::EvalReport& report, const geometry::CategoryTable& categories) {
  std::string out = "category        gt    AP@0.25   AP@0.5\n";
  const auto& t25 = report.thresholds.at(0);
  const auto& t50 = report.thresholds.at(1);
  for (const auto& [c, cat] : t25.per_category) {
    std::string name = categories.name_of(c);
    name.resize(std::max<std::size_t>(name.size() + 1, 14), ' ');
    char line[128];
    std::snprintf(line, sizeof line, "%s%6lld    %.4f    %.4f\n", name.c_str(), static_cast<long long>(cat.gt_count),
                  cat.ap, t50.per_category.at(c).ap);
    out += line;
  }
  out += "mAP                   " + fmt("%.4f", t25.map) + "    " + fmt("%.4f", t50.map) + "\n";
  return out;
}

}  // namespace

std::map<std::string, std::string> checkpoint_metadata(const ModelConfig& model,
                                                       const geometry::CategoryTable& categories,
                                                       std::uint64_t seed, int best_epoch) {
  auto m = model.to_metadata();
  m["categories"] = nlohmann::json(categories.names()).dump();
  m["seed"] = std::to_string(seed);
  m["best_epoch"] = std::to_string(best_epoch);
  return m;
}

int cmd_generate(const GenerateOptions& o, const RunContext& ctx) {
  DirectoryLock lock(o.out);
  const nlohmann::json audit = write_dataset(o.out, o.spec);
  write_manifest(o.out, "generate", ctx.settings, ctx.config_text, {});
  std::cout << "wrote " << o.spec.train_scenes << " train / " << o.spec.val_scenes << " val scenes to "
            << o.out.string() << "\n"
            << "injected relations recovered: " << audit["recovered_relations"] << " / "
            << audit["injected_relations"] << "\n"
            << "spatial pair fraction " << fmt("%.4f", audit["spatial_pair_fraction"].get<Scalar>()) << " (target "
            << fmt("%.4f", audit["spatial_pair_target"].get<Scalar>()) << ")\n";
  return 0;
}

int cmd_label(const LabelOptions& o, const RunContext& ctx) {
  const harness::Dataset ds = load_dataset(o.data);
  const fs::path out = o.out.empty() ? o.data / "labels" : o.out;
  DirectoryLock lock(out);
  std::string lines;
  std::size_t pairs = 0, semantic = 0, spatial = 0;
  for (const auto* split : {&ds.train, &ds.val}) {
    for (const auto& scene : *split) {
      const auto& gt = scene.ground_truth;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        for (std::size_t j = i + 1; j < gt.size(); ++j) {
          const auto ev = labels::spatial_evidence(gt[i], gt[j], o.thresholds.tau_d, o.thresholds.tau_r);
          const int sem = labels::label_semantic(gt[i], gt[j]);
          nlohmann::json row = {{"scene", scene.scene_id},
                                {"a", gt[i].instance_id},
                                {"b", gt[j].instance_id},
                                {"semantic", sem},
                                {"spatial", ev.label},
                                {"vertical_gap", ev.vertical_gap},
                                {"horizontal_gap", ev.horizontal_gap},
                                {"xy_ratio", ev.xy_ratio},
                                {"yz_ratio", ev.yz_ratio},
                                {"zx_ratio", ev.zx_ratio}};
          lines += row.dump() + "\n";
          ++pairs;
          semantic += sem;
          spatial += ev.label;
        }
      }
    }
  }
  write_text_file(out / "labels.jsonl", lines);
  nlohmann::json stats = {{"pairs", pairs}, {"semantic_positive", semantic}, {"spatial_positive", spatial},
                          {"tau_d", o.thresholds.tau_d}, {"tau_r", o.thresholds.tau_r}};
  geometry::write_json_file(out / "label_stats.json", stats);
  write_manifest(out, "label", ctx.settings, ctx.config_text, {o.data / "dataset.json", o.data / "scenes"});
  std::cout << "labeled " << pairs << " ground-truth pairs: " << semantic << " semantic, " << spatial
            << " spatial -> " << (out / "labels.jsonl").string() << "\n";
  return 0;
}

int cmd_train(const TrainOptions& o, const RunContext& ctx) {
  if (o.seeds.empty()) throw UsageError("train: at least one --seed is required");
  const harness::Dataset ds = load_dataset(o.data);
  TrainConfig tc = o.train;
  tc.model.backbone.category_count = static_cast<int>(ds.categories.size());
  apply_generator_settings(o.data, tc.model.backbone);
  const harness::Detector detector(tc.model.detector_config());

  DirectoryLock lock(o.out);
  nlohmann::json seeds = nlohmann::json::array();
  Scalar sum_025 = 0, sum_050 = 0;
  for (std::uint64_t seed : o.seeds) {
    tc.seed = seed;
    const std::string sub = "seed_" + std::to_string(seed);
    const fs::path dir = o.out / sub;
    fs::create_directories(dir);
    std::ofstream csv(dir / "metrics.csv", std::ios::trunc);
    if (!csv) throw UsageError("cannot write " + (dir / "metrics.csv").string());
    csv << harness::metrics_csv_header() << "\n";
    const harness::TrainResult r = harness::train(tc, ds, [&](const harness::EpochMetrics& m) {
      csv << harness::metrics_csv_row(m) << "\n" << std::flush;
      if (!o.quiet) {
        std::cout << "seed " << seed << " epoch " << m.epoch << " loss " << fmt("%.4f", m.loss.total);
        if (m.evaluated) std::cout << " val mAP@0.5 " << fmt("%.4f", m.val_map_050);
        std::cout << std::endl;
      }
    });
    csv.close();

    nn::save_checkpoint(dir / "best.ckpt", r.best, checkpoint_metadata(tc.model, ds.categories, seed, r.best_epoch));
    const harness::EvalReport rep =
        harness::evaluate_split(detector, r.best, ds.val, tc.model, tc.model.backbone.category_count, tc.nms_iou);
    geometry::write_json_file(dir / "eval_val.json", harness::eval_report_to_json(rep, ds.categories));
    if (!ds.val.empty()) {
      geometry::write_json_file(dir / "attention.json", harness::attention_dump(detector, r.best, ds.val.front(), tc.model));
    }
    const Scalar m25 = ds.val.empty() ? 0.0 : rep.map_at(0.25);
    const Scalar m50 = ds.val.empty() ? 0.0 : rep.map_at(0.5);
    sum_025 += m25;
    sum_050 += m50;
    seeds.push_back({{"seed", seed}, {"dir", sub}, {"best_epoch", r.best_epoch}, {"val_map_025", m25},
                     {"val_map_050", m50}});
  }
  nlohmann::json summary;
  summary["seeds"] = seeds;
  summary["mean_val_map_025"] = sum_025 / static_cast<Scalar>(o.seeds.size());
  summary["mean_val_map_050"] = sum_050 / static_cast<Scalar>(o.seeds.size());
  summary["model"] = tc.model.to_metadata();
  geometry::write_json_file(o.out / "summary.json", summary);
  write_manifest(o.out, "train", ctx.settings, ctx.config_text,
                 {o.data / "dataset.json", o.data / "categories.json", o.data / "scenes"});
  std::cout << "mean val mAP@0.25 " << fmt("%.4f", summary["mean_val_map_025"].get<Scalar>()) << ", mAP@0.5 "
            << fmt("%.4f", summary["mean_val_map_050"].get<Scalar>()) << " over " << o.seeds.size() << " seed(s)\n";
  return 0;
}

int cmd_eval(const EvalOptions& o, const RunContext& ctx) {
  const harness::Dataset ds = load_dataset(o.data);
  const std::vector<geometry::Scene>& scenes = o.split == "train" ? ds.train : ds.val;
  if (scenes.empty()) throw UsageError("eval: split '" + o.split + "' of " + o.data.string() + " has no scenes");
  const nn::Checkpoint ck = nn::load_checkpoint(o.checkpoint);
  const auto names = category_names_from_metadata(ck.metadata);
  if (names != ds.categories.names()) {
    throw FormatError("checkpoint categories " + nlohmann::json(names).dump() + " do not match dataset categories " +
                      nlohmann::json(ds.categories.names()).dump());
  }
  const ModelConfig model = ModelConfig::from_metadata(ck.metadata);
  const harness::Detector detector(model.detector_config());
  check_checkpoint_shapes(detector, ck.params);

  const harness::EvalReport rep = harness::evaluate_split(detector, ck.params, scenes, model,
                                                          static_cast<int>(ds.categories.size()), o.nms_iou);
  const std::string table = eval_table(rep, ds.categories);
  std::cout << table;
  if (!o.out.empty()) {
    DirectoryLock lock(o.out);
    geometry::write_json_file(o.out / "eval.json", harness::eval_report_to_json(rep, ds.categories));
    write_text_file(o.out / "eval.txt", table);
    write_manifest(o.out, "eval", ctx.settings, ctx.config_text,
                   {o.checkpoint, o.data / "dataset.json", o.data / "categories.json", o.data / "scenes"});
  }
  return 0;
}

int cmd_report(const ReportOptions& o, const RunContext& ctx) {
  if (o.runs.empty()) throw UsageError("report: at least one --run directory is required");
  std::vector<RunSummary> runs;
  std::vector<fs::path> inputs;
  for (const auto& dir : o.runs) {
    try {
      runs.push_back(load_run(dir));
      inputs.push_back(dir / "summary.json");
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << dir.string() << ": " << e.what() << "\n";
    }
  }
  if (runs.empty()) throw FormatError("report: no usable run directory");

  DirectoryLock lock(o.out);
  const std::string text = comparison_text(runs);
  write_text_file(o.out / "report.txt", text);
  write_text_file(o.out / "report.csv", comparison_csv(runs));
  fs::create_directories(o.out / "plots");
  for (const auto& r : runs) {
    for (const auto& s : r.seeds) {
      const std::string stem = r.name + "_seed" + std::to_string(s.seed);
      if (s.attention.is_object() && s.attention.contains("weights")) {
        write_text_file(o.out / "plots" / (stem + "_attention.svg"), attention_heatmap_svg(s.attention));
      }
      for (Scalar iou : harness::kIouThresholds) {
        write_text_file(o.out / "plots" / (stem + "_pr_" + fmt("%.2f", iou) + ".svg"), pr_curves_svg(s.eval, iou));
      }
    }
  }
  write_manifest(o.out, "report", ctx.settings, ctx.config_text, inputs);
  std::cout << text;
  return 0;
}

// ---------------------------------------------------------------------------

namespace {

RunContext context_of(const CLI::App& sub) {
  RunContext ctx;
  std::string text;
  std::istringstream in(sub.config_to_str(true, false));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    // where outputs go does not change what they contain
    if (key == "out" || key == "config") continue;
    std::string value = line.substr(eq + 1);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    ctx.settings[key] = value;
    text += line + "\n";
  }
  ctx.config_text = text;
  return ctx;
}

void add_thresholds(CLI::App* sub, labels::LabelThresholds& t) {
  sub->add_option("--xi", t.xi, "Objectness distance threshold (m)")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--tau-d", t.tau_d, "Spatial gap threshold (m)")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--tau-r", t.tau_r, "Projected overlap ratio threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
}

// Keys outside any [section] belong to the subcommand being run.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  std::string subcommand;

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    for (auto& item : items) {
      const bool top = item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == "default");
      if (top && !subcommand.empty()) item.parents = {subcommand};
    }
    return items;
  }
};

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"ARM3D desk-scale pipeline: generate, label, train, eval, report"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "arm3d 0.1.0");
  auto config = std::make_shared<SubcommandConfig>();
  app.config_formatter(config);
  app.set_config("--config", "", "Read options from a key = value file; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic dataset directory");
  g->add_option("--out", gen.out, "Dataset directory")->required();
  g->add_option("--seed", gen.spec.seed, "Generator seed")->capture_default_str();
  g->add_option("--scenes", gen.spec.train_scenes, "Training scenes")->capture_default_str()->check(CLI::NonNegativeNumber);
  g->add_option("--val-scenes", gen.spec.val_scenes, "Validation scenes")->capture_default_str()->check(CLI::NonNegativeNumber);
  auto& sc = gen.spec.generator;
  g->add_option("--categories", sc.category_count, "Category count")->capture_default_str();
  g->add_option("--min-objects", sc.min_objects, "Fewest objects per scene")->capture_default_str();
  g->add_option("--max-objects", sc.max_objects, "Most objects per scene")->capture_default_str();
  g->add_option("--cluster-prob", sc.relation_injection.cluster_probability, "Same-category cluster probability")->capture_default_str();
  g->add_option("--confusable-prob", sc.relation_injection.confusable_probability, "Confusable-category cluster probability")->capture_default_str();
  g->add_option("--stacked-prob", sc.relation_injection.stacked_probability, "Stacked placement probability")->capture_default_str();
  g->add_option("--adjacent-prob", sc.relation_injection.adjacent_probability, "Adjacent placement probability")->capture_default_str();
  g->add_option("--feature-noise", sc.feature_noise, "Descriptor noise std")->capture_default_str();
  g->add_option("--ambiguity-rate", sc.ambiguity_rate, "Fraction of objects with corrupted category evidence")->capture_default_str();

  LabelOptions lab;
  auto* l = app.add_subcommand("label", "Dump ground-truth relation labels for every object pair");
  l->add_option("--data", lab.data, "Dataset directory")->required();
  l->add_option("--out", lab.out, "Output directory (default <data>/labels)");
  add_thresholds(l, lab.thresholds);

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train one model per seed and evaluate the best checkpoint");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--seed", tr.seeds, "Training seeds (repeat or comma-separate)")->delimiter(',')->default_str("1");
  auto& tc = tr.train;
  t->add_option("--epochs", tc.epochs, "Epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
  t->add_option("--lr", tc.learning_rate, "Base learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--channels", tc.model.channels, "Feature channels C")->capture_default_str();
  t->add_option("--proposals", tc.model.proposals, "Proposals per scene N")->capture_default_str();
  t->add_option("--nk", tc.model.partners, "Partners per proposal N_k")->capture_default_str()->check(CLI::PositiveNumber);
  add_thresholds(t, tc.loss.thresholds);
  t->add_option("--w0", tc.loss.w0, "BCE weight of negatives")->capture_default_str();
  t->add_option("--w1", tc.loss.w1, "BCE weight of positives")->capture_default_str();
  t->add_option("--lambda1", tc.loss.lambdas.vote, "Weight of the center-offset loss")->capture_default_str();
  t->add_option("--lambda2", tc.loss.lambdas.objectness, "Weight of the objectness loss")->capture_default_str();
  t->add_option("--lambda3", tc.loss.lambdas.box, "Weight of the box loss")->capture_default_str();
  t->add_option("--lambda4", tc.loss.lambdas.classification, "Weight of the classification loss")->capture_default_str();
  t->add_option("--lambda5", tc.loss.lambdas.relation, "Weight of the relation loss")->capture_default_str();
  bool no_arm3d = false, no_obm = false, equal_attention = false, semantic_only = false, spatial_only = false;
  std::string relations = "all";
  t->add_flag("--no-arm3d", no_arm3d, "Drop the relation module (baseline)");
  t->add_flag("--no-obm", no_obm, "Pick partners among all proposals");
  t->add_flag("--equal-attention", equal_attention, "Replace attention weights by 1/N_k");
  t->add_option("--relations", relations, "Relation losses to use")
                  ->check(CLI::IsMember({"all", "semantic", "spatial"}))
                  ->capture_default_str();
  t->add_flag("--semantic-only", semantic_only, "Same as --relations semantic");
  t->add_flag("--spatial-only", spatial_only, "Same as --relations spatial");
  t->add_flag("--teacher-forcing", tc.teacher_forcing, "Choose partners from ground-truth objectness");
  t->add_option("--nms-iou", tc.nms_iou, "NMS IoU threshold")->capture_default_str();
  t->add_option("--eval-from", tc.eval_from_epoch, "First epoch with validation")->capture_default_str();
  t->add_flag("--quiet", tr.quiet, "No per-epoch progress lines");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--split", ev.split, "Split")->check(CLI::IsMember({"train", "val"}))->capture_default_str();
  e->add_option("--nms-iou", ev.nms_iou, "NMS IoU threshold")->capture_default_str();
  e->add_option("--out", ev.out, "Directory for eval.json and eval.txt");

  ReportOptions rep;
  auto* r = app.add_subcommand("report", "Compare train runs; write tables and SVG plots");
  r->add_option("--run", rep.runs, "Run directories; the first is the reference")->required();
  r->add_option("--out", rep.out, "Report directory")->required();

  for (int i = 1; i < argc; ++i) {
    if (app.get_subcommand_no_throw(argv[i])) {
      config->subcommand = argv[i];
      break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, context_of(*g));
    if (l->parsed()) return cmd_label(lab, context_of(*l));
    if (t->parsed()) {
      tc.model.use_arm3d = !no_arm3d;
      tc.model.objectness_selection = !no_obm;
      tc.model.attention = !equal_attention;
      if (semantic_only && spatial_only) throw UsageError("--semantic-only and --spatial-only exclude each other");
      if ((semantic_only || spatial_only) && relations != "all") {
        throw UsageError("--relations cannot be combined with --semantic-only or --spatial-only");
      }
      if (semantic_only) relations = "semantic";
      if (spatial_only) relations = "spatial";
      tc.loss.relations = relations == "semantic"  ? harness::RelationSet::semantic
                          : relations == "spatial" ? harness::RelationSet::spatial
                                                   : harness::RelationSet::all;
      return cmd_train(tr, context_of(*t));
    }
    if (e->parsed()) return cmd_eval(ev, context_of(*e));
    if (r->parsed()) return cmd_report(rep, context_of(*r));
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace arm3d::cli
