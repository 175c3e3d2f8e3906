// Command-line front end: train / eval / infer / ablate / curves / params
// plus a synthetic-dataset generator for toy runs.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "mdsam/mdsam.hpp"
#include "mdsam/synth.hpp"

namespace fs = std::filesystem;
using namespace mdsam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int check_device_env() {
  const char* dev = std::getenv("MDSAM_DEVICE");
  if (dev == nullptr) return kExitOk;
  const std::string d(dev);
  if (d.empty() || d == "cpu") return kExitOk;
  std::cerr << "error: MDSAM_DEVICE='" << d << "' is not available (this build is cpu-only)\n";
  return kExitUsage;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, out, resume;
  int epochs = -1, batch_size = -1, resolution = -1;
  std::int64_t seed = -1;
  bool augment = false;
};

int cmd_train(const TrainArgs& a) {
  RunConfig rc = load_run_config(a.config);
  if (a.epochs > 0) rc.train.max_epochs = a.epochs;
  if (a.batch_size > 0) rc.train.batch_size = a.batch_size;
  if (a.resolution > 0) rc.model.resolution = a.resolution;
  if (a.seed >= 0) rc.model.seed = static_cast<std::uint64_t>(a.seed);
  rc.train.validate();

  const DatasetManifest manifest = DatasetManifest::from_json_file(a.data);
  const Dataset data = load_dataset(manifest, rc.model.resolution, a.augment);
  fs::create_directories(a.out);

  SodModel model(rc.model);
  Trainer trainer(model, rc.train);
  if (!a.resume.empty()) {
    const Archive ck = Archive::load(a.resume);
    const RunConfig stored = run_config_from_json(nlohmann::json::parse(
        ck.at("meta.config_json").bytes));
    if (model_config_to_json(stored.model).dump() != model_config_to_json(rc.model).dump()) {
      throw CliError("resume: checkpoint model config does not match --config");
    }
    trainer.load_checkpoint(a.resume);
    std::cout << "resumed from epoch " << trainer.epoch() << "\n";
  }

  TrainResult result = trainer.run(data, TrainOptions{a.out, nullptr});
  const std::uint64_t hash = config_hash(rc);
  write_loss_log(result.log, a.out + "/loss_log.csv", hash);
  std::cout << "trained " << result.epochs_completed << " epochs, " << result.log.size()
            << " steps; checkpoint: " << a.out << "/checkpoint.mdsam\n";
  if (!result.log.empty()) {
    std::cout << "final loss: " << result.log.back().total << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gt, out, curves;
};

int cmd_eval(const EvalArgs& a) {
  MetricReport report = evaluate_dataset(a.pred, a.gt);
  // eval provenance hashes the effective tool settings
  nlohmann::json prov = {{"command", "eval"}, {"pred", a.pred}, {"gt", a.gt}};
  const std::uint64_t hash = fnv1a64(prov.dump());
  write_metric_report_csv(report, a.out, hash);
  std::string curves_path = a.curves;
  if (curves_path.empty()) {
    curves_path = a.out;
    const auto dot = curves_path.rfind('.');
    curves_path = (dot == std::string::npos ? curves_path : curves_path.substr(0, dot)) +
                  "_curves.csv";
  }
  write_curves_csv(report, curves_path, hash);
  char line[128];
  std::snprintf(line, sizeof line, "%.4f %.4f %.4f %.4f", report.mae, report.f_max, report.s,
                report.e);
  std::cout << "aggregate (MAE Fmax Sm Em): " << line << "\n";
  std::cout << "evaluated " << report.evaluated << " pairs";
  if (!report.unmatched.empty()) std::cout << ", warnings: " << report.unmatched.size()
                                           << " unmatched stems";
  if (report.empty_gt_count > 0) std::cout << ", empty-gt: " << report.empty_gt_count;
  std::cout << "\nreport: " << a.out << "\ncurves: " << curves_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string checkpoint, images, out;
  int resolution = -1;
};

int cmd_infer(const InferArgs& a) {
  const Archive ck = Archive::load(a.checkpoint);
  RunConfig rc = run_config_from_json(nlohmann::json::parse(ck.at("meta.config_json").bytes));
  if (a.resolution > 0) {
    if (a.resolution % rc.model.encoder.patch_size != 0) {
      throw CliError("--resolution must be divisible by " +
                     std::to_string(rc.model.encoder.patch_size));
    }
    rc.model.resolution = a.resolution;
  }
  SodModel model(rc.model);
  Trainer::restore_model(model, ck);
  const InferStats st = infer_directory(model, a.images, a.out, rc.model.resolution);
  std::cout << "wrote " << st.written << " saliency maps to " << a.out;
  if (st.skipped > 0) std::cout << " (skipped " << st.skipped << " unreadable inputs)";
  std::cout << "\n";
  if (st.written == 0) {
    std::cerr << "error: no images could be processed\n";
    return kExitUsage;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string config, data, out;
  std::string matrix = "table4";  // table4 | scales | both
};

int cmd_ablate(const AblateArgs& a) {
  RunConfig rc = load_run_config(a.config);
  const DatasetManifest manifest = DatasetManifest::from_json_file(a.data);
  const Dataset data = load_dataset(manifest, rc.model.resolution, false);

  std::vector<AblationVariant> variants;
  if (a.matrix == "table4" || a.matrix == "both") {
    auto v = table4_variants(rc.model);
    variants.insert(variants.end(), v.begin(), v.end());
  }
  if (a.matrix == "scales" || a.matrix == "both") {
    auto v = scale_variants(rc.model);
    variants.insert(variants.end(), v.begin(), v.end());
  }
  if (variants.empty()) throw CliError("--matrix must be table4, scales or both");

  const auto rows = run_ablation(variants, data, rc.train);
  write_ablation_csv(rows, a.out, config_hash(rc));
  int ok = 0;
  for (const auto& r : rows) {
    std::cout << r.label << ": " << (r.ok ? "ok" : ("failed: " + r.error));
    if (r.ok) std::cout << " (loss " << r.final_loss << ", mae " << r.mae << ")";
    std::cout << "\n";
    ok += r.ok ? 1 : 0;
  }
  std::cout << "table: " << a.out << "\n";
  return ok > 0 ? kExitOk : kExitNumeric;
}

// ---------------------------------------------------------------------------

struct CurvesArgs {
  std::vector<std::string> reports;
  std::string out_prefix;
};

int cmd_curves(const CurvesArgs& a) {
  std::vector<CurveSeries> pr_series, f_series;
  for (const auto& path : a.reports) {
    const CurveTable table = read_curves_csv(path);
    CurveSeries pr, fc;
    pr.label = fc.label = fs::path(path).stem().string();
    pr.x = table.recall;
    pr.y = table.precision;
    fc.x = table.threshold;
    fc.y = table.f;
    pr_series.push_back(std::move(pr));
    f_series.push_back(std::move(fc));
  }
  const std::string pr_path = a.out_prefix + "_pr.svg";
  const std::string f_path = a.out_prefix + "_f.svg";
  write_svg_chart(pr_path, "Precision-Recall", "Recall", "Precision", 0.0, 1.0, pr_series);
  write_svg_chart(f_path, "F-measure vs threshold", "Threshold", "F-measure", 0.0, 255.0,
                  f_series);
  std::cout << "wrote " << pr_path << " and " << f_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_params(const std::string& config_path) {
  const RunConfig rc = load_run_config(config_path);
  SodModel model(rc.model);
  auto print_row = [](const std::string& label, long count) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %12ld   %8.2f M", label.c_str(), count, count / 1e6);
    std::cout << buf << "\n";
  };
  long lmsa = 0, mlfm_n = 0, dem_n = 0;
  for (Param* p : model.params()) {
    if (p->name.find(".lmsa.") != std::string::npos) lmsa += p->size();
    else if (p->name.rfind("mlfm.", 0) == 0) mlfm_n += p->size();
    else if (p->name.rfind("dem.", 0) == 0) dem_n += p->size();
  }
  print_row("total", model.params_count());
  print_row("frozen", model.params_count(ParamGroup::Frozen));
  print_row("pretrained", model.params_count(ParamGroup::Pretrained));
  print_row("new", model.params_count(ParamGroup::Fresh));
  print_row("  lmsa", lmsa);
  print_row("  mlfm", mlfm_n);
  print_row("  dem", dem_n);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int count = 8;
  int size = 64;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  write_synth_dataset(a.out, SynthSpec{a.count, a.size, a.seed});
  std::cout << "wrote " << a.count << " samples under " << a.out << " (manifest.json included)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (const int rc = check_device_env(); rc != kExitOk) return rc;

  CLI::App app{"Salient-object-detection toolkit: adapter-tuned ViT encoder with multi-level "
               "fusion and detail enhancement"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model from a JSON run config");
  train->add_option("--config", train_args.config, "Run config JSON (model + train sections)")
      ->required();
  train->add_option("--data", train_args.data, "Dataset manifest JSON")->required();
  train->add_option("--out", train_args.out, "Output directory for checkpoint and loss log")
      ->required();
  train->add_option("--resume", train_args.resume, "Checkpoint to resume from");
  train->add_option("--epochs", train_args.epochs, "Override train.max_epochs");
  train->add_option("--batch-size", train_args.batch_size, "Override train.batch_size");
  train->add_option("--resolution", train_args.resolution, "Override model.resolution");
  train->add_option("--seed", train_args.seed, "Override model.seed");
  train->add_flag("--augment", train_args.augment, "Enable horizontal-flip augmentation");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score saliency maps against ground-truth masks");
  eval->add_option("--pred", eval_args.pred, "Directory of predicted maps (.pgm)")->required();
  eval->add_option("--gt", eval_args.gt, "Directory of ground-truth masks (.pgm)")->required();
  eval->add_option("--out", eval_args.out, "Metric report CSV path")->required();
  eval->add_option("--curves", eval_args.curves, "Curve CSV path (default: <out>_curves.csv)");

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "Run inference over a directory of images");
  infer->add_option("--checkpoint", infer_args.checkpoint, "Checkpoint file")->required();
  infer->add_option("--images", infer_args.images, "Input image directory")->required();
  infer->add_option("--out", infer_args.out, "Output directory for saliency maps")->required();
  infer->add_option("--resolution", infer_args.resolution, "Inference resolution override");

  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "Train and score the ablation matrix");
  ablate->add_option("--config", ablate_args.config, "Base run config JSON")->required();
  ablate->add_option("--data", ablate_args.data, "Dataset manifest JSON")->required();
  ablate->add_option("--out", ablate_args.out, "Output CSV path")->required();
  ablate->add_option("--matrix", ablate_args.matrix, "Variant set: table4|scales|both");

  CurvesArgs curves_args;
  auto* curves = app.add_subcommand("curves", "Render PR and F-measure plots from curve CSVs");
  curves->add_option("--report", curves_args.reports, "Curve CSV (repeatable for overlays)")
      ->required();
  curves->add_option("--out-prefix", curves_args.out_prefix, "Output path prefix for SVG files")
      ->required();

  std::string params_config;
  auto* params = app.add_subcommand("params", "Print parameter counts per group");
  params->add_option("--config", params_config, "Run config JSON")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic toy dataset");
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--count", synth_args.count, "Number of samples");
  synth->add_option("--size", synth_args.size, "Image side length");
  synth->add_option("--seed", synth_args.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (infer->parsed()) return cmd_infer(infer_args);
    if (ablate->parsed()) return cmd_ablate(ablate_args);
    if (curves->parsed()) return cmd_curves(curves_args);
    if (params->parsed()) return cmd_params(params_config);
    if (synth->parsed()) return cmd_synth(synth_args);
  } catch (const TrainAbort& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
