#include "cowdet/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cowdet/annotate.hpp"
#include "cowdet/augment.hpp"
#include "cowdet/checkpoint.hpp"
#include "cowdet/dataset.hpp"
#include "cowdet/error.hpp"
#include "cowdet/eval.hpp"
#include "cowdet/image.hpp"
#include "cowdet/run_config.hpp"
#include "cowdet/trainer.hpp"

namespace cowdet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int default_workers() {
  const char* env = std::getenv("COWDET_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) throw UsageError("COWDET_WORKERS must be a positive integer");
  return static_cast<int>(n);
}

void refuse_overwrite(const fs::path& p, bool force) {
  if (!force && fs::exists(p)) throw Error(p.string() + " already exists (use --force to overwrite)");
}

void refuse_nonempty_dir(const fs::path& p, bool force) {
  if (!force && fs::is_directory(p) && !fs::is_empty(p))
    throw Error(p.string() + " is not empty (use --force to overwrite)");
}

SplitRatios parse_ratios(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("--ratios: malformed number \"" + part + "\"");
    }
  }
  if (v.size() != 3) throw UsageError("--ratios expects three comma-separated values");
  SplitRatios r{v[0], v[1], v[2]};
  try {
    validate(r);
  } catch (const Error& e) {
    throw UsageError(std::string("--ratios: ") + e.what());
  }
  return r;
}

Split split_arg(const std::string& s) {
  try {
    return parse_split(s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"cowdet: attention-augmented one-stage animal detector"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cowdet 1.0");

  int workers = 0;
  bool force = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--workers", workers, "Worker threads (default $COWDET_WORKERS or 1)")->check(CLI::PositiveNumber);
    sub->add_flag("--force", force, "Overwrite existing outputs");
  };

  // split
  std::string manifest, ratios = "0.7,0.2,0.1", out;
  std::uint64_t seed = 1;
  auto* split_cmd = app.add_subcommand("split", "Assign train/val/test splits");
  split_cmd->add_option("--manifest", manifest, "Manifest JSON")->required();
  split_cmd->add_option("--ratios", ratios, "train,val,test ratios")->capture_default_str();
  split_cmd->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
  split_cmd->add_option("--out", out, "Output manifest (default: update in place)");
  common(split_cmd);

  // gen-synthetic
  SyntheticOptions syn;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Render a synthetic dataset");
  gen_cmd->add_option("--n", syn.count, "Number of images")->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--clutter", syn.clutter, "Clutter level in [0, 1]")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--seed", syn.seed, "Seed")->capture_default_str();
  gen_cmd->add_option("--size", syn.size, "Image side in pixels")->capture_default_str()->check(CLI::Range(32, 4096));
  gen_cmd->add_option("--out", out, "Output directory")->required();
  common(gen_cmd);

  // augment
  std::string config_path;
  int copies = -1;
  auto* aug_cmd = app.add_subcommand("augment", "Add augmented copies of the train split");
  aug_cmd->add_option("--manifest", manifest, "Manifest JSON")->required();
  aug_cmd->add_option("--copies", copies, "Copies per train image (default 2)")->check(CLI::NonNegativeNumber);
  aug_cmd->add_option("--seed", seed, "Seed")->capture_default_str();
  aug_cmd->add_option("--config", config_path, "Run config JSON supplying the augment section");
  aug_cmd->add_option("--out", out, "Output manifest (default: update in place)");
  common(aug_cmd);

  // train
  std::string optimizer, log_path;
  int epochs = 0, batch = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a detector");
  train_cmd->add_option("--manifest", manifest, "Manifest JSON (overrides the config path)");
  train_cmd->add_option("--config", config_path, "Run config JSON (default: desk preset)");
  train_cmd->add_option("--optimizer", optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
  train_cmd->add_option("--epochs", epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", batch, "Batch size")->check(CLI::PositiveNumber);
  auto* train_seed = train_cmd->add_option("--seed", seed, "Seed");
  train_cmd->add_option("--out", out, "Checkpoint path (overrides the config path)");
  train_cmd->add_option("--log", log_path, "Training log JSON (default: <out>.log.json)");
  common(train_cmd);

  // eval
  std::string ckpt, split_name = "test", report_path;
  bool per_camera = false;
  double conf = -1;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  eval_cmd->add_option("--manifest", manifest, "Manifest JSON")->required();
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--split", split_name, "train, val or test")->capture_default_str();
  eval_cmd->add_flag("--per-camera", per_camera, "Break metrics down by camera tag");
  eval_cmd->add_option("--conf", conf, "Operating confidence (default: checkpoint config)")->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--report", report_path, "Report JSON path");
  common(eval_cmd);

  // predict
  std::string image, out_labels;
  auto* pred_cmd = app.add_subcommand("predict", "Detect animals in one image");
  pred_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  pred_cmd->add_option("--image", image, "PNG image")->required();
  pred_cmd->add_option("--out-labels", out_labels, "Label file with confidence column")->required();
  pred_cmd->add_option("--conf", conf, "Confidence threshold (default: checkpoint config)")->check(CLI::Range(0.0, 1.0));
  common(pred_cmd);

  // annotate
  std::string images_dir;
  auto* ann_cmd = app.add_subcommand("annotate", "Write candidate labels for a directory of images");
  ann_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ann_cmd->add_option("--images", images_dir, "Image directory")->required();
  ann_cmd->add_option("--conf", conf, "Confidence threshold in (0, 1)")->required();
  ann_cmd->add_option("--out", out, "Candidate directory")->required();
  common(ann_cmd);

  // merge-labels
  std::string candidates, corrections;
  double accept = 0.5;
  auto* merge_cmd = app.add_subcommand("merge-labels", "Merge candidates with human corrections");
  merge_cmd->add_option("--candidates", candidates, "Candidate directory")->required();
  merge_cmd->add_option("--corrections", corrections, "Correction directory");
  merge_cmd->add_option("--accept-thresh", accept, "Keep candidates scoring at least this")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  merge_cmd->add_option("--out", out, "Final label directory")->required();
  common(merge_cmd);

  // plot-pr
  std::string csv_path, svg_path;
  auto* plot_cmd = app.add_subcommand("plot-pr", "Export PR curves of an eval report");
  plot_cmd->add_option("--report", report_path, "Report JSON")->required();
  plot_cmd->add_option("--csv", csv_path, "CSV output")->required();
  plot_cmd->add_option("--svg", svg_path, "SVG output")->required();
  common(plot_cmd);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::Success& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << "error: " << e.what() << "\n" << app.help();
      return 1;
    }
    if (workers == 0) workers = default_workers();

    if (split_cmd->parsed()) {
      const SplitRatios r = parse_ratios(ratios);
      const Manifest m = split(load_manifest(manifest), r, seed);
      const fs::path dest = out.empty() ? fs::path(manifest) : fs::path(out);
      if (!out.empty()) refuse_overwrite(dest, force);
      save_manifest(m, dest);
      int n[3] = {0, 0, 0};
      for (const auto& rec : m.images) ++n[static_cast<int>(rec.split)];
      std::cout << "split: train=" << n[0] << " val=" << n[1] << " test=" << n[2] << " -> " << dest.string() << "\n";
    } else if (gen_cmd->parsed()) {
      refuse_overwrite(fs::path(out) / "manifest.json", force);
      const fs::path mp = gen_synthetic(syn, out);
      std::cout << "gen-synthetic: " << syn.count << " images -> " << mp.string() << "\n";
    } else if (aug_cmd->parsed()) {
      AugmentSpec spec;
      if (!config_path.empty()) spec = load_run_config(config_path).augment;
      if (copies >= 0) spec.copies_per_image = copies;
      if (aug_cmd->count("--seed") || config_path.empty()) spec.seed = seed;
      const fs::path dest = out.empty() ? fs::path(manifest) : fs::path(out);
      if (!out.empty()) refuse_overwrite(dest, force);
      const Manifest m = augment_dataset(manifest, spec, workers, force);
      save_manifest(m, dest);
      std::size_t added = 0;
      for (const auto& rec : m.images) added += is_augmented_id(rec.id);
      std::cout << "augment: " << added << " augmented images, " << m.images.size() << " total -> " << dest.string()
                << "\n";
    } else if (train_cmd->parsed()) {
      RunConfig rc;
      if (!config_path.empty()) rc = load_run_config(config_path);
      if (!manifest.empty()) rc.manifest = manifest;
      if (!out.empty()) rc.out = out;
      if (!optimizer.empty()) rc.train.optimizer.kind = parse_optimizer(optimizer);
      if (epochs > 0) rc.train.epochs = epochs;
      if (batch > 0) rc.train.batch_size = batch;
      if (train_seed->count()) rc.train.seed = seed;
      rc.train.workers = workers;
      if (!rc.manifest) throw UsageError("train: --manifest is required (or paths.manifest in the config)");
      if (!rc.out) throw UsageError("train: --out is required (or paths.out in the config)");
      const fs::path ckpt_out = *rc.out;
      const fs::path log_out = log_path.empty() ? fs::path(ckpt_out.string() + ".log.json") : fs::path(log_path);
      refuse_overwrite(ckpt_out, force);
      refuse_overwrite(log_out, force);
      const TrainResult res = train(fs::path(*rc.manifest), rc.detector, rc.train);
      if (ckpt_out.has_parent_path()) fs::create_directories(ckpt_out.parent_path());
      save_checkpoint(res.weights, rc.detector, ckpt_out);
      atomic_write(log_out, training_log_json(res));
      std::cout << "train: " << to_string(rc.train.optimizer.kind) << " epochs=" << res.epochs.size()
                << " iterations=" << res.iteration_loss.size()
                << " final_loss=" << fmt(res.epochs.empty() ? 0.0 : res.epochs.back().loss) << " -> "
                << ckpt_out.string() << "\n";
    } else if (eval_cmd->parsed()) {
      const Split sp = split_arg(split_name);
      if (!report_path.empty()) refuse_overwrite(report_path, force);
      const Checkpoint ck = load_checkpoint(ckpt);
      EvalOptions opts;
      opts.per_camera = per_camera;
      opts.workers = workers;
      if (conf >= 0) opts.operating_conf = conf;
      const EvalReport rep = evaluate(manifest, sp, ck.weights, ck.config, opts);
      if (!report_path.empty()) atomic_write(report_path, to_json(rep).dump(2) + "\n");
      const MetricSet& o = rep.overall;
      std::cout << "eval: split=" << rep.split << " images=" << o.images << " P=" << fmt(o.precision)
                << " R=" << fmt(o.recall) << " F1=" << fmt(o.f1) << " AP50=" << fmt(o.ap50)
                << " mAP50-95=" << fmt(o.map50_95);
      if (!report_path.empty()) std::cout << " -> " << report_path;
      std::cout << "\n";
    } else if (pred_cmd->parsed()) {
      refuse_overwrite(out_labels, force);
      const Checkpoint ck = load_checkpoint(ckpt);
      const Image img = load_png(image);
      const double thresh = conf >= 0 ? conf : ck.config.conf_thresh;
      LabelSet ls;
      ls.image_id = fs::path(image).stem().string();
      for (const Detection& d : predict(img, ck.weights, ck.config, thresh)) {
        const NormBox nb = canonical(abs_to_norm(d.box, img.width(), img.height()));
        if (is_valid(nb)) ls.boxes.push_back({d.category_id, nb, d.score});
      }
      write_label_file(ls, out_labels, true);
      std::cout << "predict: " << ls.boxes.size() << " detections -> " << out_labels << "\n";
    } else if (ann_cmd->parsed()) {
      refuse_nonempty_dir(out, force);
      const Checkpoint ck = load_checkpoint(ckpt);
      const AnnotateSummary s = annotate_candidates(ck.weights, ck.config, images_dir, conf, out, workers);
      std::cout << "annotate: " << s.written << " candidate files, " << s.boxes << " boxes, " << s.skipped.size()
                << " skipped -> " << out << "\n";
    } else if (merge_cmd->parsed()) {
      refuse_nonempty_dir(out, force);
      const MergeSummary s = merge_corrections(candidates, corrections, accept, out);
      std::cout << "merge-labels: " << s.images << " label files (" << s.corrected << " corrected), " << s.boxes
                << " boxes -> " << out << "\n";
    } else if (plot_cmd->parsed()) {
      refuse_overwrite(csv_path, force);
      refuse_overwrite(svg_path, force);
      std::ifstream in(report_path);
      if (!in) throw Error("cannot open report " + report_path);
      json rep;
      try {
        rep = json::parse(in);
      } catch (const json::exception& e) {
        throw Error("report " + report_path + ": " + e.what());
      }
      const auto curves = curves_from_report(rep);
      emit_pr(curves, csv_path, svg_path);
      std::size_t points = 0;
      for (const auto& [label, c] : curves) points += c.points.size();
      std::cout << "plot-pr: " << curves.size() << " curves, " << points << " points -> " << csv_path << ", "
                << svg_path << "\n";
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace cowdet
