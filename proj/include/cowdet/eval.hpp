#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cowdet/dataset.hpp"
#include "cowdet/detector.hpp"
#include "cowdet/geometry.hpp"

namespace cowdet {

struct GroundTruth {
  AbsBox box;
  int category_id = 0;
};

/// Detections and ground truth of one image.
struct ImageEval {
  std::vector<Detection> detections;
  std::vector<GroundTruth> truths;
};

struct DetectionMatch {
  bool tp = false;
  std::optional<std::size_t> gt;   // matched ground-truth index
  double iou = 0;                  // IoU with the best candidate considered
};

struct MatchResult {
  std::vector<DetectionMatch> matches;     // in detection input order
  std::vector<std::size_t> order;          // processing order
  int tp = 0, fp = 0, fn = 0;
};

/// Detections are processed by score descending (ties: larger best IoU,
/// then input order). Each claims its best-IoU unmatched same-category
/// ground truth when that IoU reaches the threshold; otherwise it is a
/// false positive. Leftover ground truths are false negatives.
MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                             double iou_thresh);

struct Counts {
  long tp = 0, fp = 0, fn = 0;
  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

struct PrecisionRecall {
  double precision = 0, recall = 0, f1 = 0;
};

/// With nothing to detect and nothing detected, precision and recall are 1.
PrecisionRecall precision_recall_f1(const Counts& c);

struct PRPoint {
  double recall = 0, precision = 0;
};

struct PRCurve {
  double iou_thresh = 0.5;
  std::vector<PRPoint> points;  // one per distinct score, descending
};

PRCurve pr_curve(const std::vector<ImageEval>& images, double iou_thresh);

/// 101-point interpolated average precision.
double average_precision(const std::vector<ImageEval>& images, double iou_thresh);

/// Mean AP over IoU thresholds 0.50, 0.55, ..., 0.95.
double map_range(const std::vector<ImageEval>& images);

struct MetricSet {
  double precision = 0, recall = 0, f1 = 0, ap50 = 0, map50_95 = 0;
  long images = 0, truths = 0, detections = 0;
  Counts counts;
};

struct EvalOptions {
  bool per_camera = false;
  int workers = 1;
  /// Score floor for the ranked detections that feed AP and PR curves.
  double rank_conf = 0.001;
  /// Operating point for precision/recall/F1; defaults to the config's.
  std::optional<double> operating_conf;
  double operating_iou = 0.5;
};

struct EvalReport {
  std::string split;
  double operating_conf = 0.25;
  double operating_iou = 0.5;
  MetricSet overall;
  std::map<CameraTag, MetricSet> per_camera;
  std::map<std::string, PRCurve> curves;  // "overall" plus camera tags
};

/// Operating-point metrics use detections with score >= operating_conf;
/// AP, mAP and curves use every detection given.
MetricSet compute_metrics(const std::vector<ImageEval>& images, double operating_conf, double operating_iou);

EvalReport evaluate_images(const std::vector<ImageEval>& images, const std::vector<CameraTag>& cameras,
                           const EvalOptions& opts, double operating_conf);

EvalReport evaluate(const std::filesystem::path& manifest_path, Split split, const WeightSet<float>& weights,
                    const DetectorConfig& cfg, const EvalOptions& opts);

nlohmann::json to_json(const EvalReport& r);
std::map<std::string, PRCurve> curves_from_report(const nlohmann::json& report);

/// CSV rows "label,recall,precision" plus an SVG with one polyline per label.
void emit_pr(const std::map<std::string, PRCurve>& curves, const std::filesystem::path& csv_path,
             const std::filesystem::path& svg_path);
std::map<std::string, PRCurve> read_pr_csv(const std::filesystem::path& csv_path);
std::string pr_svg(const std::map<std::string, PRCurve>& curves);

}  // namespace cowdet
