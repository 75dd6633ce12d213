#include "cowdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cowdet/error.hpp"
#include "cowdet/image.hpp"
#include "cowdet/parallel.hpp"

namespace cowdet {

namespace fs = std::filesystem;
using nlohmann::json;

MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                             double iou_thresh) {
  MatchResult r;
  r.matches.resize(dets.size());
  std::vector<std::vector<double>> ious(dets.size(), std::vector<double>(gts.size(), 0.0));
  std::vector<double> best(dets.size(), 0.0);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (dets[d].category_id != gts[g].category_id) continue;
      ious[d][g] = iou(dets[d].box, gts[g].box);
      best[d] = std::max(best[d], ious[d][g]);
    }
  }
  r.order.resize(dets.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return best[a] > best[b];
  });
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d : r.order) {
    std::optional<std::size_t> pick;
    double pick_iou = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || dets[d].category_id != gts[g].category_id) continue;
      if (!pick || ious[d][g] > pick_iou) {
        pick = g;
        pick_iou = ious[d][g];
      }
    }
    DetectionMatch& m = r.matches[d];
    m.iou = pick_iou;
    if (pick && pick_iou >= iou_thresh) {
      m.tp = true;
      m.gt = pick;
      taken[*pick] = true;
      ++r.tp;
    } else {
      ++r.fp;
    }
  }
  r.fn = static_cast<int>(std::count(taken.begin(), taken.end(), false));
  return r;
}

PrecisionRecall precision_recall_f1(const Counts& c) {
  PrecisionRecall p;
  p.precision = (c.tp + c.fp) == 0 ? (c.fn == 0 ? 1.0 : 0.0) : static_cast<double>(c.tp) / (c.tp + c.fp);
  p.recall = (c.tp + c.fn) == 0 ? (c.fp == 0 ? 1.0 : 0.0) : static_cast<double>(c.tp) / (c.tp + c.fn);
  p.f1 = (p.precision + p.recall) > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
  return p;
}

namespace {

struct Ranked {
  double score;
  std::size_t image, rank;
  bool tp;
};

// Every detection of every image, matched per image, in global score order.
std::vector<Ranked> rank_all(const std::vector<ImageEval>& images, double iou_thresh, long& total_truths) {
  std::vector<Ranked> out;
  total_truths = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ImageEval& im = images[i];
    total_truths += static_cast<long>(im.truths.size());
    const MatchResult m = match_detections(im.detections, im.truths, iou_thresh);
    for (std::size_t k = 0; k < m.order.size(); ++k) {
      const std::size_t d = m.order[k];
      out.push_back({im.detections[d].score, i, k, m.matches[d].tp});
    }
  }
  std::sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image != b.image) return a.image < b.image;
    return a.rank < b.rank;
  });
  return out;
}

}  // namespace

PRCurve pr_curve(const std::vector<ImageEval>& images, double iou_thresh) {
  long truths = 0;
  const auto ranked = rank_all(images, iou_thresh, truths);
  PRCurve curve;
  curve.iou_thresh = iou_thresh;
  long tp = 0, fp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    (ranked[k].tp ? tp : fp) += 1;
    if (k + 1 < ranked.size() && ranked[k + 1].score == ranked[k].score) continue;
    curve.points.push_back({truths > 0 ? static_cast<double>(tp) / truths : 0.0, static_cast<double>(tp) / (tp + fp)});
  }
  return curve;
}

double average_precision(const std::vector<ImageEval>& images, double iou_thresh) {
  long truths = 0;
  const auto ranked = rank_all(images, iou_thresh, truths);
  if (truths == 0) return ranked.empty() ? 1.0 : 0.0;
  // best[k] = max precision over points with recall >= k / 100, compared
  // exactly as tp * 100 >= k * truths.
  // Tied scores form one point, as on the curve.
  std::vector<double> best(101, 0.0);
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    (ranked[i].tp ? tp : fp) += 1;
    if (i + 1 < ranked.size() && ranked[i + 1].score == ranked[i].score) continue;
    const double precision = static_cast<double>(tp) / (tp + fp);
    const long reach = std::min<long>(100, (tp * 100) / truths);
    for (long k = 0; k <= reach; ++k) best[k] = std::max(best[k], precision);
  }
  double sum = 0;
  for (double b : best) sum += b;
  return sum / 101.0;
}

double map_range(const std::vector<ImageEval>& images) {
  double sum = 0;
  for (int t = 0; t < 10; ++t) sum += average_precision(images, (50 + 5 * t) / 100.0);
  return sum / 10.0;
}

MetricSet compute_metrics(const std::vector<ImageEval>& images, double operating_conf, double operating_iou) {
  MetricSet m;
  m.images = static_cast<long>(images.size());
  for (const ImageEval& im : images) {
    m.truths += static_cast<long>(im.truths.size());
    std::vector<Detection> kept;
    for (const Detection& d : im.detections)
      if (d.score >= operating_conf) kept.push_back(d);
    m.detections += static_cast<long>(kept.size());
    const MatchResult r = match_detections(kept, im.truths, operating_iou);
    m.counts += Counts{r.tp, r.fp, r.fn};
  }
  const PrecisionRecall pr = precision_recall_f1(m.counts);
  m.precision = pr.precision;
  m.recall = pr.recall;
  m.f1 = pr.f1;
  m.ap50 = average_precision(images, 0.5);
  m.map50_95 = map_range(images);
  return m;
}

EvalReport evaluate_images(const std::vector<ImageEval>& images, const std::vector<CameraTag>& cameras,
                           const EvalOptions& opts, double operating_conf) {
  if (images.empty()) throw Error("empty split");
  if (opts.per_camera && cameras.size() != images.size()) throw Error("camera tags do not match images");
  EvalReport rep;
  rep.operating_conf = operating_conf;
  rep.operating_iou = opts.operating_iou;
  rep.overall = compute_metrics(images, operating_conf, opts.operating_iou);
  rep.curves["overall"] = pr_curve(images, 0.5);
  if (opts.per_camera) {
    for (CameraTag tag : kAllCameras) {
      std::vector<ImageEval> subset;
      for (std::size_t i = 0; i < images.size(); ++i)
        if (cameras[i] == tag) subset.push_back(images[i]);
      rep.per_camera[tag] = compute_metrics(subset, operating_conf, opts.operating_iou);
      rep.curves[std::string(to_string(tag))] = pr_curve(subset, 0.5);
    }
  }
  return rep;
}

EvalReport evaluate(const fs::path& manifest_path, Split split, const WeightSet<float>& weights,
                    const DetectorConfig& cfg, const EvalOptions& opts) {
  const Manifest m = load_manifest(manifest_path);
  std::vector<const ImageRecord*> recs;
  for (const auto& r : m.images)
    if (r.split == split) recs.push_back(&r);
  if (recs.empty()) throw Error("empty split");
  for (const ImageRecord* r : recs) {
    if (!fs::exists(label_path(manifest_path, r->id))) throw Error("missing label file for image " + r->id);
  }
  check_weights(weights, cfg);

  std::vector<ImageEval> images(recs.size());
  std::vector<CameraTag> cameras(recs.size());
  parallel_for(recs.size(), opts.workers, [&](std::size_t i) {
    const ImageRecord& r = *recs[i];
    const Image img = load_png(image_path(manifest_path, r));
    images[i].detections = predict(img, weights, cfg, opts.rank_conf);
    for (const LabeledBox& lb : parse_label_file(label_path(manifest_path, r.id), false).boxes) {
      images[i].truths.push_back({norm_to_abs(lb.box, img.width(), img.height()), lb.category_id});
    }
    cameras[i] = r.camera;
  });
  EvalReport rep = evaluate_images(images, cameras, opts, opts.operating_conf.value_or(cfg.conf_thresh));
  rep.split = std::string(to_string(split));
  return rep;
}

namespace {

json metrics_json(const MetricSet& m) {
  return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
              {"ap50", m.ap50},           {"map50_95", m.map50_95}};
}

json counts_json(const MetricSet& m) {
  return json{{"images", m.images}, {"gts", m.truths}, {"detections", m.detections},
              {"tp", m.counts.tp},  {"fp", m.counts.fp}, {"fn", m.counts.fn}};
}

}  // namespace

json to_json(const EvalReport& r) {
  json per_camera = json::object();
  for (const auto& [tag, m] : r.per_camera) {
    json entry = metrics_json(m);
    entry["counts"] = counts_json(m);
    per_camera[std::string(to_string(tag))] = entry;
  }
  json curves = json::object();
  for (const auto& [label, c] : r.curves) {
    json pts = json::array();
    for (const PRPoint& p : c.points) pts.push_back({p.recall, p.precision});
    curves[label] = json{{"iou", c.iou_thresh}, {"points", pts}};
  }
  return json{{"split", r.split},
              {"operating_point", {{"conf", r.operating_conf}, {"iou", r.operating_iou}}},
              {"overall", metrics_json(r.overall)},
              {"per_camera", per_camera},
              {"counts", counts_json(r.overall)},
              {"pr_curves", curves}};
}

std::map<std::string, PRCurve> curves_from_report(const json& report) {
  std::map<std::string, PRCurve> out;
  if (!report.contains("pr_curves") || !report["pr_curves"].is_object()) throw Error("report has no pr_curves");
  try {
    for (const auto& [label, c] : report["pr_curves"].items()) {
      PRCurve curve;
      curve.iou_thresh = c.at("iou").get<double>();
      for (const auto& p : c.at("points")) curve.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      out[label] = curve;
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed pr_curves: ") + e.what());
  }
  return out;
}

std::string pr_svg(const std::map<std::string, PRCurve>& curves) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  constexpr double kLeft = 60, kTop = 20, kSide = 400;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLeft + kSide + 140 << "\" height=\""
      << kTop + kSide + 60 << "\">\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kSide << "\" height=\"" << kSide
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 10; ++t) {
    const double v = t / 10.0;
    char label[16];
    std::snprintf(label, sizeof label, "%.1f", v);
    svg << "<text x=\"" << kLeft + v * kSide << "\" y=\"" << kTop + kSide + 16
        << "\" font-size=\"10\" text-anchor=\"middle\">" << label << "</text>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + (1 - v) * kSide + 3
        << "\" font-size=\"10\" text-anchor=\"end\">" << label << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + kSide / 2 << "\" y=\"" << kTop + kSide + 40
      << "\" font-size=\"12\" text-anchor=\"middle\">recall</text>\n";
  svg << "<text x=\"16\" y=\"" << kTop + kSide / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << kTop + kSide / 2 << ")\">precision</text>\n";
  int idx = 0;
  for (const auto& [label, c] : curves) {
    const char* color = kColors[idx % 7];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const PRPoint& p : c.points) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", kLeft + p.recall * kSide, kTop + (1 - p.precision) * kSide);
      svg << buf;
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << kLeft + kSide + 12 << "\" y=\"" << kTop + 14 + 16 * idx << "\" font-size=\"12\" fill=\""
        << color << "\">" << label << "</text>\n";
    ++idx;
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_pr(const std::map<std::string, PRCurve>& curves, const fs::path& csv_path, const fs::path& svg_path) {
  std::string csv = "label,recall,precision\n";
  char buf[128];
  for (const auto& [label, c] : curves) {
    for (const PRPoint& p : c.points) {
      std::snprintf(buf, sizeof buf, ",%.9f,%.9f\n", p.recall, p.precision);
      csv += label + buf;
    }
  }
  atomic_write(csv_path, csv);
  atomic_write(svg_path, pr_svg(curves));
}

std::map<std::string, PRCurve> read_pr_csv(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error("cannot open " + csv_path.string());
  std::map<std::string, PRCurve> out;
  std::string line;
  std::getline(in, line);
  if (line != "label,recall,precision") throw Error("unexpected PR CSV header");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || a == b) throw Error("malformed PR CSV row, line " + std::to_string(line_no));
    PRPoint p;
    try {
      p.recall = std::stod(line.substr(a + 1, b - a - 1));
      p.precision = std::stod(line.substr(b + 1));
    } catch (const std::exception&) {
      throw Error("malformed PR CSV number, line " + std::to_string(line_no));
    }
    out[line.substr(0, a)].points.push_back(p);
  }
  return out;
}

}  // namespace cowdet
