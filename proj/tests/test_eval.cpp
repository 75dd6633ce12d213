#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cowdet/error.hpp"
#include "cowdet/eval.hpp"
#include "cowdet/rng.hpp"
#include "oracles.hpp"

using namespace cowdet;
namespace fs = std::filesystem;

using namespace cowdet::oracles;

namespace {

Detection det(const AbsBox& b, double score, int cat = 0) { return {b, score, cat}; }
GroundTruth gt(const AbsBox& b, int cat = 0) { return {b, cat}; }

}  // namespace

TEST_CASE("match examples") {
  const AbsBox g{0, 0, 10, 10};
  const AbsBox six{0, 0, 10, 6};  // IoU 0.6
  auto r = match_detections({det(six, 0.9)}, {gt(g)}, 0.5);
  CHECK(r.tp == 1);
  CHECK(r.fp == 0);
  CHECK(r.fn == 0);
  CHECK(r.matches[0].iou == doctest::Approx(0.6));

  r = match_detections({det(six, 0.8), det(g, 0.9)}, {gt(g)}, 0.5);
  CHECK(r.tp == 1);
  CHECK(r.fp == 1);
  CHECK(r.matches[1].tp);
  CHECK_FALSE(r.matches[0].tp);
  CHECK(r.order == std::vector<std::size_t>{1, 0});

  r = match_detections({}, {gt(g), gt({20, 20, 30, 30})}, 0.5);
  CHECK(r.fn == 2);

  // Category mismatch never matches.
  r = match_detections({det(g, 0.9, 1)}, {gt(g, 0)}, 0.5);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);

  // Equal scores: the better-overlapping detection goes first.
  r = match_detections({det(six, 0.5), det(g, 0.5)}, {gt(g)}, 0.5);
  CHECK(r.matches[1].tp);
  CHECK(r.order == std::vector<std::size_t>{1, 0});
}

TEST_CASE("match equals the exhaustive oracle") {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    const int nd = static_cast<int>(rng.below(5)), ng = static_cast<int>(rng.below(5));
    std::vector<Detection> dets;
    std::vector<GroundTruth> gts;
    for (int i = 0; i < ng; ++i) gts.push_back(gt(grid_box(rng), static_cast<int>(rng.below(2))));
    for (int i = 0; i < nd; ++i)
      dets.push_back(det(grid_box(rng), static_cast<double>(rng.below(3)) / 2, static_cast<int>(rng.below(2))));
    const double thresh = std::array<double, 3>{0.25, 0.5, 1.0}[rng.below(3)];
    const MatchResult got = match_detections(dets, gts, thresh);
    const OracleResult want = oracle_match(dets, gts, thresh);
    CHECK(got.tp == want.tp);
    CHECK(got.fp == want.fp);
    CHECK(got.fn == want.fn);
    for (int d = 0; d < nd; ++d) {
      CHECK(got.matches[d].gt == want.assigned[d]);
      CHECK(got.matches[d].tp == want.assigned[d].has_value());
    }
    CHECK(got.tp + got.fp == nd);
  }
}

TEST_CASE("precision, recall and F1") {
  auto p = precision_recall_f1({1, 0, 0});
  CHECK(p.precision == 1.0);
  CHECK(p.recall == 1.0);
  CHECK(p.f1 == 1.0);
  p = precision_recall_f1({0, 0, 0});
  CHECK(p.precision == 1.0);
  CHECK(p.recall == 1.0);
  CHECK(p.f1 == 1.0);
  p = precision_recall_f1({0, 3, 0});
  CHECK(p.precision == 0.0);
  CHECK(p.recall == 0.0);
  CHECK(p.f1 == 0.0);
  p = precision_recall_f1({0, 0, 2});
  CHECK(p.precision == 0.0);
  CHECK(p.recall == 0.0);
  p = precision_recall_f1({3, 1, 2});
  CHECK(p.precision == doctest::Approx(0.75));
  CHECK(p.recall == doctest::Approx(0.6));
  const double P = 0.952, R = 0.927;
  CHECK(2 * P * R / (P + R) == doctest::Approx(0.9394).epsilon(1e-4));
  // Counts that produce exactly those rates.
  p = precision_recall_f1({952 * 927, 48 * 927, 73 * 952});
  CHECK(p.f1 == doctest::Approx(0.9394).epsilon(1e-4));
}

TEST_CASE("average precision examples") {
  const AbsBox a{0, 0, 10, 10}, b{20, 20, 30, 30};
  CHECK(average_precision({{{det(a, 0.9)}, {gt(a)}}}, 0.5) == 1.0);
  CHECK(average_precision({{{}, {gt(a)}}}, 0.5) == 0.0);
  CHECK(map_range({{{}, {gt(a)}}}) == 0.0);
  const std::vector<ImageEval> two{{{det(a, 0.9), det({50, 50, 60, 60}, 0.8)}, {gt(a), gt(b)}}};
  CHECK(std::abs(average_precision(two, 0.5) - 51.0 / 101.0) < 1e-9);
  const PRCurve c = pr_curve(two, 0.5);
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[0].recall == 0.5);
  CHECK(c.points[0].precision == 1.0);
  CHECK(c.points[1].recall == 0.5);
  CHECK(c.points[1].precision == 0.5);

  const PRCurve perfect = pr_curve({{{det(a, 0.9)}, {gt(a)}}}, 0.5);
  REQUIRE(perfect.points.size() == 1);
  CHECK(perfect.points[0].recall == 1.0);
  CHECK(perfect.points[0].precision == 1.0);

  CHECK(map_range({{{det(a, 0.9), det(b, 0.7)}, {gt(a), gt(b)}}}) == 1.0);
  // IoU exactly 0.6 with every GT: AP 1 at 0.50, 0.55, 0.60, then 0.
  const std::vector<ImageEval> six{{{det({0, 0, 10, 6}, 0.9), det({20, 20, 30, 26}, 0.8)}, {gt(a), gt(b)}}};
  CHECK(std::abs(map_range(six) - 0.3) < 1e-12);
}

TEST_CASE("AP properties") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    auto images = random_images(rng, 1 + static_cast<int>(rng.below(4)));
    const double ap = average_precision(images, 0.5);
    CHECK(ap >= 0);
    CHECK(ap <= 1);
    CHECK(map_range(images) <= ap + 1e-12);

    // Rank-only: a strictly increasing transform leaves AP unchanged.
    auto warped = images;
    for (auto& im : warped)
      for (auto& d : im.detections) d.score = std::pow(d.score, 3) * 0.5 + 0.1;
    CHECK(average_precision(warped, 0.5) == ap);
    CHECK(map_range(warped) == map_range(images));

    // A new lowest-scoring false positive never helps.
    auto extra = images;
    extra[0].detections.push_back(det({200, 200, 210, 210}, -1.0));
    CHECK(average_precision(extra, 0.5) <= ap);

    const PRCurve c = pr_curve(images, 0.5);
    for (std::size_t i = 1; i < c.points.size(); ++i) CHECK(c.points[i].recall >= c.points[i - 1].recall);
    for (const auto& p : c.points) CHECK((p.precision >= 0 && p.precision <= 1));
  }
}

TEST_CASE("operating point uses the confidence floor; AP uses everything") {
  const AbsBox a{0, 0, 10, 10}, b{20, 20, 30, 30};
  const std::vector<ImageEval> ims{{{det(a, 0.9), det(b, 0.1)}, {gt(a), gt(b)}}};
  const MetricSet m = compute_metrics(ims, 0.25, 0.5);
  CHECK(m.counts == Counts{1, 0, 1});
  CHECK(m.recall == 0.5);
  CHECK(m.ap50 == 1.0);
  CHECK(m.detections == m.counts.tp + m.counts.fp);
  CHECK(m.truths == 2);
  CHECK(m.images == 1);
}

TEST_CASE("per-camera report") {
  Rng rng(3);
  const auto images = random_images(rng, 24);
  std::vector<CameraTag> cams;
  for (int i = 0; i < 24; ++i) cams.push_back(kAllCameras[i % 6]);
  EvalOptions o;
  o.per_camera = true;
  const EvalReport rep = evaluate_images(images, cams, o, 0.25);
  REQUIRE(rep.per_camera.size() == 6);
  Counts sum;
  long imgs = 0, truths = 0, dets = 0;
  for (const auto& [tag, m] : rep.per_camera) {
    sum += m.counts;
    imgs += m.images;
    truths += m.truths;
    dets += m.detections;
  }
  CHECK(sum == rep.overall.counts);
  CHECK(imgs == rep.overall.images);
  CHECK(truths == rep.overall.truths);
  CHECK(dets == rep.overall.detections);

  const auto j = to_json(rep);
  std::vector<std::string> tags;
  for (const auto& [k, v] : j.at("per_camera").items()) tags.push_back(k);
  CHECK(tags == std::vector<std::string>{"IC", "IP", "IW", "OC", "OE", "OP"});
  for (const char* k : {"precision", "recall", "f1", "ap50", "map50_95"}) CHECK(j.at("overall").contains(k));
  CHECK(j.at("counts").at("images") == 24);
  CHECK(j.at("pr_curves").contains("overall"));

  CHECK_THROWS_WITH_AS(evaluate_images({}, {}, o, 0.25), "empty split", Error);
}

TEST_CASE("PR CSV and SVG") {
  const fs::path dir = fs::temp_directory_path() / "cowdet_test_eval_pr";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(4);
  std::map<std::string, PRCurve> curves;
  curves["overall"] = pr_curve(random_images(rng, 6), 0.5);
  curves["IW"] = pr_curve(random_images(rng, 3), 0.5);
  emit_pr(curves, dir / "pr.csv", dir / "pr.svg");
  const auto back = read_pr_csv(dir / "pr.csv");
  REQUIRE(back.size() == 2);
  for (const auto& [label, c] : curves) {
    REQUIRE(back.at(label).points.size() == c.points.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      CHECK(std::abs(back.at(label).points[i].recall - c.points[i].recall) <= 1e-6);
      CHECK(std::abs(back.at(label).points[i].precision - c.points[i].precision) <= 1e-6);
    }
  }
  std::ifstream in(dir / "pr.svg");
  const std::string svg((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(svg.find("<svg") == 0);
  CHECK(std::count(svg.begin(), svg.end(), 'p') > 0);
  std::size_t polylines = 0;
  for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
  CHECK(polylines == 2);
  CHECK(svg.find(">recall<") != std::string::npos);

  std::ofstream(dir / "bad.csv") << "label,recall,precision\noverall,0.5\n";
  CHECK_THROWS_AS(read_pr_csv(dir / "bad.csv"), Error);
  CHECK_THROWS_AS(emit_pr(curves, dir / "missing" / "x.csv", dir / "x.svg"), Error);
}

TEST_CASE("curves survive the report JSON") {
  Rng rng(5);
  EvalReport rep;
  rep.curves["overall"] = pr_curve(random_images(rng, 4), 0.5);
  const auto back = curves_from_report(to_json(rep));
  REQUIRE(back.count("overall"));
  CHECK(back.at("overall").points.size() == rep.curves["overall"].points.size());
  CHECK_THROWS_AS(curves_from_report(nlohmann::json::object()), Error);
}
