#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cowdet/error.hpp"
#include "cowdet/geometry.hpp"
#include "cowdet/rng.hpp"
#include "oracles.hpp"

using namespace cowdet;

using namespace cowdet::oracles;

TEST_CASE("iou examples") {
  CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7).epsilon(1e-12));
  CHECK(iou({0, 0, 1, 1}, {1, 0, 2, 1}) == 0.0);
  CHECK_THROWS_WITH_AS(iou({0, 0, 0, 1}, {0, 0, 1, 1}), "degenerate box", Error);
}

TEST_CASE("iou agrees with rasterization") {
  CHECK(std::abs(iou({0, 0, 2, 2}, {1, 1, 3, 3}) - raster_iou({0, 0, 2, 2}, {1, 1, 3, 3}, 0, 3, 1200)) < 1e-3);
  Rng rng(7);
  for (int t = 0; t < 40; ++t) {
    AbsBox a = random_box(rng), b = random_box(rng);
    a.x1 += 10;
    a.y1 += 10;
    b.x1 += 10;
    b.y1 += 10;
    CHECK(std::abs(iou(a, b) - raster_iou(a, b, 0, 150, 3000)) < 2e-3);
  }
}

TEST_CASE("iou properties") {
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    const AbsBox a = random_box(rng), b = random_box(rng);
    const double v = iou(a, b);
    CHECK(v >= 0);
    CHECK(v <= 1);
    CHECK(v == iou(b, a));
    CHECK(iou(a, a) == 1.0);
    const double dx = rng.uniform(-50, 50), dy = rng.uniform(-50, 50);
    const AbsBox at{a.x0 + dx, a.y0 + dy, a.x1 + dx, a.y1 + dy}, bt{b.x0 + dx, b.y0 + dy, b.x1 + dx, b.y1 + dy};
    CHECK(std::abs(iou(at, bt) - v) < 1e-12);
  }
}

TEST_CASE("nms examples") {
  const Detection a{{0, 0, 10, 10}, 0.9, 0}, b{{0, 0, 10, 10}, 0.8, 0}, c{{20, 20, 30, 30}, 0.8, 0};
  CHECK(nms({a}, 0.5) == std::vector<Detection>{a});
  CHECK(nms({b, a}, 0.5) == std::vector<Detection>{a});
  CHECK(nms({a, c}, 0.5) == std::vector<Detection>{a, c});
  CHECK(nms({}, 0.5).empty());
  Detection other = b;
  other.category_id = 1;
  CHECK(nms({a, other}, 0.5).size() == 2);
}

TEST_CASE("nms tie-break: smaller area, then input order") {
  const Detection big{{0, 0, 10, 10}, 0.5, 0}, small{{0, 0, 9, 9}, 0.5, 0};
  CHECK(nms({big, small}, 0.5) == std::vector<Detection>{small});
  const Detection twin{{0, 0, 9, 9}, 0.5, 0};
  const auto order = nms_order({small, twin});
  CHECK(order == std::vector<std::size_t>{0, 1});
}

TEST_CASE("nms matches the brute-force oracle") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + static_cast<int>(rng.below(50));
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i) {
      // Coarse scores force ties; two categories exercise category awareness.
      dets.push_back({random_box(rng, 60), std::round(rng.uniform() * 8) / 8, static_cast<int>(rng.below(2))});
    }
    const double thresh = rng.uniform(0.1, 1.0);
    const auto kept = nms(dets, thresh);
    CHECK(kept == brute_nms(dets, thresh));
    for (const auto& k : kept) CHECK(std::find(dets.begin(), dets.end(), k) != dets.end());
    for (std::size_t i = 1; i < kept.size(); ++i) CHECK(kept[i - 1].score >= kept[i].score);
    // Every suppressed box overlaps some kept, at-least-as-high-scoring box.
    for (const auto& d : dets) {
      if (std::find(kept.begin(), kept.end(), d) != kept.end()) continue;
      bool covered = false;
      for (const auto& k : kept)
        covered |= k.category_id == d.category_id && k.score >= d.score && iou(k.box, d.box) >= thresh;
      CHECK(covered);
    }
  }
}

TEST_CASE("norm and abs conversion") {
  CHECK(norm_to_abs({0.5, 0.5, 1, 1}, 640, 640) == AbsBox{0, 0, 640, 640});
  CHECK(abs_to_norm({160, 160, 480, 480}, 640, 640) == NormBox{0.5, 0.5, 0.5, 0.5});
  CHECK_THROWS_WITH_AS(norm_to_abs({0.5, 0.5, 0, 0.2}, 10, 10), "degenerate box", Error);
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const double w = rng.uniform(0.01, 1), h = rng.uniform(0.01, 1);
    const NormBox nb{rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2), w, h};
    const double W = rng.uniform(10, 2000), H = rng.uniform(10, 2000);
    const NormBox back = abs_to_norm(norm_to_abs(nb, W, H), W, H);
    CHECK(std::abs(back.cx - nb.cx) < 1e-9);
    CHECK(std::abs(back.cy - nb.cy) < 1e-9);
    CHECK(std::abs(back.w - nb.w) < 1e-9);
    CHECK(std::abs(back.h - nb.h) < 1e-9);
  }
}

TEST_CASE("clip_box") {
  const NormBox inside{0.5, 0.5, 0.2, 0.2};
  CHECK(clip_box(inside) == inside);
  const auto half = clip_box({1.0, 0.5, 0.2, 0.2});
  REQUIRE(half);
  CHECK(half->w == doctest::Approx(0.1));
  CHECK(half->cx == doctest::Approx(0.95));
  CHECK(half->h == doctest::Approx(0.2));
  // 90% of the area outside the frame.
  CHECK_FALSE(clip_box({1.08, 0.5, 0.2, 0.2}));
  CHECK_FALSE(clip_box({2.0, 2.0, 0.2, 0.2}));
  // A corner box keeping more than a quarter survives.
  CHECK(clip_box({0.98, 0.98, 0.3, 0.3}));
  CHECK_FALSE(clip_box({1.0, 1.02, 0.3, 0.3}));
}

TEST_CASE("canonical grid makes mirroring an exact involution") {
  Rng rng(9);
  for (int t = 0; t < 10000; ++t) {
    const double v = canonical(rng.uniform());
    CHECK(canonical(v) == v);
    CHECK(1.0 - (1.0 - v) == v);
  }
}
