#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cowdet/augment.hpp"
#include "cowdet/error.hpp"

using namespace cowdet;
namespace fs = std::filesystem;

namespace {

Image pattern(int w, int h, std::uint64_t seed) {
  Image img = make_image(w, h);
  Rng rng(seed);
  for (auto& v : img.values()) v = static_cast<float>(rng.uniform());
  return img;
}

LabeledBox lb(double cx, double cy, double w, double h) { return {0, canonical(NormBox{cx, cy, w, h}), std::nullopt}; }

bool in_unit_range(const Image& img) {
  for (float v : img.values())
    if (!(v >= 0.0f && v <= 1.0f)) return false;
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cowdet_test_augment_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("hflip") {
  const Annotated in{pattern(9, 6, 1), {lb(0.3, 0.4, 0.2, 0.1), lb(0.5, 0.5, 0.3, 0.3)}};
  const Annotated out = hflip(in);
  CHECK(std::abs(out.boxes[0].box.cx - 0.7) < 1e-9);
  CHECK(out.boxes[0].box.cy == in.boxes[0].box.cy);
  CHECK(out.boxes[0].box.w == in.boxes[0].box.w);
  CHECK(out.boxes[0].box.h == in.boxes[0].box.h);
  CHECK(out.boxes[1] == in.boxes[1]);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 9; ++x) CHECK(out.image(c, y, x) == in.image(c, y, 8 - x));
  const Annotated twice = hflip(out);
  CHECK(twice.image == in.image);
  CHECK(twice.boxes == in.boxes);
}

TEST_CASE("hflip twice is bit-exact for arbitrary parsed labels") {
  Rng rng(12);
  for (int t = 0; t < 2000; ++t) {
    const double w = rng.uniform(0.01, 0.5), h = rng.uniform(0.01, 0.5);
    const Annotated in{make_image(4, 4), {lb(rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2), w, h)}};
    CHECK(hflip(hflip(in)).boxes == in.boxes);
  }
}

TEST_CASE("rotate") {
  const Annotated in{pattern(32, 32, 2), {lb(0.5, 0.5, 0.2, 0.4), lb(0.3, 0.7, 0.1, 0.1)}};
  SUBCASE("angle 0 is the identity") {
    const Annotated out = rotate(in, 0);
    CHECK(out.image == in.image);
    CHECK(out.boxes == in.boxes);
  }
  SUBCASE("angle 90 swaps box extents") {
    const Annotated out = rotate(in, 90);
    const NormBox b = out.boxes[0].box;
    CHECK(b.cx == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(b.cy == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(b.w == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(b.h == doctest::Approx(0.2).epsilon(1e-9));
  }
  SUBCASE("counter-clockwise: a point right of center moves up") {
    Image img = make_image(33, 33, 0.0f);
    for (int c = 0; c < 3; ++c) img(c, 16, 28) = 1.0f;
    const Annotated out = rotate({img, {}}, 90);
    CHECK(out.image(0, 4, 16) == doctest::Approx(1.0f).epsilon(1e-5));
  }
  SUBCASE("pixels stay in range") { CHECK(in_unit_range(rotate(in, 17).image)); }
}

TEST_CASE("rotated hull never shrinks the box") {
  Rng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const double w = rng.uniform(0.02, 0.6), h = rng.uniform(0.02, 0.6);
    const NormBox b{rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2), w, h};
    const AbsBox hull = rotated_hull(b, 15, 100, 80);
    CHECK(hull.area() >= b.w * 100 * b.h * 80 * (1 - 1e-12));
  }
}

TEST_CASE("crop") {
  const Annotated in{pattern(40, 20, 3), {lb(0.2, 0.5, 0.2, 0.4), lb(0.8, 0.5, 0.1, 0.2)}};
  SUBCASE("full-frame crop keeps boxes") {
    const Annotated out = crop(in, {0, 0, 40, 20});
    REQUIRE(out.boxes.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::abs(out.boxes[i].box.cx - in.boxes[i].box.cx) < 1e-9);
      CHECK(std::abs(out.boxes[i].box.w - in.boxes[i].box.w) < 1e-9);
    }
    for (std::size_t i = 0; i < in.image.size(); ++i)
      CHECK(out.image.data()[i] == doctest::Approx(in.image.data()[i]).epsilon(1e-6));
  }
  SUBCASE("left half doubles x extents; outside box is dropped") {
    const Annotated out = crop(in, {0, 0, 20, 20});
    REQUIRE(out.boxes.size() == 1);
    CHECK(std::abs(out.boxes[0].box.cx - 0.4) < 1e-9);
    CHECK(std::abs(out.boxes[0].box.w - 0.4) < 1e-9);
    CHECK(std::abs(out.boxes[0].box.cy - 0.5) < 1e-9);
    CHECK(std::abs(out.boxes[0].box.h - 0.4) < 1e-9);
    CHECK(out.image.width() == 40);
    CHECK(out.image.height() == 20);
  }
  SUBCASE("scale 1 samples the full frame") {
    Rng rng(1);
    const Annotated out = random_crop(in, 1.0, 1.0, rng);
    REQUIRE(out.boxes.size() == 2);
    CHECK(std::abs(out.boxes[1].box.cx - in.boxes[1].box.cx) < 1e-9);
  }
}

TEST_CASE("photometric adjustments") {
  const Image img = pattern(8, 8, 5);
  const Image same_b = adjust_brightness(img, 1.0), same_s = adjust_saturation(img, 1.0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    CHECK(std::abs(same_b.data()[i] - img.data()[i]) <= 1e-7);
    CHECK(std::abs(same_s.data()[i] - img.data()[i]) <= 1e-7);
  }
  const Image black = adjust_brightness(img, 0.0);
  for (float v : black.values()) CHECK(v == 0.0f);
  const Image grey = adjust_saturation(img, 0.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      CHECK(std::abs(grey(0, y, x) - grey(1, y, x)) <= 1e-6);
      CHECK(std::abs(grey(1, y, x) - grey(2, y, x)) <= 1e-6);
      const double luma = 0.299 * img(0, y, x) + 0.587 * img(1, y, x) + 0.114 * img(2, y, x);
      CHECK(std::abs(grey(0, y, x) - luma) <= 1e-6);
    }
  CHECK(in_unit_range(adjust_brightness(img, 3.0)));
  CHECK(in_unit_range(adjust_saturation(img, 3.0)));
}

TEST_CASE("random transforms always emit valid boxes and pixels") {
  AugmentSpec spec;
  spec.rotation_range = 45;
  spec.crop_lo = 0.3;
  Rng rng(21);
  int emitted = 0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<LabeledBox> boxes;
    const int n = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
      const double w = rng.uniform(0.02, 0.9), h = rng.uniform(0.02, 0.9);
      boxes.push_back(lb(rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2), w, h));
    }
    const Annotated in{make_image(8, 6, 0.5f), boxes};
    Rng local(derive_seed(99, "t", t));
    const Annotated out = augment_sample(in, spec, local);
    for (const auto& b : out.boxes) {
      CHECK(is_valid(b.box));
      ++emitted;
    }
    if (t % 500 == 0) CHECK(in_unit_range(out.image));
  }
  CHECK(emitted > 10000);
}

TEST_CASE("AugmentSpec validation") {
  AugmentSpec s;
  CHECK_NOTHROW(validate(s));
  s.rotation_range = 50;
  CHECK_THROWS_AS(validate(s), Error);
  s = {};
  s.crop_lo = 0;
  CHECK_THROWS_AS(validate(s), Error);
  s = {};
  s.brightness_lo = -1;
  CHECK_THROWS_AS(validate(s), Error);
}

TEST_CASE("augment_dataset") {
  const fs::path a = scratch("a"), b = scratch("b");
  SyntheticOptions so;
  so.count = 10;
  so.size = 64;
  for (const fs::path& dir : {a, b}) {
    const fs::path mp = gen_synthetic(so, dir);
    save_manifest(split(load_manifest(mp), {}, 1), mp);
  }
  const Manifest before = load_manifest(a / "manifest.json");
  std::map<Split, int> n0;
  for (const auto& r : before.images) ++n0[r.split];

  AugmentSpec spec;
  spec.seed = 3;
  const Manifest ma = augment_dataset(a / "manifest.json", spec, 1);
  const Manifest mb = augment_dataset(b / "manifest.json", spec, 3);
  std::map<Split, int> n1;
  for (const auto& r : ma.images) ++n1[r.split];
  CHECK(n1[Split::train] == 3 * n0[Split::train]);
  CHECK(n1[Split::val] == n0[Split::val]);
  CHECK(n1[Split::test] == n0[Split::test]);
  CHECK(ma == mb);
  for (const auto& r : ma.images) {
    if (!is_augmented_id(r.id)) continue;
    CHECK(r.split == Split::train);
    CHECK(slurp(image_path(a / "manifest.json", r)) == slurp(image_path(b / "manifest.json", r)));
    CHECK(slurp(label_path(a / "manifest.json", r.id)) == slurp(label_path(b / "manifest.json", r.id)));
  }
  // Originals are retained untouched, each followed by its variants.
  for (const auto& r : before.images) {
    CHECK(std::find(ma.images.begin(), ma.images.end(), r) != ma.images.end());
  }
  save_manifest(ma, a / "manifest.json");
  CHECK_THROWS_AS(augment_dataset(a / "manifest.json", spec, 1), Error);
  CHECK(augment_dataset(a / "manifest.json", spec, 1, true) == ma);

  spec.copies_per_image = 0;
  CHECK(augment_dataset(a / "manifest.json", spec, 1, true) == before);
}
