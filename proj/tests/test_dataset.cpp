#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cowdet/dataset.hpp"
#include "cowdet/error.hpp"
#include "cowdet/image.hpp"
#include "cowdet/rng.hpp"

using namespace cowdet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cowdet_test_dataset_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Manifest make_manifest(int n) {
  Manifest m;
  for (int i = 0; i < n; ++i) {
    ImageRecord r;
    r.id = "img" + std::to_string(i);
    r.path = "images/" + r.id + ".png";
    r.camera = kAllCameras[i % 6];
    r.width = 64;
    r.height = 48;
    m.images.push_back(r);
  }
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<Split, int> sizes(const Manifest& m) {
  std::map<Split, int> s;
  for (const auto& r : m.images) ++s[r.split];
  return s;
}

}  // namespace

TEST_CASE("camera tags") {
  for (CameraTag t : kAllCameras) CHECK(parse_camera(to_string(t)) == t);
  CHECK(environment(CameraTag::IW) == Environment::indoor);
  CHECK(environment(CameraTag::IC) == Environment::indoor);
  CHECK(environment(CameraTag::OP) == Environment::outdoor);
  CHECK(environment(CameraTag::OC) == Environment::outdoor);
  CHECK_THROWS_WITH_AS(parse_camera("XX"), doctest::Contains("XX"), Error);
}

TEST_CASE("manifest round-trip and validation") {
  const fs::path dir = scratch("manifest");
  Manifest m = make_manifest(5);
  m.images[2].split = Split::val;
  save_manifest(m, dir / "manifest.json");
  CHECK(load_manifest(dir / "manifest.json") == m);

  SUBCASE("duplicate id") {
    Manifest d = m;
    d.images[3].id = d.images[1].id;
    CHECK_THROWS_WITH_AS(manifest_from_json(manifest_to_json(d)), doctest::Contains("duplicate image id"), Error);
  }
  SUBCASE("unknown camera names the tag") {
    auto j = nlohmann::json::parse(manifest_to_json(m));
    j["images"][0]["camera"] = "XX";
    CHECK_THROWS_WITH_AS(manifest_from_json(j.dump()), doctest::Contains("\"XX\""), Error);
  }
  SUBCASE("unknown fields are rejected") {
    auto j = nlohmann::json::parse(manifest_to_json(m));
    j["images"][1]["colour"] = "red";
    CHECK_THROWS_WITH_AS(manifest_from_json(j.dump()), doctest::Contains("colour"), Error);
    auto k = nlohmann::json::parse(manifest_to_json(m));
    k["extra"] = 1;
    CHECK_THROWS_AS(manifest_from_json(k.dump()), Error);
  }
  SUBCASE("malformed document and missing fields carry context") {
    CHECK_THROWS_WITH_AS(manifest_from_json("{\"version\": 1, \"images\": [}"), doctest::Contains("malformed"), Error);
    auto j = nlohmann::json::parse(manifest_to_json(m));
    j["images"][4].erase("width");
    CHECK_THROWS_WITH_AS(manifest_from_json(j.dump()), doctest::Contains("images[4]"), Error);
  }
  SUBCASE("paths resolve against the manifest directory") {
    CHECK(image_path(dir / "manifest.json", m.images[0]) == dir / "images/img0.png");
    CHECK(label_path(dir / "manifest.json", "img0") == dir / "labels/img0.txt");
  }
}

TEST_CASE("label parsing") {
  const auto ls = parse_label_text("0 0.500000 0.500000 0.200000 0.400000\n", false);
  REQUIRE(ls.boxes.size() == 1);
  CHECK(ls.boxes[0].category_id == 0);
  CHECK(ls.boxes[0].box == canonical(NormBox{0.5, 0.5, 0.2, 0.4}));
  CHECK(std::abs(ls.boxes[0].box.w - 0.2) < 1e-9);
  CHECK_FALSE(ls.boxes[0].confidence);
  CHECK(parse_label_text("", false).boxes.empty());
  CHECK(parse_label_text("\n  \n", false).boxes.empty());
  CHECK_THROWS_WITH_AS(parse_label_text("0 1.5 0.5 0.2 0.4", false), "coordinate out of range, line 1", Error);
  CHECK_THROWS_WITH_AS(parse_label_text("0 0.5 0.5 0.2 0.2\n0 0.5 0.5 0.2\n", false),
                       doctest::Contains("line 2"), Error);
  CHECK_THROWS_AS(parse_label_text("0 0.5 0.5 0.2 0.2", true), Error);
  const auto cand = parse_label_text("0 0.5 0.5 0.2 0.2 0.75\n", true);
  REQUIRE(cand.boxes[0].confidence);
  CHECK(*cand.boxes[0].confidence == 0.75);
  CHECK_THROWS_AS(parse_label_text("0 0.5 0.5 0.2 0.2 1.5\n", true), Error);
}

TEST_CASE("label write/parse round-trip within 5e-7") {
  const fs::path dir = scratch("labels");
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    LabelSet ls;
    ls.image_id = "x";
    const int n = static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) {
      const double w = rng.uniform(0.01, 0.9), h = rng.uniform(0.01, 0.9);
      ls.boxes.push_back({0, {rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2), w, h}, rng.uniform()});
    }
    write_label_file(ls, dir / "x.txt", true);
    const auto back = parse_label_file(dir / "x.txt", true);
    REQUIRE(back.boxes.size() == ls.boxes.size());
    for (std::size_t i = 0; i < ls.boxes.size(); ++i) {
      CHECK(std::abs(back.boxes[i].box.cx - ls.boxes[i].box.cx) <= 5e-7);
      CHECK(std::abs(back.boxes[i].box.cy - ls.boxes[i].box.cy) <= 5e-7);
      CHECK(std::abs(back.boxes[i].box.w - ls.boxes[i].box.w) <= 5e-7);
      CHECK(std::abs(back.boxes[i].box.h - ls.boxes[i].box.h) <= 5e-7);
      CHECK(std::abs(*back.boxes[i].confidence - *ls.boxes[i].confidence) <= 5e-7);
    }
    CHECK(format_labels(back, true) == slurp(dir / "x.txt"));
  }
}

TEST_CASE("split sizes") {
  CHECK(sizes(split(make_manifest(10), {}, 1)) == std::map<Split, int>{{Split::train, 7}, {Split::val, 2}, {Split::test, 1}});
  CHECK(sizes(split(make_manifest(1115), {}, 1)) ==
        std::map<Split, int>{{Split::train, 781}, {Split::val, 223}, {Split::test, 111}});
  CHECK_THROWS_WITH_AS(split(make_manifest(2), {}, 1), "dataset too small to split", Error);
  CHECK_THROWS_AS(split(make_manifest(10), {0.5, 0.2, 0.2}, 1), Error);
}

TEST_CASE("split is a seeded partition") {
  Rng rng(8);
  for (int t = 0; t < 30; ++t) {
    const int n = 3 + static_cast<int>(rng.below(300));
    const double a = rng.uniform(0.3, 0.8), b = rng.uniform(0.05, 1 - a - 0.05);
    const SplitRatios r{a, b, 1 - a - b};
    const Manifest m = make_manifest(n);
    const Manifest s = split(m, r, 5);
    const auto sz = sizes(s);
    const int nv = static_cast<int>(std::floor(n * r.val + 1e-9)), nt = static_cast<int>(std::floor(n * r.test + 1e-9));
    CHECK(sz.count(Split::unassigned) == 0);
    CHECK(sz.at(Split::train) == n - nv - nt);
    CHECK((nv == 0 ? sz.count(Split::val) == 0 : sz.at(Split::val) == nv));
    CHECK((nt == 0 ? sz.count(Split::test) == 0 : sz.at(Split::test) == nt));
    for (std::size_t i = 0; i < m.images.size(); ++i) CHECK(s.images[i].id == m.images[i].id);
    CHECK(split(m, r, 5) == s);
  }
  const Manifest m = make_manifest(40);
  CHECK(split(m, {}, 1) != split(m, {}, 2));
}

TEST_CASE("round-robin cameras all reach train for n >= 60") {
  const Manifest s = split(make_manifest(60), {}, 3);
  std::map<CameraTag, int> train;
  for (const auto& r : s.images)
    if (r.split == Split::train) ++train[r.camera];
  CHECK(train.size() == 6);
}

TEST_CASE("synthetic generator contract") {
  const fs::path a = scratch("syn_a"), b = scratch("syn_b");
  SyntheticOptions o;
  o.count = 4;
  o.seed = 1;
  const fs::path ma = gen_synthetic(o, a);
  const Manifest m = load_manifest(ma);
  REQUIRE(m.images.size() == 4);
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    const auto& r = m.images[i];
    CHECK(r.camera == kAllCameras[i % 6]);
    CHECK(fs::exists(image_path(ma, r)));
    const auto ls = parse_label_file(label_path(ma, r.id), false);
    CHECK(ls.boxes.size() >= 1);
    CHECK(ls.boxes.size() <= 5);
    const Image img = load_png(image_path(ma, r));
    CHECK(img.width() == 128);
    CHECK(img.height() == 128);
  }

  gen_synthetic(o, b);
  for (const auto& r : m.images) {
    CHECK(slurp(a / r.path) == slurp(b / r.path));
    CHECK(slurp(label_path(ma, r.id)) == slurp(label_path(b / "manifest.json", r.id)));
  }
  CHECK(slurp(ma) == slurp(b / "manifest.json"));

  SUBCASE("clutter 0 draws no distractors") {
    const fs::path c = scratch("syn_c");
    SyntheticOptions clean = o;
    clean.clutter = 0;
    clean.count = 6;
    const fs::path mc = gen_synthetic(clean, c);
    for (const auto& r : load_manifest(mc).images) {
      const auto prov = nlohmann::json::parse(slurp(c / "images" / (r.id + ".prov.json")));
      for (const auto& p : prov.at("primitives")) CHECK(p.at("kind").get<std::string>() == "animal");
    }
  }
  SUBCASE("clutter adds distractors") {
    const fs::path c = scratch("syn_d");
    SyntheticOptions busy = o;
    busy.clutter = 1;
    busy.count = 6;
    const fs::path mc = gen_synthetic(busy, c);
    int distractors = 0;
    for (const auto& r : load_manifest(mc).images) {
      const auto prov = nlohmann::json::parse(slurp(c / "images" / (r.id + ".prov.json")));
      for (const auto& p : prov.at("primitives")) distractors += p.at("kind").get<std::string>() != "animal";
    }
    CHECK(distractors > 0);
  }
}

TEST_CASE("png round-trip quantizes to 8 bits") {
  const fs::path dir = scratch("png");
  Image img = make_image(7, 5);
  Rng rng(2);
  for (auto& v : img.values()) v = static_cast<float>(rng.uniform());
  save_png(img, dir / "x.png");
  const Image back = load_png(dir / "x.png");
  REQUIRE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back.data()[i] - img.data()[i]) <= 0.5f / 255 + 1e-6f);
  CHECK_THROWS_AS(load_png(dir / "missing.png"), Error);
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS_AS(load_png(dir / "junk.png"), Error);
}
