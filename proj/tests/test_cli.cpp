#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "cowdet/dataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI inside dir, stdout and stderr merged.
Run cli(const fs::path& dir, const std::string& args) {
  const fs::path log = dir / "cli_output.txt";
  const std::string cmd = "cd '" + dir.string() + "' && '" COWDET_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cowdet_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("usage errors exit with 1") {
  const fs::path d = scratch("usage");
  REQUIRE(cli(d, "gen-synthetic --n 4 --out data").code == 0);
  const Run r = cli(d, "split --manifest data/manifest.json --ratios 0.5,0.3,0.1");
  CHECK(r.code == 1);
  CHECK(contains(r.out, "sum to 1"));
  CHECK(cli(d, "split --manifest data/manifest.json --ratios 0.5,abc").code == 1);
  CHECK(cli(d, "no-such-command").code == 1);
  CHECK(cli(d, "train --optimizer rmsprop").code == 1);
  CHECK(cli(d, "gen-synthetic --n 0 --out x").code == 1);
}

TEST_CASE("runtime errors exit with 2") {
  const fs::path d = scratch("runtime");
  REQUIRE(cli(d, "gen-synthetic --n 4 --out data").code == 0);
  const Run r = cli(d, "eval --manifest data/manifest.json --ckpt missing.ckpt");
  CHECK(r.code == 2);
  CHECK(contains(r.out, "error: not a checkpoint"));
  std::ofstream(d / "junk.ckpt") << "garbage";
  CHECK(cli(d, "eval --manifest data/manifest.json --ckpt junk.ckpt").code == 2);
  CHECK(cli(d, "split --manifest nowhere.json").code == 2);
}

TEST_CASE("end-to-end walkthrough") {
  const fs::path d = scratch("walk");
  REQUIRE(cli(d, "gen-synthetic --n 12 --seed 5 --out data").code == 0);
  REQUIRE(cli(d, "split --manifest data/manifest.json --seed 2").code == 0);
  const auto m = cowdet::load_manifest(d / "data/manifest.json");
  CHECK(m.images.size() == 12);

  Run r = cli(d, "augment --manifest data/manifest.json --copies 1");
  REQUIRE(r.code == 0);
  CHECK(cowdet::load_manifest(d / "data/manifest.json").images.size() > 12);
  r = cli(d, "augment --manifest data/manifest.json --copies 1");
  CHECK(r.code == 2);
  CHECK(contains(r.out, "--force"));
  CHECK(cli(d, "augment --manifest data/manifest.json --copies 1 --force").code == 0);

  REQUIRE(cli(d, "train --manifest data/manifest.json --epochs 2 --out m.ckpt").code == 0);
  CHECK(fs::exists(d / "m.ckpt.log.json"));
  const auto log = json::parse(slurp(d / "m.ckpt.log.json"));
  CHECK(log.at("epochs").size() == 2);
  // A rerun must not clobber the checkpoint without --force.
  CHECK(cli(d, "train --manifest data/manifest.json --epochs 2 --out m.ckpt").code == 2);
  REQUIRE(cli(d, "train --manifest data/manifest.json --epochs 2 --out m2.ckpt --workers 3").code == 0);
  CHECK(slurp(d / "m.ckpt") == slurp(d / "m2.ckpt"));

  REQUIRE(cli(d, "eval --manifest data/manifest.json --ckpt m.ckpt --split train --per-camera --report r.json").code == 0);
  const auto rep = json::parse(slurp(d / "r.json"));
  REQUIRE(rep.contains("per_camera"));
  CHECK(rep["per_camera"].size() == 6);
  long images = 0, gts = 0, tp = 0, fp = 0;
  for (const auto& [tag, v] : rep["per_camera"].items()) {
    images += v["counts"]["images"].get<long>();
    gts += v["counts"]["gts"].get<long>();
    tp += v["counts"]["tp"].get<long>();
    fp += v["counts"]["fp"].get<long>();
  }
  CHECK(images == rep["counts"]["images"].get<long>());
  CHECK(gts == rep["counts"]["gts"].get<long>());
  CHECK(tp == rep["counts"]["tp"].get<long>());
  CHECK(fp == rep["counts"]["fp"].get<long>());

  const std::string img = m.images.front().path;
  REQUIRE(cli(d, "predict --ckpt m.ckpt --image 'data/" + img + "' --out-labels p.txt --conf 0.2").code == 0);
  CHECK_NOTHROW(cowdet::parse_label_file(d / "p.txt", true));

  fs::create_directories(d / "imgs");
  for (int i = 0; i < 3; ++i) fs::copy_file(d / "data" / m.images[i].path, d / "imgs" / fs::path(m.images[i].path).filename());
  REQUIRE(cli(d, "annotate --ckpt m.ckpt --images imgs --conf 0.2 --out cand").code == 0);
  CHECK(cli(d, "annotate --ckpt m.ckpt --images imgs --conf 1.5 --out cand2").code != 0);
  fs::create_directories(d / "corr");
  const std::string first = fs::path(m.images[0].path).stem().string() + ".txt";
  std::ofstream(d / "corr" / first) << "0 0.500000 0.500000 0.250000 0.250000\n";
  REQUIRE(cli(d, "merge-labels --candidates cand --corrections corr --out final").code == 0);
  CHECK(slurp(d / "final" / first) == "0 0.500000 0.500000 0.250000 0.250000\n");
  for (const auto& e : fs::directory_iterator(d / "final"))
    CHECK_NOTHROW(cowdet::parse_label_file(e.path(), false));

  REQUIRE(cli(d, "plot-pr --report r.json --csv pr.csv --svg pr.svg").code == 0);
  CHECK(slurp(d / "pr.csv").rfind("label,recall,precision", 0) == 0);
  CHECK(contains(slurp(d / "pr.svg"), "<svg"));
  CHECK(cli(d, "plot-pr --report r.json --csv pr.csv --svg pr.svg").code == 2);
  CHECK(cli(d, "plot-pr --report r.json --csv pr.csv --svg pr.svg --force").code == 0);
}

TEST_CASE("reruns are byte-identical") {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  for (const fs::path& d : {a, b}) {
    REQUIRE(cli(d, "gen-synthetic --n 6 --seed 9 --out data").code == 0);
    REQUIRE(cli(d, "split --manifest data/manifest.json --ratios 1,0,0").code == 0);
    REQUIRE(cli(d, "train --manifest data/manifest.json --epochs 1 --batch 3 --seed 4 --out m.ckpt").code == 0);
  }
  CHECK(slurp(a / "data/manifest.json") == slurp(b / "data/manifest.json"));
  CHECK(slurp(a / "m.ckpt") == slurp(b / "m.ckpt"));
  CHECK(slurp(a / "m.ckpt.log.json") == slurp(b / "m.ckpt.log.json"));
}
