#include "cowdet/run_config.hpp"

#include <fstream>

#include "cowdet/error.hpp"

namespace cowdet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw Error(where + " must be an object");
}

std::pair<double, double> range_from(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) throw Error(where + " must be [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

OptimizerSettings optimizer_from_json(const json& j) {
  OptimizerSettings s;
  if (j.is_string()) {
    s.kind = parse_optimizer(j.get<std::string>());
    return s;
  }
  require_object(j, "optimizer");
  for (const auto& [key, v] : j.items()) {
    if (key == "kind") s.kind = parse_optimizer(v.get<std::string>());
    else if (key == "momentum") s.momentum = v.get<double>();
    else if (key == "weight_decay") s.weight_decay = v.get<double>();
    else if (key == "beta1") s.beta1 = v.get<double>();
    else if (key == "beta2") s.beta2 = v.get<double>();
    else if (key == "eps") s.eps = v.get<double>();
    else throw Error("optimizer: unknown key \"" + key + "\"");
  }
  return s;
}

json to_json(const OptimizerSettings& s) {
  return json{{"kind", std::string(to_string(s.kind))}, {"momentum", s.momentum}, {"weight_decay", s.weight_decay},
              {"beta1", s.beta1}, {"beta2", s.beta2}, {"eps", s.eps}};
}

}  // namespace

json to_json(const AugmentSpec& a) {
  return json{{"copies_per_image", a.copies_per_image},
              {"rotation_range", a.rotation_range},
              {"crop_range", {a.crop_lo, a.crop_hi}},
              {"saturation_range", {a.saturation_lo, a.saturation_hi}},
              {"brightness_range", {a.brightness_lo, a.brightness_hi}},
              {"seed", a.seed}};
}

AugmentSpec augment_spec_from_json(const json& j) {
  require_object(j, "augment");
  AugmentSpec a;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "copies_per_image") a.copies_per_image = v.get<int>();
      else if (key == "rotation_range") a.rotation_range = v.get<double>();
      else if (key == "crop_range") std::tie(a.crop_lo, a.crop_hi) = range_from(v, "augment.crop_range");
      else if (key == "saturation_range")
        std::tie(a.saturation_lo, a.saturation_hi) = range_from(v, "augment.saturation_range");
      else if (key == "brightness_range")
        std::tie(a.brightness_lo, a.brightness_hi) = range_from(v, "augment.brightness_range");
      else if (key == "seed") a.seed = v.get<std::uint64_t>();
      else throw Error("augment: unknown key \"" + key + "\"");
    }
  } catch (const json::exception& e) {
    throw Error(std::string("augment: ") + e.what());
  }
  validate(a);
  return a;
}

RunConfig run_config_from_json(const json& j) {
  require_object(j, "run config");
  RunConfig rc;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "detector") {
        if (v.is_string()) {
          const auto preset = v.get<std::string>();
          if (preset == "desk") rc.detector = DetectorConfig::desk();
          else if (preset == "default") rc.detector = DetectorConfig{};
          else throw Error("detector: unknown preset \"" + preset + "\"");
        } else {
          rc.detector = detector_config_from_json(v);
        }
      } else if (key == "augment") rc.augment = augment_spec_from_json(v);
      else if (key == "optimizer") rc.train.optimizer = optimizer_from_json(v);
      else if (key == "epochs") rc.train.epochs = v.get<int>();
      else if (key == "seed") rc.train.seed = v.get<std::uint64_t>();
      else if (key == "batch_size") rc.train.batch_size = v.get<int>();
      else if (key == "workers") rc.train.workers = v.get<int>();
      else if (key == "lr0") rc.train.lr0 = v.get<double>();
      else if (key == "lrf") rc.train.lrf = v.get<double>();
      else if (key == "paths") {
        require_object(v, "paths");
        for (const auto& [pk, pv] : v.items()) {
          if (pk == "manifest") rc.manifest = pv.get<std::string>();
          else if (pk == "out") rc.out = pv.get<std::string>();
          else throw Error("paths: unknown key \"" + pk + "\"");
        }
      } else {
        throw Error("run config: unknown key \"" + key + "\"");
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("run config: ") + e.what());
  }
  if (rc.train.epochs < 1) throw Error("epochs must be >= 1");
  if (rc.train.batch_size < 1) throw Error("batch_size must be >= 1");
  if (rc.train.workers < 1) throw Error("workers must be >= 1");
  if (!(rc.train.lr0 > 0) || !(rc.train.lrf > 0)) throw Error("learning rates must be positive");
  return rc;
}

json to_json(const RunConfig& rc) {
  json paths = json::object();
  if (rc.manifest) paths["manifest"] = *rc.manifest;
  if (rc.out) paths["out"] = *rc.out;
  return json{{"detector", to_json(rc.detector)},
              {"augment", to_json(rc.augment)},
              {"optimizer", to_json(rc.train.optimizer)},
              {"epochs", rc.train.epochs},
              {"seed", rc.train.seed},
              {"batch_size", rc.train.batch_size},
              {"workers", rc.train.workers},
              {"lr0", rc.train.lr0},
              {"lrf", rc.train.lrf},
              {"paths", paths}};
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace cowdet
