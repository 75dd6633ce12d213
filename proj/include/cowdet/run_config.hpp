#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "cowdet/augment.hpp"
#include "cowdet/detector.hpp"
#include "cowdet/trainer.hpp"

namespace cowdet {

/// Everything a reproducible training run needs.
/// `detector` is either an object or one of the presets "desk" / "default".
struct RunConfig {
  DetectorConfig detector = DetectorConfig::desk();
  AugmentSpec augment;
  TrainOptions train;
  std::optional<std::string> manifest;
  std::optional<std::string> out;
};

/// Strict: unknown keys anywhere are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& rc);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const AugmentSpec& a);
AugmentSpec augment_spec_from_json(const nlohmann::json& j);

}  // namespace cowdet
