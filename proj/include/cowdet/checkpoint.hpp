#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cowdet/detector.hpp"

namespace cowdet {

/// Binary layout, little-endian:
///   "CBDT" | u32 version (1) | u64 length + UTF-8 JSON config |
///   u32 tensor count | per tensor: u32 length + UTF-8 name, u32 rank,
///   u32 dims..., f32 data...
/// Tensors are written in name order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  DetectorConfig config;
  WeightSet<float> weights;
};

std::vector<std::uint8_t> encode_checkpoint(const WeightSet<float>& weights, const DetectorConfig& cfg);
/// Validates magic, version, bounds and the config/weight naming contract.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const WeightSet<float>& weights, const DetectorConfig& cfg, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cowdet
