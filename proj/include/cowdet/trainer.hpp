#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cowdet/augment.hpp"
#include "cowdet/detector.hpp"
#include "cowdet/optim.hpp"

namespace cowdet {

struct TrainOptions {
  OptimizerSettings optimizer;
  int epochs = 250;
  int batch_size = 16;
  std::uint64_t seed = 1;
  int workers = 1;
  double lr0 = 0.01;
  double lrf = 0.001;
  /// Starting point instead of init_weights(cfg, seed).
  std::optional<WeightSet<float>> initial_weights;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0, loss_obj = 0, loss_box = 0, loss_cls = 0;
  double lr = 0;  // learning rate of the epoch's last iteration
};

struct TrainResult {
  WeightSet<float> weights;
  std::vector<EpochLog> epochs;
  std::vector<double> iteration_loss;
};

/// Samples must already be at the config's input size.
TrainResult train(const std::vector<Annotated>& samples, const DetectorConfig& cfg, const TrainOptions& opts);

/// Loads every train-split image of the manifest and trains on it.
TrainResult train(const std::filesystem::path& manifest_path, const DetectorConfig& cfg, const TrainOptions& opts);

/// Images of one split, resized to `input_size`, with their labels.
std::vector<Annotated> load_split(const std::filesystem::path& manifest_path, Split split, int input_size,
                                  int workers = 1);

/// `{"epochs":[{"epoch","loss","loss_obj","loss_box","loss_cls","lr"}]}`
std::string training_log_json(const TrainResult& r);

}  // namespace cowdet
