#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cowdet/cbam.hpp"
#include "cowdet/dataset.hpp"
#include "cowdet/geometry.hpp"
#include "cowdet/image.hpp"
#include "cowdet/layers.hpp"
#include "cowdet/tensor.hpp"

namespace cowdet {

struct LossWeights {
  double obj = 1.0, box = 5.0, cls = 1.0;
  bool operator==(const LossWeights&) const = default;
};

struct DetectorConfig {
  int input_size = 640;
  std::vector<int> stage_widths{16, 32, 64, 128};  // stem, stride 4, 8, 16
  std::vector<int> head_strides{8, 16};
  int num_categories = 1;
  bool cbam_enabled = true;
  int cbam_reduction = cbam::kDefaultReduction;
  double conf_thresh = 0.25;
  double nms_iou = 0.45;
  LossWeights loss_weights;

  int planes() const { return 1 + num_categories + 4; }
  bool operator==(const DetectorConfig&) const = default;

  /// CPU-sized variant: 128 px input, widths [8, 16, 24, 32].
  static DetectorConfig desk();
};

void validate(const DetectorConfig& cfg);
nlohmann::json to_json(const DetectorConfig& cfg);
/// Strict: unknown keys are rejected, missing keys take defaults.
DetectorConfig detector_config_from_json(const nlohmann::json& j);

/// Every parameter name and shape the config requires, in forward order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> weight_layout(const DetectorConfig& cfg);

/// He-normal conv and MLP kernels, unit scale, zero shift and bias. Each
/// tensor draws from its own stream derived from (seed, name).
WeightSet<float> init_weights(const DetectorConfig& cfg, std::uint64_t seed);

/// Throws Error listing missing/extra names and shape mismatches.
template <typename T>
void check_weights(const WeightSet<T>& w, const DetectorConfig& cfg);

/// Per head: (1 + K + 4, S/stride, S/stride) planes of objectness logit,
/// category logits, and raw edge distances (left, top, right, bottom)
/// before softplus. levels[0] is stride 8, levels[1] stride 16.
template <typename T>
struct RawPredictions {
  std::vector<FeatureMap<T>> levels;
};

/// Edge distance in pixels from a raw prediction.
template <typename T>
T edge_distance(T raw, int stride) {
  return nn::softplus(raw) * static_cast<T>(stride);
}

template <typename T>
struct BlockCache {
  nn::ConvCache<T> conv;
  nn::NormCache<T> norm;
  FeatureMap<T> pre;
};

template <typename T>
struct StageCache {
  BlockCache<T> down, res_a, res_b;
};

template <typename T>
struct ForwardCache {
  BlockCache<T> stem;
  std::array<StageCache<T>, 3> stages;
  cbam::Cache<T> attention;
  int tail_channels = 0;
  BlockCache<T> neck;
  std::array<BlockCache<T>, 2> head_conv;
  std::array<nn::ConvCache<T>, 2> head_out;
};

/// Backbone outputs at strides 8 and 16. `tail` is after CBAM when enabled.
template <typename T>
struct Features {
  FeatureMap<T> stride8;
  FeatureMap<T> tail;
};

/// Residual backbone, optional CBAM at its tail, one top-down fusion and
/// two center-based heads. Holds a reference to the weights.
template <typename T>
class Detector {
 public:
  Detector(const DetectorConfig& cfg, const WeightSet<T>& weights);

  const DetectorConfig& config() const { return cfg_; }

  RawPredictions<T> forward(const FeatureMap<T>& image, ForwardCache<T>* cache = nullptr) const;

  /// Stages of forward(), exposed separately for attention-isolation tests.
  Features<T> backbone(const FeatureMap<T>& image, ForwardCache<T>* cache = nullptr) const;
  RawPredictions<T> heads(const Features<T>& feats, ForwardCache<T>* cache = nullptr) const;

  /// Accumulates parameter gradients into `grads` (same layout as the
  /// weights) and returns the gradient with respect to the image.
  FeatureMap<T> backward(const RawPredictions<T>& d_preds, const ForwardCache<T>& cache,
                         WeightSet<T>& grads) const;

 private:
  FeatureMap<T> block(const FeatureMap<T>& x, const std::string& name, int stride, BlockCache<T>* cache) const;
  FeatureMap<T> block_backward(const FeatureMap<T>& dy, const std::string& name, int stride,
                               const BlockCache<T>& cache, WeightSet<T>& grads) const;
  cbam::ChannelParams<T> channel_params() const;
  cbam::SpatialParams<T> spatial_params() const;
  const Array<T>& w(const std::string& name) const;

  DetectorConfig cfg_;
  const WeightSet<T>& weights_;
};

/// Training targets for one head.
struct LevelTargets {
  int stride = 0;
  int grid = 0;
  std::vector<int> category;                 // -1 for negatives
  std::vector<std::array<double, 4>> dist;   // l, t, r, b in pixels
  std::vector<AbsBox> box;                   // ground truth in input pixels
  std::vector<double> area;
  bool positive(int cell) const { return category[cell] >= 0; }
  int positives() const;
};

struct Targets {
  std::vector<LevelTargets> levels;  // stride 8, stride 16
};

/// Single-cell center assignment: stride 8 when max(w, h) < 0.25, else 16;
/// on collision the larger box wins.
Targets assign_targets(const std::vector<LabeledBox>& gt, const DetectorConfig& cfg);

struct LossValue {
  double total = 0, obj = 0, box = 0, cls = 0;
};

/// lambda_obj * mean BCE over every cell + lambda_box * mean (1 - IoU) over
/// positives + lambda_cls * mean over positives of the per-category BCE sum.
/// When `grad` is non-null it receives dL/d(raw predictions).
template <typename T>
LossValue compute_loss(const RawPredictions<T>& preds, const Targets& targets, const DetectorConfig& cfg,
                       RawPredictions<T>* grad = nullptr);

/// Candidate boxes in input pixels scaled to (image_w, image_h), clamped,
/// scored sigma(obj) * max_k sigma(cls_k), thresholded and suppressed.
template <typename T>
std::vector<Detection> decode(const RawPredictions<T>& preds, const DetectorConfig& cfg, int image_w, int image_h,
                              double conf_thresh);

/// Resizes to the input size when needed, then forward + decode.
std::vector<Detection> predict(const Image& image, const WeightSet<float>& weights, const DetectorConfig& cfg,
                               double conf_thresh);
std::vector<Detection> predict(const Image& image, const WeightSet<float>& weights, const DetectorConfig& cfg);

/// Bilinear resize (pixel-center aligned).
Image resize(const Image& image, int width, int height);

template <typename T>
FeatureMap<T> to_input(const Image& image, int size);

}  // namespace cowdet
