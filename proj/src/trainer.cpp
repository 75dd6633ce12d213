#include "cowdet/trainer.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "cowdet/error.hpp"
#include "cowdet/parallel.hpp"
#include "cowdet/rng.hpp"

namespace cowdet {

namespace fs = std::filesystem;

namespace {

struct ImageStep {
  LossValue loss;
  WeightSet<float> grads;
};

ImageStep image_step(const Detector<float>& det, const WeightSet<float>& weights, const Annotated& sample) {
  const DetectorConfig& cfg = det.config();
  ImageStep out;
  ForwardCache<float> cache;
  const RawPredictions<float> preds = det.forward(cast_map<float>(sample.image), &cache);
  const Targets targets = assign_targets(sample.boxes, cfg);
  RawPredictions<float> d_preds;
  out.loss = compute_loss(preds, targets, cfg, &d_preds);
  out.grads = zeros_like(weights);
  det.backward(d_preds, cache, out.grads);
  return out;
}

}  // namespace

TrainResult train(const std::vector<Annotated>& samples, const DetectorConfig& cfg, const TrainOptions& opts) {
  validate(cfg);
  if (opts.epochs < 0) throw Error("epochs must be non-negative");
  if (opts.batch_size < 1) throw Error("batch size must be positive");
  if (samples.empty()) throw Error("train split is empty");
  for (const Annotated& s : samples) {
    if (s.image.width() != cfg.input_size || s.image.height() != cfg.input_size)
      throw Error("training images must be resized to the input size");
  }

  TrainResult result;
  if (opts.initial_weights) {
    check_weights(*opts.initial_weights, cfg);
    result.weights = *opts.initial_weights;
  } else {
    result.weights = init_weights(cfg, opts.seed);
  }
  OptimizerState<float> state = make_optimizer_state(opts.optimizer, result.weights);

  const std::int64_t batches_per_epoch = (static_cast<std::int64_t>(samples.size()) + opts.batch_size - 1) / opts.batch_size;
  const std::int64_t total_iters = std::max<std::int64_t>(1, batches_per_epoch * opts.epochs);
  Rng shuffle_rng(derive_seed(opts.seed, "train.shuffle"));
  std::vector<std::size_t> order(samples.size());
  std::int64_t iter = 0;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);
    EpochLog log;
    log.epoch = epoch + 1;
    for (std::int64_t b = 0; b < batches_per_epoch; ++b, ++iter) {
      const std::size_t begin = static_cast<std::size_t>(b) * opts.batch_size;
      const std::size_t end = std::min(order.size(), begin + opts.batch_size);
      const std::size_t n = end - begin;

      Detector<float> det(cfg, result.weights);
      std::vector<ImageStep> steps(n);
      parallel_for(n, opts.workers,
                   [&](std::size_t k) { steps[k] = image_step(det, result.weights, samples[order[begin + k]]); });

      // Ordered reduction keeps results independent of the worker count.
      WeightSet<float> grads = zeros_like(result.weights);
      LossValue mean;
      for (const ImageStep& s : steps) {
        mean.total += s.loss.total;
        mean.obj += s.loss.obj;
        mean.box += s.loss.box;
        mean.cls += s.loss.cls;
        for (auto& [name, g] : grads) {
          const auto& src = s.grads.at(name).data;
          for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += src[i];
        }
      }
      const float inv = 1.0f / static_cast<float>(n);
      for (auto& [name, g] : grads)
        for (float& v : g.data) v *= inv;
      mean.total /= n;
      mean.obj /= n;
      mean.box /= n;
      mean.cls /= n;
      if (!std::isfinite(mean.total)) {
        throw Error("non-finite loss at epoch " + std::to_string(epoch + 1) + ", iteration " + std::to_string(iter));
      }

      const double lr = lr_at(iter, total_iters, opts.lr0, opts.lrf);
      optimizer_step(result.weights, grads, state, lr);

      result.iteration_loss.push_back(mean.total);
      log.loss += mean.total;
      log.loss_obj += mean.obj;
      log.loss_box += mean.box;
      log.loss_cls += mean.cls;
      log.lr = lr;
    }
    log.loss /= batches_per_epoch;
    log.loss_obj /= batches_per_epoch;
    log.loss_box /= batches_per_epoch;
    log.loss_cls /= batches_per_epoch;
    result.epochs.push_back(log);
  }
  return result;
}

std::vector<Annotated> load_split(const fs::path& manifest_path, Split split, int input_size, int workers) {
  const Manifest m = load_manifest(manifest_path);
  std::vector<const ImageRecord*> recs;
  for (const auto& r : m.images)
    if (r.split == split) recs.push_back(&r);
  std::vector<Annotated> out(recs.size());
  parallel_for(recs.size(), workers, [&](std::size_t i) {
    const ImageRecord& r = *recs[i];
    Image img = load_png(image_path(manifest_path, r));
    out[i].image = resize(img, input_size, input_size);
    const fs::path lp = label_path(manifest_path, r.id);
    if (!fs::exists(lp)) throw Error("missing label file for image " + r.id);
    out[i].boxes = parse_label_file(lp, false).boxes;
  });
  return out;
}

TrainResult train(const fs::path& manifest_path, const DetectorConfig& cfg, const TrainOptions& opts) {
  auto samples = load_split(manifest_path, Split::train, cfg.input_size, opts.workers);
  if (samples.empty()) throw Error("train split is empty");
  return train(samples, cfg, opts);
}

std::string training_log_json(const TrainResult& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochLog& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"loss_obj", e.loss_obj},
                      {"loss_box", e.loss_box},
                      {"loss_cls", e.loss_cls},
                      {"lr", e.lr}});
  }
  return nlohmann::json{{"epochs", epochs}}.dump(2) + "\n";
}

}  // namespace cowdet
