#include "cowdet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cowdet/error.hpp"
#include "cowdet/rng.hpp"

namespace cowdet {

using nlohmann::json;
using nn::sigmoid;

DetectorConfig DetectorConfig::desk() {
  DetectorConfig c;
  c.input_size = 128;
  c.stage_widths = {8, 16, 24, 32};
  return c;
}

void validate(const DetectorConfig& c) {
  if (c.stage_widths.size() != 4) throw Error("stage_widths must list 4 widths (stem and three stages)");
  for (int w : c.stage_widths)
    if (w <= 0) throw Error("stage widths must be positive");
  if (c.head_strides != std::vector<int>{8, 16}) throw Error("head_strides must be [8, 16]");
  if (c.input_size <= 0 || c.input_size % 16 != 0) throw Error("input_size must be a positive multiple of 16");
  if (c.num_categories < 1) throw Error("num_categories must be at least 1");
  if (c.cbam_reduction < 1) throw Error("cbam_reduction must be positive");
  if (!(c.conf_thresh >= 0 && c.conf_thresh <= 1)) throw Error("conf_thresh must be in [0, 1]");
  if (!(c.nms_iou > 0 && c.nms_iou <= 1)) throw Error("nms_iou must be in (0, 1]");
  const auto& l = c.loss_weights;
  if (!(l.obj >= 0 && l.box >= 0 && l.cls >= 0)) throw Error("loss weights must be non-negative");
}

json to_json(const DetectorConfig& c) {
  return json{{"input_size", c.input_size},
              {"stage_widths", c.stage_widths},
              {"head_strides", c.head_strides},
              {"num_categories", c.num_categories},
              {"cbam_enabled", c.cbam_enabled},
              {"cbam_reduction", c.cbam_reduction},
              {"conf_thresh", c.conf_thresh},
              {"nms_iou", c.nms_iou},
              {"loss_weights", {{"obj", c.loss_weights.obj}, {"box", c.loss_weights.box}, {"cls", c.loss_weights.cls}}}};
}

DetectorConfig detector_config_from_json(const json& j) {
  if (!j.is_object()) throw Error("detector config must be an object");
  DetectorConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "input_size") c.input_size = v.get<int>();
      else if (key == "stage_widths") c.stage_widths = v.get<std::vector<int>>();
      else if (key == "head_strides") c.head_strides = v.get<std::vector<int>>();
      else if (key == "num_categories") c.num_categories = v.get<int>();
      else if (key == "cbam_enabled") c.cbam_enabled = v.get<bool>();
      else if (key == "cbam_reduction") c.cbam_reduction = v.get<int>();
      else if (key == "conf_thresh") c.conf_thresh = v.get<double>();
      else if (key == "nms_iou") c.nms_iou = v.get<double>();
      else if (key == "loss_weights") {
        if (!v.is_object()) throw Error("detector.loss_weights must be an object");
        for (const auto& [lk, lv] : v.items()) {
          if (lk == "obj") c.loss_weights.obj = lv.get<double>();
          else if (lk == "box") c.loss_weights.box = lv.get<double>();
          else if (lk == "cls") c.loss_weights.cls = lv.get<double>();
          else throw Error("detector.loss_weights: unknown key \"" + lk + "\"");
        }
      } else {
        throw Error("detector: unknown key \"" + key + "\"");
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("detector config: ") + e.what());
  }
  validate(c);
  return c;
}

namespace {

using Shape = std::vector<std::size_t>;

Shape conv_shape(int cout, int cin, int k) {
  return {static_cast<std::size_t>(cout), static_cast<std::size_t>(cin), static_cast<std::size_t>(k),
          static_cast<std::size_t>(k)};
}

void add_block(std::vector<std::pair<std::string, Shape>>& out, const std::string& name, int cout, int cin) {
  out.emplace_back(name + ".w", conv_shape(cout, cin, 3));
  out.emplace_back(name + ".scale", Shape{static_cast<std::size_t>(cout)});
  out.emplace_back(name + ".shift", Shape{static_cast<std::size_t>(cout)});
}

const char* kStageNames[3] = {"stage1", "stage2", "stage3"};
const char* kHeadNames[2] = {"head.s8", "head.s16"};

}  // namespace

std::vector<std::pair<std::string, Shape>> weight_layout(const DetectorConfig& cfg) {
  validate(cfg);
  const auto& wd = cfg.stage_widths;
  std::vector<std::pair<std::string, Shape>> out;
  add_block(out, "stem.conv", wd[0], 3);
  for (int s = 0; s < 3; ++s) {
    const std::string n = kStageNames[s];
    add_block(out, n + ".down", wd[s + 1], wd[s]);
    add_block(out, n + ".res.a", wd[s + 1], wd[s + 1]);
    add_block(out, n + ".res.b", wd[s + 1], wd[s + 1]);
  }
  if (cfg.cbam_enabled) {
    const std::size_t c = wd[3], h = cbam::hidden_width(wd[3], cfg.cbam_reduction);
    out.emplace_back("cbam.W1", Shape{h, c});
    out.emplace_back("cbam.W2", Shape{c, h});
    out.emplace_back("cbam.kernel", Shape{1, 2, cbam::kSpatialKernel, cbam::kSpatialKernel});
    out.emplace_back("cbam.bias", Shape{1});
  }
  add_block(out, "neck.fuse", wd[2], wd[3] + wd[2]);
  const int head_in[2] = {wd[2], wd[3]};
  for (int h = 0; h < 2; ++h) {
    const std::string n = kHeadNames[h];
    add_block(out, n + ".conv", head_in[h], head_in[h]);
    out.emplace_back(n + ".out.w", conv_shape(cfg.planes(), head_in[h], 1));
    out.emplace_back(n + ".out.shift", Shape{static_cast<std::size_t>(cfg.planes())});
  }
  return out;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

WeightSet<float> init_weights(const DetectorConfig& cfg, std::uint64_t seed) {
  WeightSet<float> ws;
  for (const auto& [name, shape] : weight_layout(cfg)) {
    Array<float> a(shape);
    if (ends_with(name, ".scale")) {
      std::fill(a.data.begin(), a.data.end(), 1.0f);
    } else if (ends_with(name, ".w") || name == "cbam.W1" || name == "cbam.W2" || name == "cbam.kernel") {
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      Rng rng(derive_seed(seed, name));
      for (float& v : a.data) v = static_cast<float>(rng.normal() * stddev);
    }
    ws.emplace(name, std::move(a));
  }
  return ws;
}

template <typename T>
void check_weights(const WeightSet<T>& w, const DetectorConfig& cfg) {
  std::string missing, extra, shape;
  std::set<std::string> expected;
  for (const auto& [name, s] : weight_layout(cfg)) {
    expected.insert(name);
    auto it = w.find(name);
    if (it == w.end()) {
      missing += " " + name;
    } else if (it->second.shape != s || it->second.data.size() != it->second.size()) {
      shape += " " + name;
    }
  }
  for (const auto& [name, _] : w)
    if (!expected.count(name)) extra += " " + name;
  if (!missing.empty() || !extra.empty() || !shape.empty()) {
    std::string msg = "weights do not match config:";
    if (!missing.empty()) msg += " missing [" + missing.substr(1) + "]";
    if (!extra.empty()) msg += " extra [" + extra.substr(1) + "]";
    if (!shape.empty()) msg += " wrong shape [" + shape.substr(1) + "]";
    throw Error(msg);
  }
}

template <typename T>
Detector<T>::Detector(const DetectorConfig& cfg, const WeightSet<T>& weights) : cfg_(cfg), weights_(weights) {
  check_weights(weights_, cfg_);
}

template <typename T>
const Array<T>& Detector<T>::w(const std::string& name) const {
  auto it = weights_.find(name);
  if (it == weights_.end()) throw Error("missing weight " + name);
  return it->second;
}

template <typename T>
FeatureMap<T> Detector<T>::block(const FeatureMap<T>& x, const std::string& name, int stride,
                                 BlockCache<T>* cache) const {
  FeatureMap<T> z = nn::conv2d(x, w(name + ".w"), static_cast<const Array<T>*>(nullptr), stride,
                               cache ? &cache->conv : nullptr, name);
  FeatureMap<T> n = nn::channel_norm(z, w(name + ".scale"), w(name + ".shift"), cache ? &cache->norm : nullptr);
  FeatureMap<T> y = nn::silu(n);
  if (cache) cache->pre = std::move(n);
  return y;
}

template <typename T>
FeatureMap<T> Detector<T>::block_backward(const FeatureMap<T>& dy, const std::string& name, int stride,
                                          const BlockCache<T>& cache, WeightSet<T>& grads) const {
  FeatureMap<T> dn = nn::silu_backward(dy, cache.pre);
  FeatureMap<T> dz =
      nn::channel_norm_backward(dn, w(name + ".scale"), cache.norm, grads.at(name + ".scale"), grads.at(name + ".shift"));
  return nn::conv2d_backward(dz, w(name + ".w"), stride, cache.conv, grads.at(name + ".w"),
                             static_cast<Array<T>*>(nullptr));
}

template <typename T>
cbam::ChannelParams<T> Detector<T>::channel_params() const {
  return cbam::ChannelParams<T>{w("cbam.W1"), w("cbam.W2")};
}

template <typename T>
cbam::SpatialParams<T> Detector<T>::spatial_params() const {
  return cbam::SpatialParams<T>{w("cbam.kernel"), w("cbam.bias").data.at(0)};
}

template <typename T>
Features<T> Detector<T>::backbone(const FeatureMap<T>& image, ForwardCache<T>* cache) const {
  if (image.channels() != 3 || image.height() != cfg_.input_size || image.width() != cfg_.input_size) {
    throw Error("forward: expected a (3, " + std::to_string(cfg_.input_size) + ", " +
                std::to_string(cfg_.input_size) + ") image");
  }
  FeatureMap<T> x = block(image, "stem.conv", 2, cache ? &cache->stem : nullptr);
  Features<T> out;
  for (int s = 0; s < 3; ++s) {
    const std::string n = kStageNames[s];
    StageCache<T>* sc = cache ? &cache->stages[s] : nullptr;
    FeatureMap<T> d = block(x, n + ".down", 2, sc ? &sc->down : nullptr);
    FeatureMap<T> a = block(d, n + ".res.a", 1, sc ? &sc->res_a : nullptr);
    FeatureMap<T> b = block(a, n + ".res.b", 1, sc ? &sc->res_b : nullptr);
    nn::add_inplace(d, b);
    x = std::move(d);
    if (s == 1) out.stride8 = x;
  }
  if (cache) cache->tail_channels = x.channels();
  if (cfg_.cbam_enabled) {
    out.tail = cbam::forward(x, channel_params(), spatial_params(), cache ? &cache->attention : nullptr);
  } else {
    out.tail = std::move(x);
  }
  return out;
}

template <typename T>
RawPredictions<T> Detector<T>::heads(const Features<T>& f, ForwardCache<T>* cache) const {
  FeatureMap<T> fused = block(nn::concat(nn::upsample2x(f.tail), f.stride8), "neck.fuse", 1,
                              cache ? &cache->neck : nullptr);
  RawPredictions<T> out;
  const FeatureMap<T>* inputs[2] = {&fused, &f.tail};
  for (int h = 0; h < 2; ++h) {
    const std::string n = kHeadNames[h];
    FeatureMap<T> hc = block(*inputs[h], n + ".conv", 1, cache ? &cache->head_conv[h] : nullptr);
    out.levels.push_back(
        nn::conv2d(hc, w(n + ".out.w"), &w(n + ".out.shift"), 1, cache ? &cache->head_out[h] : nullptr, n + ".out"));
  }
  return out;
}

template <typename T>
RawPredictions<T> Detector<T>::forward(const FeatureMap<T>& image, ForwardCache<T>* cache) const {
  return heads(backbone(image, cache), cache);
}

template <typename T>
FeatureMap<T> Detector<T>::backward(const RawPredictions<T>& d, const ForwardCache<T>& cache,
                                    WeightSet<T>& grads) const {
  if (d.levels.size() != 2) throw Error("backward: expected two prediction levels");
  std::array<FeatureMap<T>, 2> d_head_in;
  for (int h = 0; h < 2; ++h) {
    const std::string n = kHeadNames[h];
    FeatureMap<T> dhc =
        nn::conv2d_backward(d.levels[h], w(n + ".out.w"), 1, cache.head_out[h], grads.at(n + ".out.w"),
                            &grads.at(n + ".out.shift"));
    d_head_in[h] = block_backward(dhc, n + ".conv", 1, cache.head_conv[h], grads);
  }
  FeatureMap<T> dcat = block_backward(d_head_in[0], "neck.fuse", 1, cache.neck, grads);
  FeatureMap<T> dup, dx2;
  nn::split_channels(dcat, cache.tail_channels, dup, dx2);
  FeatureMap<T> dtail = std::move(d_head_in[1]);
  nn::add_inplace(dtail, nn::upsample2x_backward(dup));

  FeatureMap<T> dx;
  if (cfg_.cbam_enabled) {
    cbam::Grads<T> g{grads.at("cbam.W1"), grads.at("cbam.W2"), grads.at("cbam.kernel"), grads.at("cbam.bias").data[0]};
    dx = cbam::backward(dtail, channel_params(), spatial_params(), cache.attention, g);
    grads.at("cbam.W1") = std::move(g.w1);
    grads.at("cbam.W2") = std::move(g.w2);
    grads.at("cbam.kernel") = std::move(g.kernel);
    grads.at("cbam.bias").data[0] = g.bias;
  } else {
    dx = std::move(dtail);
  }

  for (int s = 2; s >= 0; --s) {
    const std::string n = kStageNames[s];
    const StageCache<T>& sc = cache.stages[s];
    // x = d + b(a(d))
    FeatureMap<T> da = block_backward(dx, n + ".res.b", 1, sc.res_b, grads);
    FeatureMap<T> dd = block_backward(da, n + ".res.a", 1, sc.res_a, grads);
    nn::add_inplace(dd, dx);
    dx = block_backward(dd, n + ".down", 2, sc.down, grads);
    if (s == 2) nn::add_inplace(dx, dx2);
  }
  return block_backward(dx, "stem.conv", 2, cache.stem, grads);
}

int LevelTargets::positives() const {
  int n = 0;
  for (int c : category) n += c >= 0;
  return n;
}

Targets assign_targets(const std::vector<LabeledBox>& gt, const DetectorConfig& cfg) {
  Targets t;
  const double S = cfg.input_size;
  for (int stride : cfg.head_strides) {
    LevelTargets lt;
    lt.stride = stride;
    lt.grid = cfg.input_size / stride;
    const std::size_t cells = static_cast<std::size_t>(lt.grid) * lt.grid;
    lt.category.assign(cells, -1);
    lt.dist.assign(cells, {0, 0, 0, 0});
    lt.box.assign(cells, AbsBox{});
    lt.area.assign(cells, 0.0);
    t.levels.push_back(std::move(lt));
  }
  for (const LabeledBox& g : gt) {
    if (g.category_id < 0 || g.category_id >= cfg.num_categories) throw Error("ground-truth category out of range");
    const int level = std::max(g.box.w, g.box.h) < 0.25 ? 0 : 1;
    LevelTargets& lt = t.levels[level];
    const int s = lt.stride;
    const int j = std::clamp(static_cast<int>(std::floor(g.box.cx * S / s)), 0, lt.grid - 1);
    const int i = std::clamp(static_cast<int>(std::floor(g.box.cy * S / s)), 0, lt.grid - 1);
    const int cell = i * lt.grid + j;
    const double area = g.box.w * g.box.h;
    if (lt.positive(cell) && lt.area[cell] >= area) continue;
    const AbsBox b{(g.box.cx - g.box.w / 2) * S, (g.box.cy - g.box.h / 2) * S, (g.box.cx + g.box.w / 2) * S,
                   (g.box.cy + g.box.h / 2) * S};
    const double ccx = (j + 0.5) * s, ccy = (i + 0.5) * s;
    lt.category[cell] = g.category_id;
    lt.dist[cell] = {ccx - b.x0, ccy - b.y0, b.x1 - ccx, b.y1 - ccy};
    lt.box[cell] = b;
    lt.area[cell] = area;
  }
  return t;
}

namespace {

double bce_logits(double z, double target) {
  return std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
}

struct IouGrad {
  double iou = 0;
  std::array<double, 4> d{0, 0, 0, 0};  // d IoU / d (x0, y0, x1, y1) of the prediction
};

IouGrad iou_with_grad(const AbsBox& p, const AbsBox& g) {
  IouGrad r;
  const double iw = std::min(p.x1, g.x1) - std::max(p.x0, g.x0);
  const double ih = std::min(p.y1, g.y1) - std::max(p.y0, g.y0);
  if (!(iw > 0) || !(ih > 0)) return r;
  const double inter = iw * ih;
  const double pw = p.x1 - p.x0, ph = p.y1 - p.y0;
  const double uni = pw * ph + g.area() - inter;
  r.iou = inter / uni;
  const double d_inter = (uni + inter) / (uni * uni);
  const double d_area = -inter / (uni * uni);
  const double dix0 = p.x0 > g.x0 ? -ih : 0.0;
  const double dix1 = p.x1 < g.x1 ? ih : 0.0;
  const double diy0 = p.y0 > g.y0 ? -iw : 0.0;
  const double diy1 = p.y1 < g.y1 ? iw : 0.0;
  r.d = {d_inter * dix0 - d_area * ph, d_inter * diy0 - d_area * pw, d_inter * dix1 + d_area * ph,
         d_inter * diy1 + d_area * pw};
  return r;
}

}  // namespace

template <typename T>
LossValue compute_loss(const RawPredictions<T>& preds, const Targets& targets, const DetectorConfig& cfg,
                       RawPredictions<T>* grad) {
  if (preds.levels.size() != targets.levels.size()) throw Error("loss: level count mismatch");
  const int K = cfg.num_categories;
  std::size_t cells = 0;
  int positives = 0;
  for (std::size_t l = 0; l < preds.levels.size(); ++l) {
    const auto& p = preds.levels[l];
    const auto& t = targets.levels[l];
    if (p.channels() != cfg.planes() || p.height() != t.grid || p.width() != t.grid)
      throw Error("loss: prediction shape does not match targets");
    cells += static_cast<std::size_t>(t.grid) * t.grid;
    positives += t.positives();
  }
  if (grad) {
    grad->levels.clear();
    for (const auto& p : preds.levels) grad->levels.emplace_back(p.channels(), p.height(), p.width());
  }
  const LossWeights& lw = cfg.loss_weights;
  double obj = 0, box = 0, cls = 0;
  for (std::size_t l = 0; l < preds.levels.size(); ++l) {
    const auto& p = preds.levels[l];
    const auto& t = targets.levels[l];
    const int n = t.grid;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int cell = i * n + j;
        const bool pos = t.positive(cell);
        const double z = p(0, i, j);
        obj += bce_logits(z, pos ? 1.0 : 0.0);
        if (grad) grad->levels[l](0, i, j) = static_cast<T>(lw.obj * (sigmoid(z) - (pos ? 1.0 : 0.0)) / cells);
        if (!pos) continue;

        for (int k = 0; k < K; ++k) {
          const double zc = p(1 + k, i, j);
          const double target = k == t.category[cell] ? 1.0 : 0.0;
          cls += bce_logits(zc, target);
          if (grad) grad->levels[l](1 + k, i, j) = static_cast<T>(lw.cls * (sigmoid(zc) - target) / positives);
        }

        const int s = t.stride;
        const double cx = (j + 0.5) * s, cy = (i + 0.5) * s;
        double raw[4], dist[4];
        for (int e = 0; e < 4; ++e) {
          raw[e] = p(1 + K + e, i, j);
          dist[e] = edge_distance(raw[e], s);
        }
        const AbsBox pb{cx - dist[0], cy - dist[1], cx + dist[2], cy + dist[3]};
        const IouGrad ig = iou_with_grad(pb, t.box[cell]);
        box += 1.0 - ig.iou;
        if (grad) {
          // x0 = cx - l, y0 = cy - t, x1 = cx + r, y1 = cy + b
          const double sign[4] = {-1, -1, 1, 1};
          for (int e = 0; e < 4; ++e) {
            const double dd = sign[e] * ig.d[e];
            grad->levels[l](1 + K + e, i, j) =
                static_cast<T>(-lw.box * dd * sigmoid(raw[e]) * s / positives);
          }
        }
      }
    }
  }
  LossValue v;
  v.obj = obj / cells;
  if (positives > 0) {
    v.box = box / positives;
    v.cls = cls / positives;
  }
  v.total = lw.obj * v.obj + lw.box * v.box + lw.cls * v.cls;
  return v;
}

template <typename T>
std::vector<Detection> decode(const RawPredictions<T>& preds, const DetectorConfig& cfg, int image_w, int image_h,
                              double conf_thresh) {
  const int K = cfg.num_categories;
  const double sx = static_cast<double>(image_w) / cfg.input_size;
  const double sy = static_cast<double>(image_h) / cfg.input_size;
  std::vector<Detection> cands;
  for (std::size_t l = 0; l < preds.levels.size(); ++l) {
    const auto& p = preds.levels[l];
    const int s = cfg.head_strides[l];
    for (int i = 0; i < p.height(); ++i) {
      for (int j = 0; j < p.width(); ++j) {
        int best_k = 0;
        double best = -1;
        for (int k = 0; k < K; ++k) {
          const double c = sigmoid(static_cast<double>(p(1 + k, i, j)));
          if (c > best) {
            best = c;
            best_k = k;
          }
        }
        const double score = sigmoid(static_cast<double>(p(0, i, j))) * best;
        if (!(score >= conf_thresh)) continue;
        const double cx = (j + 0.5) * s, cy = (i + 0.5) * s;
        double d[4];
        for (int e = 0; e < 4; ++e) d[e] = edge_distance(static_cast<double>(p(1 + K + e, i, j)), s);
        AbsBox b{std::clamp((cx - d[0]) * sx, 0.0, static_cast<double>(image_w)),
                 std::clamp((cy - d[1]) * sy, 0.0, static_cast<double>(image_h)),
                 std::clamp((cx + d[2]) * sx, 0.0, static_cast<double>(image_w)),
                 std::clamp((cy + d[3]) * sy, 0.0, static_cast<double>(image_h))};
        if (!is_valid(b)) continue;
        cands.push_back(Detection{b, std::clamp(score, 0.0, 1.0), best_k});
      }
    }
  }
  return nms(cands, cfg.nms_iou);
}

Image resize(const Image& image, int width, int height) {
  if (image.width() == width && image.height() == height) return image;
  Image out(image.channels(), height, width);
  const double kx = static_cast<double>(image.width()) / width;
  const double ky = static_cast<double>(image.height()) / height;
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < height; ++y) {
      const double fy = std::clamp((y + 0.5) * ky - 0.5, 0.0, image.height() - 1.0);
      const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, image.height() - 1);
      for (int x = 0; x < width; ++x) {
        const double fx = std::clamp((x + 0.5) * kx - 0.5, 0.0, image.width() - 1.0);
        const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, image.width() - 1);
        const double ax = fx - x0, ay = fy - y0;
        const double top = image(c, y0, x0) * (1 - ax) + image(c, y0, x1) * ax;
        const double bot = image(c, y1, x0) * (1 - ax) + image(c, y1, x1) * ax;
        out(c, y, x) = static_cast<float>(top * (1 - ay) + bot * ay);
      }
    }
  }
  return out;
}

template <typename T>
FeatureMap<T> to_input(const Image& image, int size) {
  if (image.channels() != 3) throw Error("expected an RGB image");
  return cast_map<T>(resize(image, size, size));
}

std::vector<Detection> predict(const Image& image, const WeightSet<float>& weights, const DetectorConfig& cfg,
                               double conf_thresh) {
  Detector<float> det(cfg, weights);
  return decode(det.forward(to_input<float>(image, cfg.input_size)), cfg, image.width(), image.height(),
                conf_thresh);
}

std::vector<Detection> predict(const Image& image, const WeightSet<float>& weights, const DetectorConfig& cfg) {
  return predict(image, weights, cfg, cfg.conf_thresh);
}

#define COWDET_DETECTOR_INSTANTIATE(T)                                                                        \
  template void check_weights<T>(const WeightSet<T>&, const DetectorConfig&);                                  \
  template class Detector<T>;                                                                                  \
  template LossValue compute_loss<T>(const RawPredictions<T>&, const Targets&, const DetectorConfig&,          \
                                     RawPredictions<T>*);                                                      \
  template std::vector<Detection> decode<T>(const RawPredictions<T>&, const DetectorConfig&, int, int, double); \
  template FeatureMap<T> to_input<T>(const Image&, int);

COWDET_DETECTOR_INSTANTIATE(float)
COWDET_DETECTOR_INSTANTIATE(double)

}  // namespace cowdet
