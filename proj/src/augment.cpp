#include "cowdet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "cowdet/error.hpp"
#include "cowdet/parallel.hpp"

namespace cowdet {

namespace fs = std::filesystem;

void validate(const AugmentSpec& s) {
  if (s.copies_per_image < 0) throw Error("copies_per_image must be >= 0");
  if (!(s.rotation_range >= 0 && s.rotation_range <= 45)) throw Error("rotation_range must be in [0, 45]");
  if (!(s.crop_lo > 0 && s.crop_lo <= s.crop_hi && s.crop_hi <= 1)) throw Error("crop range must satisfy 0 < lo <= hi <= 1");
  if (!(s.saturation_lo > 0 && s.saturation_lo <= s.saturation_hi)) throw Error("saturation range must be positive");
  if (!(s.brightness_lo > 0 && s.brightness_lo <= s.brightness_hi)) throw Error("brightness range must be positive");
}

namespace {

// Bilinear sample at continuous pixel-index coordinates, replicating edges.
float sample(std::span<const float> plane, int w, int h, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = plane[y0 * w + x0] * (1 - fx) + plane[y0 * w + x1] * fx;
  const double bot = plane[y1 * w + x0] * (1 - fx) + plane[y1 * w + x1] * fx;
  return static_cast<float>(std::clamp(top * (1 - fy) + bot * fy, 0.0, 1.0));
}

// Keeps boxes that survive clipping, snapped to the canonical grid.
void keep_clipped(std::vector<LabeledBox>& out, const LabeledBox& src, const NormBox& moved) {
  auto clipped = clip_box(moved);
  if (!clipped) return;
  NormBox c = canonical(*clipped);
  if (!is_valid(c)) return;
  LabeledBox lb = src;
  lb.box = c;
  out.push_back(lb);
}

}  // namespace

Annotated hflip(const Annotated& in) {
  Annotated out;
  const int w = in.image.width(), h = in.image.height();
  out.image = Image(in.image.channels(), h, w);
  for (int c = 0; c < in.image.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.image(c, y, x) = in.image(c, y, w - 1 - x);
  out.boxes = in.boxes;
  for (LabeledBox& b : out.boxes) {
    b.box = canonical(b.box);
    b.box.cx = 1.0 - b.box.cx;
  }
  return out;
}

AbsBox rotated_hull(const NormBox& b, double angle_deg, int width, int height) {
  const double t = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(t), sn = std::sin(t);
  const double ox = width / 2.0, oy = height / 2.0;
  const AbsBox a{(b.cx - b.w / 2) * width, (b.cy - b.h / 2) * height, (b.cx + b.w / 2) * width,
                 (b.cy + b.h / 2) * height};
  AbsBox hull{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (double x : {a.x0, a.x1}) {
    for (double y : {a.y0, a.y1}) {
      const double rx = ox + (x - ox) * cs + (y - oy) * sn;
      const double ry = oy - (x - ox) * sn + (y - oy) * cs;
      hull.x0 = std::min(hull.x0, rx);
      hull.x1 = std::max(hull.x1, rx);
      hull.y0 = std::min(hull.y0, ry);
      hull.y1 = std::max(hull.y1, ry);
    }
  }
  return hull;
}

Annotated rotate(const Annotated& in, double angle_deg) {
  if (angle_deg == 0.0) return in;
  const int w = in.image.width(), h = in.image.height();
  const double t = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(t), sn = std::sin(t);
  const double ox = w / 2.0, oy = h / 2.0;
  Annotated out;
  out.image = Image(in.image.channels(), h, w);
  for (int c = 0; c < in.image.channels(); ++c) {
    auto src = in.image.plane(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Inverse rotation of the destination pixel center.
        const double dx = x + 0.5 - ox, dy = y + 0.5 - oy;
        const double sx = ox + dx * cs - dy * sn;
        const double sy = oy + dx * sn + dy * cs;
        out.image(c, y, x) = sample(src, w, h, sx - 0.5, sy - 0.5);
      }
    }
  }
  for (const LabeledBox& b : in.boxes) {
    const AbsBox hull = rotated_hull(b.box, angle_deg, w, h);
    const NormBox moved{(hull.x0 + hull.x1) / 2 / w, (hull.y0 + hull.y1) / 2 / h, hull.width() / w,
                        hull.height() / h};
    keep_clipped(out.boxes, b, moved);
  }
  return out;
}

std::vector<LabeledBox> crop_boxes(const std::vector<LabeledBox>& boxes, const CropWindow& win, int width,
                                   int height) {
  std::vector<LabeledBox> out;
  for (const LabeledBox& b : boxes) {
    const NormBox moved{(b.box.cx * width - win.x0) / win.w, (b.box.cy * height - win.y0) / win.h,
                        b.box.w * width / win.w, b.box.h * height / win.h};
    keep_clipped(out, b, moved);
  }
  return out;
}

Annotated crop(const Annotated& in, const CropWindow& win) {
  const int w = in.image.width(), h = in.image.height();
  if (!(win.w > 0 && win.h > 0)) throw Error("crop window must have positive size");
  Annotated out;
  out.image = Image(in.image.channels(), h, w);
  const double kx = win.w / w, ky = win.h / h;
  for (int c = 0; c < in.image.channels(); ++c) {
    auto src = in.image.plane(c);
    for (int y = 0; y < h; ++y) {
      const double sy = win.y0 + (y + 0.5) * ky - 0.5;
      for (int x = 0; x < w; ++x) {
        const double sx = win.x0 + (x + 0.5) * kx - 0.5;
        out.image(c, y, x) = sample(src, w, h, sx, sy);
      }
    }
  }
  out.boxes = crop_boxes(in.boxes, win, w, h);
  return out;
}

CropWindow sample_crop(int width, int height, double lo, double hi, Rng& rng) {
  const double s = rng.uniform(lo, hi);
  CropWindow win;
  win.w = s * width;
  win.h = s * height;
  win.x0 = rng.uniform() * (width - win.w);
  win.y0 = rng.uniform() * (height - win.h);
  return win;
}

Annotated random_crop(const Annotated& in, double lo, double hi, Rng& rng) {
  return crop(in, sample_crop(in.image.width(), in.image.height(), lo, hi, rng));
}

Image adjust_brightness(const Image& img, double factor) {
  if (!(factor >= 0)) throw Error("brightness factor must be non-negative");
  Image out = img;
  for (float& v : out.values()) v = std::clamp(static_cast<float>(v * factor), 0.0f, 1.0f);
  return out;
}

Image adjust_saturation(const Image& img, double factor) {
  if (!(factor >= 0)) throw Error("saturation factor must be non-negative");
  if (img.channels() != 3) throw Error("saturation needs an RGB image");
  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double luma = 0.299 * img(0, y, x) + 0.587 * img(1, y, x) + 0.114 * img(2, y, x);
      for (int c = 0; c < 3; ++c) {
        const double v = luma + factor * (img(c, y, x) - luma);
        out(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

Annotated augment_sample(const Annotated& in, const AugmentSpec& spec, Rng& rng) {
  // Every draw happens unconditionally so the stream layout is fixed.
  const bool flip = rng.bernoulli(0.5);
  const double angle = rng.uniform(-spec.rotation_range, spec.rotation_range);
  const CropWindow win = sample_crop(in.image.width(), in.image.height(), spec.crop_lo, spec.crop_hi, rng);
  const double sat = rng.uniform(spec.saturation_lo, spec.saturation_hi);
  const double bright = rng.uniform(spec.brightness_lo, spec.brightness_hi);

  Annotated cur = flip ? hflip(in) : in;
  cur = rotate(cur, angle);
  cur = crop(cur, win);
  cur.image = adjust_brightness(adjust_saturation(cur.image, sat), bright);
  return cur;
}

bool is_augmented_id(const std::string& id) {
  const auto pos = id.rfind("_aug");
  if (pos == std::string::npos || pos + 4 >= id.size()) return false;
  return std::all_of(id.begin() + pos + 4, id.end(), [](char c) { return c >= '0' && c <= '9'; });
}

Manifest augment_dataset(const fs::path& manifest_path, const AugmentSpec& spec, int workers,
                         bool replace_existing) {
  validate(spec);
  Manifest m = load_manifest(manifest_path);
  std::set<std::string> originals;
  for (const auto& r : m.images)
    if (!is_augmented_id(r.id)) originals.insert(r.id);
  std::vector<ImageRecord> base;
  for (const auto& r : m.images) {
    if (is_augmented_id(r.id) && originals.count(r.id.substr(0, r.id.rfind("_aug")))) {
      if (!replace_existing) throw Error("manifest already contains augmented images (use --force to regenerate)");
      continue;
    }
    base.push_back(r);
  }
  if (spec.copies_per_image == 0) {
    m.images = base;
    return m;
  }

  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < base.size(); ++i)
    if (base[i].split == Split::train) train.push_back(i);

  std::vector<std::vector<ImageRecord>> produced(train.size());
  parallel_for(train.size(), workers, [&](std::size_t t) {
    const ImageRecord& rec = base[train[t]];
    const fs::path src = image_path(manifest_path, rec);
    Annotated in;
    try {
      in.image = load_png(src);
    } catch (const Error& e) {
      throw Error("cannot decode " + src.string() + ": " + e.what());
    }
    in.boxes = parse_label_file(label_path(manifest_path, rec.id), false).boxes;
    for (int k = 1; k <= spec.copies_per_image; ++k) {
      Rng rng(derive_seed(spec.seed, rec.id, static_cast<std::uint64_t>(k)));
      Annotated out = augment_sample(in, spec, rng);
      ImageRecord aug = rec;
      aug.id = rec.id + "_aug" + std::to_string(k);
      const fs::path rel = fs::path(rec.path).parent_path() / (aug.id + ".png");
      aug.path = rel.string();
      save_png(out.image, image_path(manifest_path, aug));
      LabelSet ls{aug.id, out.boxes};
      write_label_file(ls, label_path(manifest_path, aug.id), false);
      produced[t].push_back(aug);
    }
  });

  Manifest outm;
  outm.version = m.version;
  std::size_t t = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    outm.images.push_back(base[i]);
    if (t < train.size() && train[t] == i) {
      for (auto& r : produced[t]) outm.images.push_back(r);
      ++t;
    }
  }
  validate(outm);
  return outm;
}

}  // namespace cowdet
