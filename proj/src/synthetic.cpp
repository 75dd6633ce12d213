#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <json.hpp>

#include "cowdet/dataset.hpp"
#include "cowdet/error.hpp"
#include "cowdet/image.hpp"
#include "cowdet/rng.hpp"

namespace cowdet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Ellipse {
  double cx, cy, a, b, theta;

  // Half extents of the axis-aligned hull.
  double half_w() const {
    return std::sqrt(a * a * std::cos(theta) * std::cos(theta) + b * b * std::sin(theta) * std::sin(theta));
  }
  double half_h() const {
    return std::sqrt(a * a * std::sin(theta) * std::sin(theta) + b * b * std::cos(theta) * std::cos(theta));
  }
  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = dx * std::cos(theta) + dy * std::sin(theta);
    const double v = -dx * std::sin(theta) + dy * std::cos(theta);
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  }
  AbsBox hull() const { return {cx - half_w(), cy - half_h(), cx + half_w(), cy + half_h()}; }
};

struct Rgb {
  float r, g, b;
};

void paint(Image& img, int x, int y, const Rgb& c) {
  img(0, y, x) = c.r;
  img(1, y, x) = c.g;
  img(2, y, x) = c.b;
}

void fill_ellipse(Image& img, const Ellipse& e, const Rgb& c) {
  const AbsBox h = e.hull();
  const int x0 = std::max(0, static_cast<int>(std::floor(h.x0)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(h.x1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(h.y0)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(h.y1)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (e.contains(x + 0.5, y + 0.5)) paint(img, x, y, c);
}

void fill_rect(Image& img, double rx0, double ry0, double rx1, double ry1, const Rgb& c) {
  const int x0 = std::max(0, static_cast<int>(std::round(rx0)));
  const int x1 = std::min(img.width(), static_cast<int>(std::round(rx1)));
  const int y0 = std::max(0, static_cast<int>(std::round(ry0)));
  const int y1 = std::min(img.height(), static_cast<int>(std::round(ry1)));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) paint(img, x, y, c);
}

// Coat: cream body with dark patches, plus a darker head disc at one end
// of the major axis.
void draw_animal(Image& img, const Ellipse& body, Rng& rng, json& prims) {
  const float base = static_cast<float>(rng.uniform(0.82, 0.95));
  const Rgb coat{base, base * 0.97f, base * 0.9f};
  const Rgb patch{static_cast<float>(rng.uniform(0.05, 0.18)), static_cast<float>(rng.uniform(0.05, 0.15)),
                  static_cast<float>(rng.uniform(0.05, 0.12))};
  const int n_patches = rng.range(2, 4);
  std::vector<Ellipse> patches;
  for (int k = 0; k < n_patches; ++k) {
    const double t = rng.uniform(-0.6, 0.6), s = rng.uniform(-0.5, 0.5);
    const double px = body.cx + t * body.a * std::cos(body.theta) - s * body.b * std::sin(body.theta);
    const double py = body.cy + t * body.a * std::sin(body.theta) + s * body.b * std::cos(body.theta);
    const double r = rng.uniform(0.25, 0.45) * body.b;
    patches.push_back({px, py, r * rng.uniform(1.0, 1.6), r, rng.uniform(0, std::numbers::pi)});
  }
  const AbsBox h = body.hull();
  const int x0 = std::max(0, static_cast<int>(std::floor(h.x0)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(h.x1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(h.y0)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(h.y1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (!body.contains(x + 0.5, y + 0.5)) continue;
      bool dark = false;
      for (const Ellipse& p : patches) dark = dark || p.contains(x + 0.5, y + 0.5);
      paint(img, x, y, dark ? patch : coat);
    }
  }
  prims.push_back({{"kind", "animal"},
                   {"cx", body.cx},
                   {"cy", body.cy},
                   {"a", body.a},
                   {"b", body.b},
                   {"theta", body.theta},
                   {"patches", n_patches}});
}

double overlap(const AbsBox& a, const AbsBox& b) {
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  return iw * ih / std::min(a.area(), b.area());
}

struct Rendered {
  Image image;
  LabelSet labels;
  json provenance;
};

Rendered render(const std::string& id, int size, double clutter, Rng& rng) {
  const double S = size;
  Rendered out;
  out.image = make_image(size, size);
  json prims = json::array();

  // Ground: earthy base color, a linear gradient and per-pixel noise.
  const Rgb ground{static_cast<float>(rng.uniform(0.3, 0.5)), static_cast<float>(rng.uniform(0.3, 0.45)),
                   static_cast<float>(rng.uniform(0.2, 0.35))};
  const double gx = rng.uniform(-0.1, 0.1), gy = rng.uniform(-0.1, 0.1);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double g = gx * (x / S - 0.5) + gy * (y / S - 0.5);
      paint(out.image, x, y,
            {static_cast<float>(ground.r + g + rng.uniform(-0.07, 0.07)),
             static_cast<float>(ground.g + g + rng.uniform(-0.07, 0.07)),
             static_cast<float>(ground.b + g + rng.uniform(-0.07, 0.07))});
    }
  }

  // Distractors: untextured shapes in animal-like sizes.
  const int n_distractors = static_cast<int>(std::lround(clutter * 5.0 * rng.uniform(0.6, 1.0)));
  for (int k = 0; k < n_distractors; ++k) {
    const float v = static_cast<float>(rng.uniform(0.15, 0.75));
    const Rgb c{v, static_cast<float>(v * rng.uniform(0.8, 1.1)), static_cast<float>(v * rng.uniform(0.7, 1.0))};
    const double cx = rng.uniform(0, S), cy = rng.uniform(0, S);
    const double a = rng.uniform(0.05, 0.18) * S, b = a * rng.uniform(0.4, 1.0);
    if (rng.bernoulli(0.5)) {
      const Ellipse e{cx, cy, a, b, rng.uniform(0, std::numbers::pi)};
      fill_ellipse(out.image, e, c);
      prims.push_back({{"kind", "distractor"}, {"shape", "ellipse"}, {"cx", cx}, {"cy", cy}, {"a", a}, {"b", b}});
    } else {
      fill_rect(out.image, cx - a, cy - b, cx + a, cy + b, c);
      prims.push_back({{"kind", "distractor"}, {"shape", "rect"}, {"cx", cx}, {"cy", cy}, {"a", a}, {"b", b}});
    }
  }

  // Animals, placed fully inside the frame with limited mutual overlap.
  const int n_animals = rng.range(1, 5);
  std::vector<Ellipse> animals;
  for (int attempt = 0; attempt < 200 && static_cast<int>(animals.size()) < n_animals; ++attempt) {
    Ellipse e;
    e.a = rng.uniform(0.07, 0.22) * S;
    e.b = e.a * rng.uniform(0.5, 0.75);
    e.theta = rng.uniform(0, std::numbers::pi);
    const double hw = e.half_w(), hh = e.half_h();
    e.cx = rng.uniform(hw + 1, S - hw - 1);
    e.cy = rng.uniform(hh + 1, S - hh - 1);
    bool ok = true;
    for (const Ellipse& o : animals) ok = ok && overlap(o.hull(), e.hull()) < 0.3;
    if (ok) animals.push_back(e);
  }
  for (const Ellipse& e : animals) {
    draw_animal(out.image, e, rng, prims);
    LabeledBox lb;
    lb.category_id = 0;
    lb.box = canonical(abs_to_norm(e.hull(), S, S));
    out.labels.boxes.push_back(lb);
  }

  // Occluders: thin posts crossing the scene.
  const int n_occluders = static_cast<int>(std::lround(clutter * 2.0 * rng.uniform(0.5, 1.0)));
  for (int k = 0; k < n_occluders; ++k) {
    const double x = rng.uniform(0, S), w = rng.uniform(2, 5);
    const double y0 = rng.uniform(0, 0.3 * S), y1 = rng.uniform(0.7 * S, S);
    const float v = static_cast<float>(rng.uniform(0.2, 0.35));
    fill_rect(out.image, x, y0, x + w, y1, {v, v * 0.8f, v * 0.6f});
    prims.push_back({{"kind", "occluder"}, {"x", x}, {"w", w}, {"y0", y0}, {"y1", y1}});
  }

  // Shadow bands: multiplicative darkening across full rows.
  const int n_shadows = static_cast<int>(std::lround(clutter * 2.0 * rng.uniform(0.5, 1.0)));
  for (int k = 0; k < n_shadows; ++k) {
    const double y = rng.uniform(0, S), h = rng.uniform(0.08, 0.25) * S;
    const float f = static_cast<float>(rng.uniform(0.5, 0.8));
    for (int yy = std::max(0, static_cast<int>(y)); yy < std::min(size, static_cast<int>(y + h)); ++yy)
      for (int x = 0; x < size; ++x)
        for (int c = 0; c < 3; ++c) out.image(c, yy, x) *= f;
    prims.push_back({{"kind", "shadow"}, {"y", y}, {"h", h}, {"factor", f}});
  }

  const double brightness = clutter > 0 ? rng.uniform(1.0 - 0.35 * clutter, 1.0 + 0.25 * clutter) : 1.0;
  for (float& v : out.image.values()) v = std::clamp(static_cast<float>(v * brightness), 0.0f, 1.0f);

  out.labels.image_id = id;
  out.provenance = json{{"id", id}, {"clutter", clutter}, {"brightness", brightness}, {"primitives", prims}};
  return out;
}

}  // namespace

fs::path gen_synthetic(const SyntheticOptions& opts, const fs::path& out_dir) {
  if (opts.count < 1) throw Error("synthetic image count must be at least 1");
  if (opts.clutter < 0 || opts.clutter > 1) throw Error("clutter must be in [0,1]");
  if (opts.size < 16) throw Error("synthetic image size must be at least 16");
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  fs::create_directories(out_dir / "labels", ec);
  if (ec || !fs::is_directory(out_dir / "images")) throw Error("cannot create output directory " + out_dir.string());

  const fs::path manifest_path = out_dir / "manifest.json";
  Manifest m;
  for (int i = 0; i < opts.count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "syn_%05d", i);
    Rng rng(derive_seed(opts.seed, "synthetic", static_cast<std::uint64_t>(i)));
    Rendered r = render(id, opts.size, opts.clutter, rng);
    save_png(r.image, out_dir / "images" / (std::string(id) + ".png"));
    write_label_file(r.labels, label_path(manifest_path, id), false);
    atomic_write(out_dir / "images" / (std::string(id) + ".prov.json"), r.provenance.dump(2) + "\n");
    ImageRecord rec;
    rec.id = id;
    rec.path = "images/" + std::string(id) + ".png";
    rec.camera = kAllCameras[i % kAllCameras.size()];
    rec.width = opts.size;
    rec.height = opts.size;
    m.images.push_back(rec);
  }
  save_manifest(m, manifest_path);
  return manifest_path;
}

}  // namespace cowdet
