#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cowdet/dataset.hpp"
#include "cowdet/image.hpp"
#include "cowdet/rng.hpp"

namespace cowdet {

/// An image together with its normalized boxes.
struct Annotated {
  Image image;
  std::vector<LabeledBox> boxes;
};

struct AugmentSpec {
  int copies_per_image = 2;
  double rotation_range = 15.0;  // degrees, symmetric
  double crop_lo = 0.7, crop_hi = 1.0;
  double saturation_lo = 0.6, saturation_hi = 1.4;
  double brightness_lo = 0.6, brightness_hi = 1.4;
  std::uint64_t seed = 1;
};

void validate(const AugmentSpec& spec);

/// Mirror about the vertical axis; box cx becomes 1 - cx.
Annotated hflip(const Annotated& in);

/// Rotates counter-clockwise (as displayed) about the image center with
/// bilinear sampling and edge replication. Boxes become the hull of their
/// rotated corners, clipped to the frame; boxes that clip away are dropped.
Annotated rotate(const Annotated& in, double angle_deg);

/// Hull of the rotated corners in pixels, before clipping.
AbsBox rotated_hull(const NormBox& b, double angle_deg, int width, int height);

/// Crop rectangle in pixels.
struct CropWindow {
  double x0 = 0, y0 = 0, w = 0, h = 0;
};

/// Crops to `win`, resizes back to the original resolution and remaps boxes.
Annotated crop(const Annotated& in, const CropWindow& win);
std::vector<LabeledBox> crop_boxes(const std::vector<LabeledBox>& boxes, const CropWindow& win, int width,
                                   int height);
CropWindow sample_crop(int width, int height, double lo, double hi, Rng& rng);
Annotated random_crop(const Annotated& in, double lo, double hi, Rng& rng);

Image adjust_brightness(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);

/// One random variant: flip with p = 0.5, rotation, crop, saturation,
/// brightness.
Annotated augment_sample(const Annotated& in, const AugmentSpec& spec, Rng& rng);

/// Adds `copies_per_image` variants of every train image, written beside
/// the originals as `<id>_augK.png`. Val/test records are untouched. Each
/// variant's stream is derived from (seed, id, K). Returns the expanded
/// manifest; the caller decides where to save it.
Manifest augment_dataset(const std::filesystem::path& manifest_path, const AugmentSpec& spec, int workers = 1,
                         bool replace_existing = false);

bool is_augmented_id(const std::string& id);

}  // namespace cowdet
