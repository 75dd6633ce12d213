#pragma once

#include <filesystem>

#include "cowdet/tensor.hpp"

namespace cowdet {

/// Planar RGB image, values in [0,1]. Shape (3, height, width).
using Image = FeatureMap<float>;

Image make_image(int width, int height, float fill = 0.0f);

/// 8-bit RGB PNG. Grey and RGBA inputs are converted to RGB on load.
Image load_png(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);

/// Writes to a sibling temporary file then renames over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

}  // namespace cowdet
