#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cowdet/geometry.hpp"

namespace cowdet {

/// Capture condition of an image: interior wall/pipe/ceiling and outdoor
/// pipe/enrichment/corridor cameras.
enum class CameraTag { IW, IP, IC, OP, OE, OC };
enum class Environment { indoor, outdoor };

inline constexpr std::array<CameraTag, 6> kAllCameras = {CameraTag::IW, CameraTag::IP, CameraTag::IC,
                                                         CameraTag::OP, CameraTag::OE, CameraTag::OC};

std::string_view to_string(CameraTag tag);
CameraTag parse_camera(std::string_view s);
Environment environment(CameraTag tag);

enum class Split { train, val, test, unassigned };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ImageRecord {
  std::string id;
  std::string path;  // relative to the manifest directory, or absolute
  CameraTag camera = CameraTag::IW;
  Split split = Split::unassigned;
  int width = 0;
  int height = 0;
  bool operator==(const ImageRecord&) const = default;
};

struct Manifest {
  int version = 1;
  std::vector<ImageRecord> images;
  bool operator==(const Manifest&) const = default;
};

void validate(const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& m, const std::filesystem::path& path);
std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(std::string_view text);

/// Absolute image path for a record of a manifest stored at `manifest_path`.
std::filesystem::path image_path(const std::filesystem::path& manifest_path, const ImageRecord& r);
/// Labels live in `labels/<id>.txt` beside the manifest.
std::filesystem::path label_dir(const std::filesystem::path& manifest_path);
std::filesystem::path label_path(const std::filesystem::path& manifest_path, const std::string& id);

struct LabeledBox {
  int category_id = 0;
  NormBox box;
  std::optional<double> confidence;
  bool operator==(const LabeledBox&) const = default;
};

struct LabelSet {
  std::string image_id;
  std::vector<LabeledBox> boxes;
  bool operator==(const LabelSet&) const = default;
};

/// Parses "category cx cy w h [conf]" lines. Coordinates are snapped with
/// canonical() after parsing.
LabelSet parse_label_text(std::string_view text, bool has_confidence, std::string image_id = {});
LabelSet parse_label_file(const std::filesystem::path& path, bool has_confidence);
std::string format_labels(const LabelSet& ls, bool with_confidence);
void write_label_file(const LabelSet& ls, const std::filesystem::path& path, bool with_confidence);

struct SplitRatios {
  double train = 0.7, val = 0.2, test = 0.1;
};

/// Seeded shuffle, then floor(n * ratio) images per split in the order
/// train/val/test with the remainder going to train.
Manifest split(const Manifest& m, const SplitRatios& ratios, std::uint64_t seed);
void validate(const SplitRatios& r);

struct SyntheticOptions {
  int count = 8;
  double clutter = 0.3;
  std::uint64_t seed = 1;
  int size = 128;
};

/// Renders `count` images of two-tone ellipse animals over noise into
/// `out_dir/images`, ground truth into `out_dir/labels`, a provenance
/// sidecar beside each image, and `out_dir/manifest.json`. Returns the
/// manifest path.
std::filesystem::path gen_synthetic(const SyntheticOptions& opts, const std::filesystem::path& out_dir);

}  // namespace cowdet
