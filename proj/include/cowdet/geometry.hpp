#pragma once

#include <optional>
#include <vector>

namespace cowdet {

/// Center-form box in fractions of image width/height.
struct NormBox {
  double cx = 0, cy = 0, w = 0, h = 0;
  bool operator==(const NormBox&) const = default;
};

/// Corner-form box in pixels.
struct AbsBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool operator==(const AbsBox&) const = default;
};

struct Detection {
  AbsBox box;
  double score = 0;
  int category_id = 0;
  bool operator==(const Detection&) const = default;
};

/// Tolerance on the unit-square containment check for NormBox.
inline constexpr double kNormBoxSlack = 1e-6;

bool is_valid(const NormBox& b);
bool is_valid(const AbsBox& b);

/// Throws Error("degenerate box") when the box has zero or negative area.
void require_valid(const AbsBox& b);
void require_valid(const NormBox& b);

/// Intersection over union. Touching boxes have IoU exactly 0.
double iou(const AbsBox& a, const AbsBox& b);

/// Greedy category-aware suppression. Candidates are visited by score
/// descending, then smaller area, then input order; a candidate survives
/// when its IoU with every survivor of the same category is below
/// `iou_thresh`. Output is in visiting order.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh);

/// Visiting order used by nms(), exposed for tests and for eval tie-breaks.
std::vector<std::size_t> nms_order(const std::vector<Detection>& dets);

AbsBox norm_to_abs(const NormBox& nb, double width, double height);
NormBox abs_to_norm(const AbsBox& ab, double width, double height);

/// Fraction of the original area a clipped box must keep to survive.
inline constexpr double kClipKeepFraction = 0.25;

/// Intersects with the unit square; none when less than a quarter of the
/// original area remains.
std::optional<NormBox> clip_box(const NormBox& nb);

/// Snaps every field to a multiple of 2^-32. On that grid 1 - x is exact,
/// which makes mirror flips exact involutions.
NormBox canonical(const NormBox& nb);
double canonical(double v);

}  // namespace cowdet
