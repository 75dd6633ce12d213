#include "cowdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cowdet/error.hpp"

namespace cowdet {

bool is_valid(const NormBox& b) {
  if (!std::isfinite(b.cx) || !std::isfinite(b.cy) || !std::isfinite(b.w) || !std::isfinite(b.h))
    return false;
  if (b.cx < 0 || b.cx > 1 || b.cy < 0 || b.cy > 1) return false;
  if (!(b.w > 0) || !(b.h > 0)) return false;
  if (b.cx - b.w / 2 < -kNormBoxSlack || b.cx + b.w / 2 > 1 + kNormBoxSlack) return false;
  if (b.cy - b.h / 2 < -kNormBoxSlack || b.cy + b.h / 2 > 1 + kNormBoxSlack) return false;
  return true;
}

bool is_valid(const AbsBox& b) {
  return std::isfinite(b.x0) && std::isfinite(b.y0) && std::isfinite(b.x1) &&
         std::isfinite(b.y1) && b.x0 < b.x1 && b.y0 < b.y1;
}

void require_valid(const AbsBox& b) {
  if (!is_valid(b)) throw Error("degenerate box");
}

void require_valid(const NormBox& b) {
  if (!is_valid(b)) throw Error("degenerate box");
}

double iou(const AbsBox& a, const AbsBox& b) {
  require_valid(a);
  require_valid(b);
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  if (inter <= 0) return 0.0;
  if (a == b) return 1.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> nms_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (dets[i].score != dets[j].score) return dets[i].score > dets[j].score;
    return dets[i].box.area() < dets[j].box.area();
  });
  return order;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh) {
  std::vector<Detection> kept;
  for (std::size_t idx : nms_order(dets)) {
    const Detection& d = dets[idx];
    bool keep = true;
    for (const Detection& k : kept) {
      if (k.category_id == d.category_id && iou(k.box, d.box) >= iou_thresh) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(d);
  }
  return kept;
}

AbsBox norm_to_abs(const NormBox& nb, double width, double height) {
  if (!(width > 0) || !(height > 0)) throw Error("image size must be positive");
  AbsBox ab{(nb.cx - nb.w / 2) * width, (nb.cy - nb.h / 2) * height,
            (nb.cx + nb.w / 2) * width, (nb.cy + nb.h / 2) * height};
  require_valid(ab);
  return ab;
}

NormBox abs_to_norm(const AbsBox& ab, double width, double height) {
  if (!(width > 0) || !(height > 0)) throw Error("image size must be positive");
  require_valid(ab);
  return NormBox{(ab.x0 + ab.x1) / 2 / width, (ab.y0 + ab.y1) / 2 / height,
                 (ab.x1 - ab.x0) / width, (ab.y1 - ab.y0) / height};
}

std::optional<NormBox> clip_box(const NormBox& nb) {
  if (!(nb.w > 0) || !(nb.h > 0)) return std::nullopt;
  const double x0 = std::max(0.0, nb.cx - nb.w / 2);
  const double x1 = std::min(1.0, nb.cx + nb.w / 2);
  const double y0 = std::max(0.0, nb.cy - nb.h / 2);
  const double y1 = std::min(1.0, nb.cy + nb.h / 2);
  if (!(x1 > x0) || !(y1 > y0)) return std::nullopt;
  const double kept = (x1 - x0) * (y1 - y0);
  if (kept < kClipKeepFraction * nb.w * nb.h) return std::nullopt;
  // Fully inside: return the input untouched rather than re-deriving it.
  if (x0 == nb.cx - nb.w / 2 && x1 == nb.cx + nb.w / 2 && y0 == nb.cy - nb.h / 2 &&
      y1 == nb.cy + nb.h / 2)
    return nb;
  return NormBox{(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
}

double canonical(double v) {
  constexpr double kGrid = 4294967296.0;  // 2^32
  return std::round(v * kGrid) / kGrid;
}

NormBox canonical(const NormBox& nb) {
  return NormBox{canonical(nb.cx), canonical(nb.cy), canonical(nb.w), canonical(nb.h)};
}

}  // namespace cowdet
