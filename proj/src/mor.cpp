#include "amd/mor.hpp"

#include <algorithm>

namespace amd {

double giou(const BBox& a, const BBox& b) {
  double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  double inter = std::max(0.0, iw) * std::max(0.0, ih);
  double uni = bbox_area(a) + bbox_area(b) - inter;
  double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  double cover = cw * ch;
  if (cover <= 0.0) return 0.0;  // degenerate enclosing box
  double iou = uni > 0.0 ? inter / uni : 0.0;
  return iou - (cover - uni) / cover;
}

}  // namespace amd
