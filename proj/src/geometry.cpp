#include "transhoi/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "transhoi/error.hpp"

namespace transhoi {

double BBox::diagonal() const { return std::hypot(width(), height()); }

bool is_valid(const BBox& b) {
  for (double v : {b.x1, b.y1, b.x2, b.y2})
    if (!std::isfinite(v) || v < 0) return false;
  return b.x2 > b.x1 && b.y2 > b.y1;
}

void validate(const BBox& b, const std::string& what) {
  if (is_valid(b)) return;
  std::ostringstream os;
  os << what << " [" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2
     << "] is degenerate or out of range";
  throw GeometryError(os.str());
}

double intersection_area(const BBox& a, const BBox& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0 || h <= 0) return 0;
  return w * h;
}

double iou(const BBox& a, const BBox& b) {
  validate(a);
  validate(b);
  const double inter = intersection_area(a, b);
  return inter / (a.area() + b.area() - inter);
}

}  // namespace transhoi
