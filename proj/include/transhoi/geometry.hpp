#pragma once

#include <array>
#include <string>

namespace transhoi {

// Axis-aligned box in pixels, upper-left (x1, y1) to lower-right (x2, y2).
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  double diagonal() const;

  bool operator==(const BBox&) const = default;
};

// Throws GeometryError unless x2 > x1, y2 > y1 and all coordinates are finite and >= 0.
void validate(const BBox& b, const std::string& what = "box");

bool is_valid(const BBox& b);

double intersection_area(const BBox& a, const BBox& b);

// Intersection over union; both boxes are validated.
double iou(const BBox& a, const BBox& b);

}  // namespace transhoi
