#include "sgwsod/geometry.hpp"

#include <algorithm>
#include <sstream>

#include "sgwsod/errors.hpp"

namespace sgwsod {

Box make_box(int x0, int y0, int x1, int y1) {
  Box b{x0, y0, x1, y1};
  if (!b.valid()) {
    throw ValidationError("invalid box " + to_string(b) + ": need x0,y0 >= 0 and positive area");
  }
  return b;
}

Box box_from_inclusive(int xmin, int ymin, int xmax, int ymax) {
  return make_box(xmin, ymin, xmax + 1, ymax + 1);
}

std::int64_t intersection_area(const Box& a, const Box& b) {
  const std::int64_t w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const std::int64_t h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (w <= 0 || h <= 0) return 0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  const std::int64_t inter = intersection_area(a, b);
  if (inter == 0) return 0.0;
  const std::int64_t uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Box enclosing(const Box& a, const Box& b) {
  return Box{std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
             std::max(a.y1, b.y1)};
}

std::string to_string(const Box& b) {
  std::ostringstream os;
  os << '(' << b.x0 << ',' << b.y0 << ',' << b.x1 << ',' << b.y1 << ')';
  return os.str();
}

}  // namespace sgwsod
