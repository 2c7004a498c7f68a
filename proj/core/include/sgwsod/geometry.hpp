#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace sgwsod {

// Axis-aligned pixel box over half-open intervals [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 1;
  int y1 = 1;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  std::int64_t area() const {
    return static_cast<std::int64_t>(width()) * static_cast<std::int64_t>(height());
  }
  bool valid() const { return x0 >= 0 && y0 >= 0 && x1 > x0 && y1 > y0; }

  friend auto operator<=>(const Box&, const Box&) = default;
};

// Throws ValidationError unless the box has non-negative origin and positive area.
Box make_box(int x0, int y0, int x1, int y1);

// Converts a VOC-style inclusive box (xmin..xmax, ymin..ymax) to half-open.
Box box_from_inclusive(int xmin, int ymin, int xmax, int ymax);

std::int64_t intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);

// Smallest box containing both.
Box enclosing(const Box& a, const Box& b);

std::string to_string(const Box& b);

}  // namespace sgwsod
