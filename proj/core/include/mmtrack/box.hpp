#pragma once

#include <vector>

namespace mmtrack {

// Axis-aligned box in full-resolution pixels, center + size.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return cx - 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double right() const { return cx + 0.5 * w; }
  double bottom() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  static Box from_ltwh(double left, double top, double width, double height) {
    return {left + 0.5 * width, top + 0.5 * height, width, height};
  }

  bool operator==(const Box&) const = default;
};

// Intersection over union of two axis-aligned boxes; 0 for disjoint boxes.
double iou(const Box& a, const Box& b);

// One annotated object in one frame.
struct Annotation {
  int id = 0;
  Box box;
  int category = 0;
};

using FrameAnnotations = std::vector<Annotation>;

}  // namespace mmtrack
