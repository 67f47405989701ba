#pragma once

#include <cstddef>
#include <vector>

#include "mmtrack/tensor.hpp"

namespace mmtrack {

// Dense 2-channel displacement field on a grid of `stride`-pixel cells.
// Channel 0 is horizontal motion (dx), channel 1 vertical (dy), both in
// full-resolution pixels. Storage is channel-first: (2, rows, cols).
// A stride of 1 makes this a full-resolution flow field.
struct MotionMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  int stride = 8;
  std::vector<double> values;

  MotionMap() = default;
  MotionMap(std::size_t rows, std::size_t cols, int stride)
      : rows(rows), cols(cols), stride(stride), values(2 * rows * cols, 0.0) {}

  double& dx(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double& dy(std::size_t r, std::size_t c) { return values[rows * cols + r * cols + c]; }
  double dx(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double dy(std::size_t r, std::size_t c) const { return values[rows * cols + r * cols + c]; }

  Tensor to_tensor() const { return Tensor::from({2, rows, cols}, values); }
  static MotionMap from_tensor(const Tensor& t, int stride);

  bool operator==(const MotionMap&) const = default;
};

inline MotionMap MotionMap::from_tensor(const Tensor& t, int stride) {
  MotionMap m(t.dim(1), t.dim(2), stride);
  m.values.assign(t.data().begin(), t.data().end());
  return m;
}

}  // namespace mmtrack
