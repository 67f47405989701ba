#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace mmtrack {

// Row-major n x m cost matrix.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows(rows), cols(cols), values(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, col), sorted by row
  std::vector<std::size_t> unassigned_rows;
  std::vector<std::size_t> unassigned_cols;
  double total_cost = 0.0;
};

// Minimum-cost one-to-one assignment of min(n, m) pairs (shortest
// augmenting path with potentials, O(n^2 m)). Rejects non-finite costs.
Assignment hungarian(const CostMatrix& cost);

}  // namespace mmtrack
