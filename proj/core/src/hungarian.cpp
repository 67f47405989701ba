#include "mmtrack/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmtrack {

namespace {

// Assigns every row of an n x m matrix with n <= m. Returns col_of_row.
std::vector<std::size_t> solve_wide(const CostMatrix& a) {
  const std::size_t n = a.rows, m = a.cols;
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials and matching as in the classic formulation;
  // index 0 is the virtual source column.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> row_of_col(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of_col[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of_row(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (row_of_col[j] != 0) col_of_row[row_of_col[j] - 1] = j - 1;
  return col_of_row;
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  if (cost.values.size() != cost.rows * cost.cols)
    throw std::invalid_argument("hungarian: matrix storage does not match its shape");
  for (double c : cost.values)
    if (!std::isfinite(c)) throw std::invalid_argument("hungarian: non-finite cost");

  Assignment out;
  if (cost.rows == 0 || cost.cols == 0) {
    for (std::size_t r = 0; r < cost.rows; ++r) out.unassigned_rows.push_back(r);
    for (std::size_t c = 0; c < cost.cols; ++c) out.unassigned_cols.push_back(c);
    return out;
  }

  const bool transposed = cost.rows > cost.cols;
  CostMatrix work = cost;
  if (transposed) {
    work = CostMatrix(cost.cols, cost.rows);
    for (std::size_t r = 0; r < cost.rows; ++r)
      for (std::size_t c = 0; c < cost.cols; ++c) work(c, r) = cost(r, c);
  }
  const auto match = solve_wide(work);
  for (std::size_t i = 0; i < match.size(); ++i) {
    if (transposed)
      out.pairs.emplace_back(match[i], i);
    else
      out.pairs.emplace_back(i, match[i]);
  }
  std::sort(out.pairs.begin(), out.pairs.end());

  std::vector<char> row_used(cost.rows, 0), col_used(cost.cols, 0);
  for (const auto& [r, c] : out.pairs) {
    row_used[r] = 1;
    col_used[c] = 1;
    out.total_cost += cost(r, c);
  }
  for (std::size_t r = 0; r < cost.rows; ++r)
    if (!row_used[r]) out.unassigned_rows.push_back(r);
  for (std::size_t c = 0; c < cost.cols; ++c)
    if (!col_used[c]) out.unassigned_cols.push_back(c);
  return out;
}

}  // namespace mmtrack
