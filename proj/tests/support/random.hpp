#pragma once

#include <cstdint>
#include <random>

#include "mmtrack/tensor.hpp"

namespace mmtrack::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Fixed random weights used to turn any tensor into a scalar loss, so that
// every output element gets a distinct gradient.
inline Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor w = random_tensor(t.shape(), rng, -1.0, 1.0, false);
  return sum(mul(t, w));
}

}  // namespace mmtrack::testing
