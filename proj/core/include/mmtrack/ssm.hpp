#pragma once

// Selective state-space scan and the bi-directional Motion Mamba block.
//
// Feature maps are stored channel-first as (d, H, W). Every pixel's
// d-vector is one token; a vertical scan treats each column as an
// independent length-H sequence (top to bottom), a horizontal scan treats
// each row as a length-W sequence (left to right).
//
// Per channel c with diagonal state of size N:
//   A_c    = -exp(a_log_c)                (strictly negative)
//   dt     = softplus(W2 silu(W1 x + b1) + b2)   per token, per channel
//   h_t    = exp(A_c dt) * h_{t-1} + B_c dt x_{t,c}
//   y_t,c  = <C_c, h_t> + D_c x_{t,c}

#include <cstdint>
#include <string>
#include <vector>

#include "mmtrack/tensor.hpp"

namespace mmtrack {

enum class ScanDirection { vertical, horizontal };

struct SsmParams {
  std::size_t width = 0;  // d
  std::size_t state = 0;  // N
  Tensor a_log;           // (d, N)
  Tensor b;               // (d, N)
  Tensor c;               // (d, N)
  Tensor d_skip;          // (d)
  Tensor dt_w1;           // (d, d, 1, 1)
  Tensor dt_b1;           // (d)
  Tensor dt_w2;           // (d, d, 1, 1)
  Tensor dt_b2;           // (d)

  // a_log starts at log(1..N) per channel; dt_b2 is set so the initial step
  // size sits near 0.05; everything else is uniform(+-1/sqrt(fan_in)).
  static SsmParams init(std::size_t width, std::size_t state, const std::string& prefix,
                        std::uint64_t seed);
  static SsmParams zeros(std::size_t width, std::size_t state, const std::string& prefix);

  std::vector<NamedTensor> parameters() const;
  Tensor realized_a() const;  // -exp(a_log)
  void validate() const;

  std::string prefix;
};

// Per-token, per-channel positive step sizes for a (d, H, W) map.
Tensor dt_head(const Tensor& feature, const SsmParams& params);

// Differentiable scan kernel along one axis of a (d, H, W) map with an
// explicitly supplied step-size map. Gradients flow into x, dt, A, B, C, D.
Tensor scan_kernel(const Tensor& x, const Tensor& dt, const Tensor& a, const Tensor& b,
                   const Tensor& c, const Tensor& d_skip, ScanDirection dir);

// tokens: (L, d) -> (L, d)
Tensor selective_scan(const Tensor& tokens, const SsmParams& params);

// feature: (d, H, W) -> (d, H, W)
Tensor directional_ssm(const Tensor& feature, ScanDirection dir, const SsmParams& params);

// Which scan branches a block applies. `none` keeps only the shortcut.
enum class BlockBranches { none, vertical, horizontal, both };

// output = V-SSM(x) + H-SSM(x) + x, restricted to the enabled branches.
Tensor motion_mamba_block(const Tensor& feature, const SsmParams& v_params,
                          const SsmParams& h_params,
                          BlockBranches branches = BlockBranches::both);

}  // namespace mmtrack
