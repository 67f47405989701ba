#pragma once

// Motion estimation from bi-temporal feature pyramids.
//
// Per pyramid level: local cost volume between frame t and t+1 features,
// concatenated with a 1x1 projection of the t+1 features, projected to
// width d and passed through Motion Mamba blocks. Levels are fused coarse
// to fine (upsample, 1x1 conv, add) and a 3x3 conv produces the stride-8
// motion map in full-resolution pixels.

#include <array>
#include <cstdint>
#include <vector>

#include "mmtrack/box.hpp"
#include "mmtrack/motion_map.hpp"
#include "mmtrack/ssm.hpp"
#include "mmtrack/tensor.hpp"

namespace mmtrack {

inline constexpr std::array<int, 3> kPyramidStrides{8, 16, 32};

// Levels at strides 8, 16, 32; each (C, H/s, W/s).
struct FeaturePyramid {
  std::array<Tensor, 3> levels;

  void validate(std::size_t image_h, std::size_t image_w) const;
};

struct MotionNetConfig {
  int radius = 3;
  std::size_t width = 32;             // d
  std::size_t state = 8;              // N
  std::size_t blocks_per_level = 1;
  std::size_t feature_channels = 8;   // C per pyramid level
  std::size_t appearance_channels = 8;
  BlockBranches branches = BlockBranches::both;

  void validate() const;
  std::size_t cost_channels() const { return static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)); }
};

// output[(u+r)(2r+1) + (v+r), i, j] = <F_t[:, i, j], F_t1[:, i+u, j+v]> / sqrt(C),
// zero where (i+u, j+v) leaves the map. u is the row offset, v the column.
Tensor cross_correlation(const Tensor& f_t, const Tensor& f_t1, int radius);

// f32 -> up2 -> conv1x1 -> + f16 -> up2 -> conv1x1 -> + f8
Tensor pyramid_fuse(const Tensor& f8, const Tensor& f16, const Tensor& f32, const Tensor& w16,
                    const Tensor& b16, const Tensor& w8, const Tensor& b8);

// 3x3 conv from width d to the 2 motion channels.
Tensor motion_head(const Tensor& fused, const Tensor& weight, const Tensor& bias);

// Mean absolute difference over all cells and both channels.
Tensor motion_l1_loss(const Tensor& pred, const Tensor& gt);

// Ground-truth motion map: background flow averaged into stride cells, then
// each object present in both frames paints its center offset into every
// cell whose center lies inside its frame-t box, largest boxes first.
MotionMap gt_motion_map(const FrameAnnotations& ann_t, const FrameAnnotations& ann_t1,
                        const MotionMap& background_flow, std::size_t out_rows,
                        std::size_t out_cols, int stride = 8);

class MotionNet {
 public:
  struct Level {
    Tensor app_w, app_b;  // appearance projection of F_t1
    Tensor in_w, in_b;    // projection to width d
    std::vector<std::pair<SsmParams, SsmParams>> blocks;  // (vertical, horizontal)
  };

  MotionNet(MotionNetConfig config, std::uint64_t seed);

  const MotionNetConfig& config() const { return config_; }

  // (d, H', W') motion features of one pyramid level.
  Tensor level_motion_features(const Tensor& f_t, const Tensor& f_t1, std::size_t level) const;
  // (2, H/8, W/8) motion map tensor.
  Tensor forward(const FeaturePyramid& t, const FeaturePyramid& t1) const;
  MotionMap predict(const FeaturePyramid& t, const FeaturePyramid& t1) const;

  std::vector<NamedTensor> parameters() const;

  Level& level(std::size_t i) { return levels_.at(i); }
  Tensor& fuse_w16() { return fuse_w16_; }
  Tensor& fuse_w8() { return fuse_w8_; }
  Tensor& head_w() { return head_w_; }
  Tensor& head_b() { return head_b_; }

 private:
  MotionNetConfig config_;
  std::array<Level, 3> levels_;
  Tensor fuse_w16_, fuse_b16_, fuse_w8_, fuse_b8_;
  Tensor head_w_, head_b_;
};

struct MotionSample {
  FeaturePyramid t;
  FeaturePyramid t1;
  MotionMap gt;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean L1 per epoch
};

// Mini-batch SGD on the L1 motion loss. Batch items accumulate gradients
// in a fixed order, so a given seed always yields the same curve.
TrainResult train_motion(MotionNet& net, const std::vector<MotionSample>& dataset,
                         const SgdConfig& sgd, std::uint64_t seed);

// Mean L1 error of the network over a set of samples.
double evaluate_motion(const MotionNet& net, const std::vector<MotionSample>& dataset);

}  // namespace mmtrack
