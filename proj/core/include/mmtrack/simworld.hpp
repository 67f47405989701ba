#pragma once

// Synthetic aerial scenes: ground objects with their own motion seen by a
// camera that pans and rotates. Everything is analytic, so camera flow,
// object offsets and feature pyramids are known exactly.

#include <cstdint>
#include <string>
#include <vector>

#include "mmtrack/blur.hpp"
#include "mmtrack/box.hpp"
#include "mmtrack/motion_map.hpp"
#include "mmtrack/motionnet.hpp"
#include "mmtrack/tracker.hpp"

namespace mmtrack {

// One frame-to-frame camera step: p' = R(theta) (p - c) + c + (tx, ty),
// with c the image center.
struct CameraStep {
  double tx = 0.0;
  double ty = 0.0;
  double theta = 0.0;
};

// Rigid image transform p' = R p + t.
struct Rigid {
  double cos_t = 1.0;
  double sin_t = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  void apply(double x, double y, double& ox, double& oy) const {
    ox = cos_t * x - sin_t * y + tx;
    oy = sin_t * x + cos_t * y + ty;
  }
  Rigid then(const Rigid& next) const;  // next after this
  Rigid inverse() const;
  static Rigid from_step(const CameraStep& step, double cx, double cy);
};

enum class CameraKind { still, pan, rotate };

struct CameraSchedule {
  CameraKind kind = CameraKind::still;
  double max_translation = 12.0;  // px/frame, pan
  double min_translation = 4.0;
  double max_rotation = 0.01;     // rad/frame, rotate
  double min_rotation = 0.01;
  double heading_drift = 0.05;    // pan direction random walk, rad/frame
};

struct SceneConfig {
  std::string name = "custom";
  std::size_t height = 256;
  std::size_t width = 256;
  std::size_t n_objects = 15;
  double speed_min = 0.0;  // px/frame, object's own motion
  double speed_max = 3.0;
  double turn_std = 0.0;   // heading random walk, rad/frame
  double size_min = 12.0;
  double size_max = 24.0;
  double spawn_prob = 0.3;  // per missing object per frame
  int categories = 3;
  CameraSchedule camera;
  // Explicit per-step schedule; overrides `camera` when non-empty.
  std::vector<CameraStep> camera_steps;
  double box_noise = 1.0;
  BlurModel blur;
  EvidenceModel evidence;
  double false_positive_rate = 0.0;  // probability of one clutter box per frame
  double drop_threshold = 0.05;
  std::size_t feature_channels = 8;
  double blob_gain = 3.0;
  double blob_sigma = 0.5;  // Gaussian sigma as a fraction of sqrt(box area)
  // Rescale every cell's channel vector to unit RMS before output.
  bool normalize_features = false;
  std::uint64_t seed = 1;

  void validate() const;
};

// A simulated detector output with what the score head may inspect.
struct SimDetection {
  Detection det;
  Evidence evidence;
  int gt_id = -1;  // -1 for injected false positives
  double speed = 0.0;
};

struct SequenceData {
  SceneConfig config;
  std::vector<CameraStep> camera;      // camera[t]: frame t -> t + 1
  std::vector<Rigid> poses;            // world (frame 0) -> image of frame t
  std::vector<FrameAnnotations> annotations;
  std::vector<std::vector<SimDetection>> detections;

  std::size_t frame_count() const { return annotations.size(); }
  std::vector<FrameDetections> plain_detections() const;
};

// Named benchmark scenarios: still, pan, rotate, pan+blur.
std::vector<std::string> scenario_names();
SceneConfig scenario(const std::string& name, std::uint64_t seed);

SequenceData generate_sequence(const SceneConfig& cfg, std::size_t n_frames);

// Mean detection score for an apparent speed.
double blur_score(double speed, const BlurModel& model);

// Apparent speed of an annotated object at frame t (px/frame).
double apparent_speed(const SequenceData& seq, std::size_t t, int id);

// Detections for every frame, drawn from the config's noise, blur and
// false-positive models with its own seed stream.
std::vector<std::vector<SimDetection>> detector_sim(const SequenceData& seq, const SceneConfig& cfg);

// Full-resolution camera flow from frame t to t + 1 (stride-1 MotionMap).
MotionMap camera_flow(const SequenceData& seq, std::size_t t);

// Analytic pyramid for frame t: camera-warped background texture plus one
// Gaussian blob per object, C channels per level.
FeaturePyramid rasterize_features(const SequenceData& seq, std::size_t t);

// Exact motion map from frame t to t + 1.
MotionMap exact_motion_map(const SequenceData& seq, std::size_t t);

// Training samples for every consecutive pair, optionally every k-th pair.
std::vector<MotionSample> motion_samples(const SequenceData& seq, std::size_t every = 1);

}  // namespace mmtrack
