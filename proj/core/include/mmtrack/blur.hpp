#pragma once

// Motion-blur detection model shared by the simulated detector and the
// score-head experiment.

#include <random>

namespace mmtrack {

// Mean detection score falls linearly with apparent speed and saturates:
//   clamp(s_base - beta * min(v, v_sat) / v_sat, s_min, 1)
struct BlurModel {
  double s_base = 0.95;
  double beta = 0.55;
  double v_sat = 40.0;
  double s_min = 0.05;
  double score_noise = 0.05;

  void validate() const;
  double mean_score(double speed) const;
  // mean_score plus Gaussian noise, clamped to [0, 1].
  double sample_score(double speed, std::mt19937_64& rng) const;
};

// What a detection exposes to a learned score head.
struct Evidence {
  double strength = 0.0;  // appearance response, weakened by blur
  double streak = 0.0;    // elongation along the motion direction
  double contrast = 0.0;  // local contrast against the background
};

struct EvidenceModel {
  BlurModel blur;
  double strength_noise = 0.12;
  double streak_noise = 0.12;
  double contrast_noise = 0.15;
  double negative_strength = 0.35;
  double negative_streak = 0.3;  // scale of the half-normal clutter streak
  double positive_contrast = 0.6;
  double negative_contrast = 0.45;
};

Evidence positive_evidence(double speed, const EvidenceModel& model, std::mt19937_64& rng);
Evidence negative_evidence(const EvidenceModel& model, std::mt19937_64& rng);

}  // namespace mmtrack
