#include "mmtrack/blur.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmtrack {

void BlurModel::validate() const {
  if (!(v_sat > 0.0)) throw std::invalid_argument("blur: v_sat must be > 0");
  if (s_min < 0.0 || s_min > 1.0 || s_base < 0.0 || s_base > 1.0)
    throw std::invalid_argument("blur: scores must lie in [0, 1]");
  if (score_noise < 0.0) throw std::invalid_argument("blur: score noise must be >= 0");
}

double BlurModel::mean_score(double speed) const {
  const double v = std::min(std::max(speed, 0.0), v_sat);
  return std::clamp(s_base - beta * v / v_sat, s_min, 1.0);
}

double BlurModel::sample_score(double speed, std::mt19937_64& rng) const {
  const double mu = mean_score(speed);
  if (score_noise == 0.0) return mu;
  std::normal_distribution<double> noise(0.0, score_noise);
  return std::clamp(mu + noise(rng), 0.0, 1.0);
}

Evidence positive_evidence(double speed, const EvidenceModel& model, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double blur = std::min(std::max(speed, 0.0), model.blur.v_sat) / model.blur.v_sat;
  Evidence e;
  e.strength = model.blur.mean_score(speed) + model.strength_noise * n01(rng);
  e.streak = blur + model.streak_noise * n01(rng);
  e.contrast = model.positive_contrast + model.contrast_noise * n01(rng);
  return e;
}

Evidence negative_evidence(const EvidenceModel& model, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Evidence e;
  e.strength = model.negative_strength + model.strength_noise * n01(rng);
  e.streak = std::abs(model.negative_streak * n01(rng)) + model.streak_noise * n01(rng);
  e.contrast = model.negative_contrast + model.contrast_noise * n01(rng);
  return e;
}

}  // namespace mmtrack
