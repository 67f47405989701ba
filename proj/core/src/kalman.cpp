#include "mmtrack/kalman.hpp"

#include <algorithm>
#include <cmath>

namespace mmtrack {

KalmanBoxFilter::KalmanBoxFilter(const Box& box) {
  transition_ = StateMatrix::Identity();
  transition_(0, 4) = 1.0;
  transition_(1, 5) = 1.0;
  transition_(2, 6) = 1.0;

  observation_.setZero();
  for (int i = 0; i < 4; ++i) observation_(i, i) = 1.0;

  measurement_noise_ = Eigen::Matrix<double, 4, 4>::Identity();
  measurement_noise_(2, 2) = 10.0;
  measurement_noise_(3, 3) = 10.0;

  process_noise_ = StateMatrix::Identity();
  process_noise_(4, 4) = 0.01;
  process_noise_(5, 5) = 0.01;
  process_noise_(6, 6) = 1e-4;

  cov_ = StateMatrix::Identity() * 10.0;
  // Velocities are unobserved at birth.
  cov_(4, 4) = cov_(5, 5) = cov_(6, 6) = 1e4;

  mean_.setZero();
  mean_.head<4>() = to_measurement(box);
}

KalmanBoxFilter::MeasVector KalmanBoxFilter::to_measurement(const Box& box) {
  MeasVector z;
  z << box.cx, box.cy, box.w * box.h, box.w / box.h;
  return z;
}

Box KalmanBoxFilter::to_box(const StateVector& x) {
  const double area = std::max(x(2), 1e-6);
  const double aspect = std::max(x(3), 1e-6);
  const double w = std::sqrt(area * aspect);
  return {x(0), x(1), w, area / w};
}

Box KalmanBoxFilter::predict() {
  if (mean_(2) + mean_(6) <= 0.0) mean_(6) = 0.0;
  mean_ = transition_ * mean_;
  cov_ = transition_ * cov_ * transition_.transpose() + process_noise_;
  return box();
}

void KalmanBoxFilter::update(const Box& box) {
  const MeasVector residual = to_measurement(box) - observation_ * mean_;
  const Eigen::Matrix<double, 4, 4> innovation =
      observation_ * cov_ * observation_.transpose() + measurement_noise_;
  const Eigen::Matrix<double, 7, 4> gain =
      cov_ * observation_.transpose() * innovation.ldlt().solve(Eigen::Matrix<double, 4, 4>::Identity());
  mean_ += gain * residual;
  const StateMatrix ikh = StateMatrix::Identity() - gain * observation_;
  // Joseph form keeps the covariance symmetric positive semi-definite.
  cov_ = ikh * cov_ * ikh.transpose() + gain * measurement_noise_ * gain.transpose();
  cov_ = 0.5 * (cov_ + cov_.transpose());
}

}  // namespace mmtrack
