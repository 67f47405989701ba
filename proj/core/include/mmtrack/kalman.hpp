#pragma once

// Constant-velocity Kalman filter over (cx, cy, area, aspect) in the SORT
// style. The state is (cx, cy, area, aspect, v_cx, v_cy, v_area); aspect
// (w / h) is modeled as constant.

#include <Eigen/Dense>

#include "mmtrack/box.hpp"

namespace mmtrack {

class KalmanBoxFilter {
 public:
  using StateVector = Eigen::Matrix<double, 7, 1>;
  using StateMatrix = Eigen::Matrix<double, 7, 7>;
  using MeasVector = Eigen::Matrix<double, 4, 1>;

  explicit KalmanBoxFilter(const Box& box);

  // Advances one frame and returns the predicted box.
  Box predict();
  void update(const Box& box);

  Box box() const { return to_box(mean_); }
  const StateVector& mean() const { return mean_; }
  const StateMatrix& covariance() const { return cov_; }

  static MeasVector to_measurement(const Box& box);
  static Box to_box(const StateVector& x);

 private:
  StateVector mean_;
  StateMatrix cov_;
  StateMatrix transition_;
  Eigen::Matrix<double, 4, 7> observation_;
  StateMatrix process_noise_;
  Eigen::Matrix<double, 4, 4> measurement_noise_;
};

}  // namespace mmtrack
