/*
 * Copyright 2026 The FuseLocate Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FUSELOCATE_EKF_HPP_
#define FUSELOCATE_EKF_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fuselocate/geometry.hpp"
#include "fuselocate/sensors.hpp"

namespace fuselocate::ekf {

// [x y theta v omega]
using StateVector = Eigen::Matrix<double, 5, 1>;
using Covariance = Eigen::Matrix<double, 5, 5>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;
using Matrix2 = Eigen::Matrix2d;

enum StateIndex : int { kX = 0, kY = 1, kTheta = 2, kV = 3, kOmega = 4 };

inline StateVector make_state(double x, double y, double theta, double v,
                              double omega) {
  StateVector s;
  s << x, y, normalize_angle(theta), v, omega;
  return s;
}

struct ControlInput {
  double a = 0.0;           // measured forward acceleration
  double omega_meas = 0.0;  // measured yaw rate
};

inline ControlInput control_from(const ImuSample& imu) {
  return {imu.accel.x(), imu.gyro.z()};
}

struct NoiseConfig {
  // Process noise per second of propagation; scaled by dt in predict().
  Matrix5 q_per_second = default_q();
  Matrix2 r = 0.8 * 0.8 * Matrix2::Identity();
  // Used for ScanMatch observations.
  Matrix2 r_scan_match = 0.1 * 0.1 * Matrix2::Identity();
  // Mahalanobis gate on the squared innovation distance; off when empty.
  std::optional<double> gate_chi2;

  static Matrix5 default_q();
};

inline constexpr double kChi2Gate2Dof99 = 9.21;

enum class ObservationSource { kWiFi, kScanMatch };

struct PositionObservation {
  double t = 0.0;
  Point2 z = Point2::Zero();
  ObservationSource source = ObservationSource::kWiFi;
};

// The 2x5 position selector.
Eigen::Matrix<double, 2, 5> observation_matrix();

// Constant-acceleration transition: position advances with the previous
// speed and heading, heading with the previous yaw rate, speed with the
// measured acceleration, and the yaw rate is replaced by the measurement.
StateVector transition(const StateVector& state, const ControlInput& u, double dt);

// Analytic Jacobian of transition() with respect to the state.
Matrix5 jacobian_f(const StateVector& state, double dt);

struct Prediction {
  StateVector state;
  Covariance covariance;
};

Prediction predict(const StateVector& state, const Covariance& p,
                   const ControlInput& u, double dt, const Matrix5& q_per_second);

struct UpdateResult {
  StateVector state;
  Covariance covariance;
  Eigen::Vector2d innovation = Eigen::Vector2d::Zero();
  double mahalanobis2 = 0.0;
  bool accepted = true;
};

UpdateResult update(const StateVector& state, const Covariance& p,
                    const Eigen::Vector2d& z, const Matrix2& r,
                    std::optional<double> gate_chi2 = std::nullopt);

struct FilterInit {
  StateVector state = StateVector::Zero();
  Covariance covariance = default_initial_covariance();

  static Covariance default_initial_covariance();
};

struct FusedSample {
  double t = 0.0;
  StateVector state;
  double p_xx = 0.0;
  double p_yy = 0.0;
};

struct FilterEvent {
  enum class Kind { kUpdate, kImuGap } kind = Kind::kUpdate;
  double t = 0.0;
  bool accepted = false;
  double innovation_norm = 0.0;
  double mahalanobis2 = 0.0;
  ObservationSource source = ObservationSource::kWiFi;
  std::string message;
};

struct FuseResult {
  std::vector<FusedSample> samples;
  std::vector<FilterEvent> events;
  Covariance final_covariance;

  Trajectory trajectory() const;
};

// Predicts at every IMU sample and applies each observation once its
// timestamp is reached (within half an IMU period), before the next predict.
// Emits the posterior at every IMU timestamp.
FuseResult fuse_run(std::span<const ImuSample> imu,
                    std::span<const PositionObservation> observations,
                    const FilterInit& init, const NoiseConfig& noise);

}  // namespace fuselocate::ekf

#endif  // FUSELOCATE_EKF_HPP_
