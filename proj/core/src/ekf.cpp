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

#include "fuselocate/ekf.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/core.h>

#include "fuselocate/common.hpp"

namespace fuselocate::ekf {
namespace {

void require_finite(const StateVector& s, const char* what) {
  if (!s.allFinite()) throw NumericalError(fmt::format("non-finite {}", what));
}

Covariance symmetrize(const Covariance& p) { return 0.5 * (p + p.transpose()); }

}  // namespace

Matrix5 NoiseConfig::default_q() {
  Matrix5 q = Matrix5::Zero();
  q.diagonal() << 1e-4, 1e-4, 1e-5, 1e-2, 1e-3;
  return q;
}

Covariance FilterInit::default_initial_covariance() {
  const double heading_sigma = 10.0 * kPi / 180.0;
  Covariance p = Covariance::Zero();
  p.diagonal() << 1.0, 1.0, heading_sigma * heading_sigma, 0.25, 0.01;
  return p;
}

Eigen::Matrix<double, 2, 5> observation_matrix() {
  Eigen::Matrix<double, 2, 5> h = Eigen::Matrix<double, 2, 5>::Zero();
  h(0, kX) = 1.0;
  h(1, kY) = 1.0;
  return h;
}

StateVector transition(const StateVector& s, const ControlInput& u, double dt) {
  StateVector out;
  out[kX] = s[kX] + s[kV] * dt * std::cos(s[kTheta]);
  out[kY] = s[kY] + s[kV] * dt * std::sin(s[kTheta]);
  out[kTheta] = normalize_angle(s[kTheta] + s[kOmega] * dt);
  out[kV] = s[kV] + u.a * dt;
  out[kOmega] = u.omega_meas;
  return out;
}

Matrix5 jacobian_f(const StateVector& s, double dt) {
  const double c = std::cos(s[kTheta]);
  const double sn = std::sin(s[kTheta]);
  Matrix5 f = Matrix5::Zero();
  f(kX, kX) = 1.0;
  f(kX, kTheta) = -s[kV] * dt * sn;
  f(kX, kV) = dt * c;
  f(kY, kY) = 1.0;
  f(kY, kTheta) = s[kV] * dt * c;
  f(kY, kV) = dt * sn;
  f(kTheta, kTheta) = 1.0;
  f(kTheta, kOmega) = dt;
  f(kV, kV) = 1.0;
  // The yaw rate is overwritten by the measurement: its row stays zero.
  return f;
}

Prediction predict(const StateVector& state, const Covariance& p,
                   const ControlInput& u, double dt, const Matrix5& q_per_second) {
  if (!(dt > 0.0)) throw InvalidArgument(fmt::format("predict needs dt > 0, got {}", dt));
  require_finite(state, "state");
  if (!std::isfinite(u.a) || !std::isfinite(u.omega_meas)) {
    throw NumericalError("non-finite control input");
  }
  if (!p.allFinite()) throw NumericalError("non-finite covariance");
  const Matrix5 f = jacobian_f(state, dt);
  Prediction out;
  out.state = transition(state, u, dt);
  out.covariance = symmetrize(f * p * f.transpose() + q_per_second * dt);
  return out;
}

UpdateResult update(const StateVector& state, const Covariance& p,
                    const Eigen::Vector2d& z, const Matrix2& r,
                    std::optional<double> gate_chi2) {
  require_finite(state, "state");
  if (!z.allFinite()) throw NumericalError("non-finite observation");
  const Eigen::Matrix<double, 2, 5> h = observation_matrix();
  const Matrix2 s = h * p * h.transpose() + r;

  const Eigen::SelfAdjointEigenSolver<Matrix2> eig(0.5 * (s + s.transpose()));
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || !(hi > 0.0) || lo / hi < 1e-14) {
    throw NumericalError(fmt::format(
        "innovation covariance HPH^T + R is singular (eigenvalues {:.3e}, {:.3e})",
        lo, hi));
  }
  const Matrix2 s_inv = s.inverse();

  UpdateResult out;
  out.innovation = z - h * state;
  out.mahalanobis2 = out.innovation.dot(s_inv * out.innovation);
  if (gate_chi2 && out.mahalanobis2 > *gate_chi2) {
    out.state = state;
    out.covariance = p;
    out.accepted = false;
    return out;
  }
  const Eigen::Matrix<double, 5, 2> k = p * h.transpose() * s_inv;
  out.state = state + k * out.innovation;
  out.state[kTheta] = normalize_angle(out.state[kTheta]);
  out.covariance = symmetrize((Matrix5::Identity() - k * h) * p);
  out.accepted = true;
  return out;
}

Trajectory FuseResult::trajectory() const {
  std::vector<TimedPose> poses;
  poses.reserve(samples.size());
  for (const auto& s : samples) {
    poses.push_back({s.t, Pose2D(s.state[kX], s.state[kY], s.state[kTheta])});
  }
  return Trajectory(std::move(poses));
}

FuseResult fuse_run(std::span<const ImuSample> imu,
                    std::span<const PositionObservation> observations,
                    const FilterInit& init, const NoiseConfig& noise) {
  if (imu.empty()) throw InvalidArgument("fusion needs an IMU stream");
  for (std::size_t k = 1; k < imu.size(); ++k) {
    if (!(imu[k].t > imu[k - 1].t)) {
      throw InvalidArgument(fmt::format("IMU timestamps out of order at sample {}", k));
    }
  }
  for (std::size_t i = 1; i < observations.size(); ++i) {
    if (observations[i].t < observations[i - 1].t) {
      throw InvalidArgument(fmt::format("observation timestamps out of order at {}", i));
    }
  }

  double nominal_dt = 0.0;
  if (imu.size() > 1) {
    std::vector<double> steps;
    steps.reserve(imu.size() - 1);
    for (std::size_t k = 1; k < imu.size(); ++k) steps.push_back(imu[k].t - imu[k - 1].t);
    std::nth_element(steps.begin(), steps.begin() + steps.size() / 2, steps.end());
    nominal_dt = steps[steps.size() / 2];
  }
  const double half_period = 0.5 * nominal_dt;
  if (!observations.empty() &&
      (observations.front().t < imu.front().t - half_period ||
       observations.back().t > imu.back().t + half_period)) {
    throw InvalidArgument("observation timestamps fall outside the IMU span");
  }

  FuseResult result;
  result.samples.reserve(imu.size());
  StateVector x = init.state;
  x[kTheta] = normalize_angle(x[kTheta]);
  Covariance p = init.covariance;
  std::size_t next_obs = 0;

  for (std::size_t k = 0; k < imu.size(); ++k) {
    if (k > 0) {
      const double dt = imu[k].t - imu[k - 1].t;
      if (dt > 10.0 * nominal_dt) {
        FilterEvent gap;
        gap.kind = FilterEvent::Kind::kImuGap;
        gap.t = imu[k].t;
        gap.message = fmt::format("IMU gap of {:.6f} s before t = {:.6f}", dt, imu[k].t);
        result.events.push_back(std::move(gap));
      }
      const Prediction pred = predict(x, p, control_from(imu[k]), dt, noise.q_per_second);
      x = pred.state;
      p = pred.covariance;
    }
    while (next_obs < observations.size() &&
           observations[next_obs].t <= imu[k].t + half_period) {
      const PositionObservation& obs = observations[next_obs++];
      const UpdateResult upd = update(
          x, p, obs.z,
          obs.source == ObservationSource::kScanMatch ? noise.r_scan_match : noise.r,
          noise.gate_chi2);
      FilterEvent ev;
      ev.kind = FilterEvent::Kind::kUpdate;
      ev.t = obs.t;
      ev.accepted = upd.accepted;
      ev.innovation_norm = upd.innovation.norm();
      ev.mahalanobis2 = upd.mahalanobis2;
      ev.source = obs.source;
      result.events.push_back(std::move(ev));
      x = upd.state;
      p = upd.covariance;
    }
    result.samples.push_back({imu[k].t, x, p(kX, kX), p(kY, kY)});
  }
  result.final_covariance = p;
  return result;
}

}  // namespace fuselocate::ekf
