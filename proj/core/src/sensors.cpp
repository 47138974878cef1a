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

#include "fuselocate/sensors.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

namespace fuselocate {

std::size_t RssiVector::missing_count() const {
  return static_cast<std::size_t>(std::count_if(
      values.begin(), values.end(),
      [](double v) { return v <= kMissingRssiDbm; }));
}

int count_walls(const OccupancyGrid& grid, const Point2& from,
                const Point2& to) {
  int walls = 0;
  bool in_wall = false;
  traverse_segment(grid.geometry(), from, to,
                   [&](const CellIndex& c, double) {
                     const bool wall = grid.at(c) == CellState::kWall;
                     if (wall && !in_wall) ++walls;
                     in_wall = wall;
                     return true;
                   });
  // The transmitter's own mounting wall does not attenuate.
  if (in_wall && grid.geometry().contains_point(to) &&
      grid.at(grid.geometry().world_to_cell(to)) == CellState::kWall) {
    --walls;
  }
  return walls;
}

double mean_rssi_dbm(const AccessPoint& ap, double distance, int walls,
                     const RadioChannel& channel) {
  const double d = std::max(distance, 0.1 * channel.reference_distance);
  return ap.tx_power_dbm -
         10.0 * ap.path_loss_exponent *
             std::log10(d / channel.reference_distance) -
         channel.wall_loss_db * walls;
}

RssiVector simulate_rssi(std::span<const AccessPoint> aps,
                         const OccupancyGrid& grid, const Pose2D& pose,
                         const RadioChannel& channel, Rng& rng) {
  if (!grid.is_free(pose.position())) {
    throw InvalidArgument(fmt::format(
        "RSSI requested at ({}, {}), which is not in free space", pose.x,
        pose.y));
  }
  std::normal_distribution<double> shadowing(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RssiVector out;
  out.values.reserve(aps.size());
  for (const AccessPoint& ap : aps) {
    const double distance = (ap.position - pose.position()).norm();
    const int walls = count_walls(grid, pose.position(), ap.position);
    double rssi = mean_rssi_dbm(ap, distance, walls, channel) +
                  channel.shadowing_sigma_db * shadowing(rng);
    const bool dropped = unit(rng) < channel.dropout_prob;
    if (dropped || rssi < kDetectionFloorDbm) {
      rssi = kMissingRssiDbm;
    } else {
      rssi = std::min(rssi, -1.0);
    }
    out.values.push_back(rssi);
  }
  return out;
}

std::vector<ImuSample> simulate_imu(std::span<const GroundTruthSample> truth,
                                    const ImuErrorModel& model, double rate_hz,
                                    Rng& rng) {
  if (truth.empty()) throw InvalidArgument("IMU simulation needs ground truth");
  if (!(rate_hz > 0.0)) throw InvalidArgument("IMU rate must be positive");
  if (model.sigma_accel < 0.0 || model.sigma_gyro < 0.0) {
    throw InvalidArgument("IMU noise sigmas must be non-negative");
  }
  if (truth.size() > 1) {
    const double truth_rate = (truth.size() - 1) / (truth.back().t - truth.front().t);
    if (rate_hz < truth_rate * (1.0 - 1e-9)) {
      throw InvalidArgument(fmt::format(
          "IMU rate {} Hz is below the ground-truth rate {} Hz", rate_hz,
          truth_rate));
    }
  }
  const double t0 = truth.front().t;
  const double duration = truth.back().t - t0;
  const auto count =
      static_cast<std::size_t>(std::ceil(duration * rate_hz - 1e-9)) + 1;

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<ImuSample> out;
  out.reserve(count);
  std::size_t j = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = t0 + static_cast<double>(k) / rate_hz;
    while (j + 1 < truth.size() && truth[j + 1].t <= t) ++j;
    double a_true = truth[j].a;
    double w_true = truth[j].omega;
    if (j + 1 < truth.size()) {
      double w = (t - truth[j].t) / (truth[j + 1].t - truth[j].t);
      if (w < 1e-9) w = 0.0;
      if (w > 1.0 - 1e-9) w = 1.0;
      a_true = (1.0 - w) * truth[j].a + w * truth[j + 1].a;
      w_true = (1.0 - w) * truth[j].omega + w * truth[j + 1].omega;
    }
    ImuSample s;
    s.t = t;
    s.accel = Eigen::Vector3d(a_true, 0.0, 0.0) + model.bias_accel;
    s.gyro = Eigen::Vector3d(0.0, 0.0, w_true) + model.bias_gyro;
    for (int axis = 0; axis < 3; ++axis) s.accel[axis] += model.sigma_accel * gauss(rng);
    for (int axis = 0; axis < 3; ++axis) s.gyro[axis] += model.sigma_gyro * gauss(rng);
    out.push_back(s);
  }
  return out;
}

std::vector<double> beam_angles(int beams, double fov) {
  if (beams < 2) throw InvalidArgument("a scan needs at least two beams");
  if (!(fov > 0.0) || fov > 2.0 * kPi + 1e-12) {
    throw InvalidArgument("field of view must lie in (0, 2*pi]");
  }
  const bool full = fov >= 2.0 * kPi - 1e-12;
  const double step = full ? fov / beams : fov / (beams - 1);
  std::vector<double> angles(static_cast<std::size_t>(beams));
  for (int i = 0; i < beams; ++i) angles[i] = -0.5 * fov + i * step;
  return angles;
}

double cast_ray(const OccupancyGrid& grid, const Point2& origin, double angle,
                double max_range) {
  const Point2 end = origin + max_range * Point2(std::cos(angle), std::sin(angle));
  double range = max_range;
  traverse_segment(grid.geometry(), origin, end,
                   [&](const CellIndex& c, double entry) {
                     if (grid.at(c) == CellState::kWall) {
                       range = std::min(entry, max_range);
                       return false;
                     }
                     return true;
                   });
  return range;
}

LidarScan simulate_lidar(const OccupancyGrid& grid, const Pose2D& pose,
                         const LidarConfig& config, Rng& rng, double t) {
  if (!grid.is_free(pose.position())) {
    throw InvalidArgument(fmt::format(
        "LiDAR pose ({}, {}) is not in free space", pose.x, pose.y));
  }
  if (!(config.max_range > 0.0)) throw InvalidArgument("max range must be positive");
  LidarScan scan;
  scan.t = t;
  scan.max_range = config.max_range;
  scan.angles = beam_angles(config.beams, config.fov);
  scan.ranges.reserve(scan.angles.size());
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double floor = std::min(1e-3, 0.5 * config.max_range);
  for (double a : scan.angles) {
    double r = cast_ray(grid, pose.position(), pose.theta + a, config.max_range);
    const double noise = config.range_sigma * gauss(rng);
    // No return: the beam reports max_range untouched.
    if (r < config.max_range) r = std::clamp(r + noise, floor, config.max_range);
    scan.ranges.push_back(r);
  }
  return scan;
}

}  // namespace fuselocate
