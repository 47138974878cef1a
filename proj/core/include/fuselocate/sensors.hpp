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

#ifndef FUSELOCATE_SENSORS_HPP_
#define FUSELOCATE_SENSORS_HPP_

#include <span>
#include <vector>

#include <Eigen/Core>

#include "fuselocate/common.hpp"
#include "fuselocate/world.hpp"

namespace fuselocate {

// RSSI of an access point that was not heard.
inline constexpr double kMissingRssiDbm = -110.0;
// Readings weaker than this are reported as missing.
inline constexpr double kDetectionFloorDbm = -105.0;

struct RssiVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  std::size_t missing_count() const;
  bool operator==(const RssiVector&) const = default;
};

// Log-distance path loss with per-wall attenuation and log-normal shadowing.
struct RadioChannel {
  double shadowing_sigma_db = 4.0;
  double wall_loss_db = 5.0;
  double dropout_prob = 0.0;
  double reference_distance = 1.0;
};

// Number of wall crossings on the straight line between two points. A run of
// consecutive Wall cells is one wall; the run holding `to` itself (a
// wall-mounted transmitter) is not counted.
int count_walls(const OccupancyGrid& grid, const Point2& from, const Point2& to);

// Noise-free received power before the detection floor is applied.
double mean_rssi_dbm(const AccessPoint& ap, double distance, int walls,
                     const RadioChannel& channel);

RssiVector simulate_rssi(std::span<const AccessPoint> aps,
                         const OccupancyGrid& grid, const Pose2D& pose,
                         const RadioChannel& channel, Rng& rng);

struct ImuSample {
  double t = 0.0;
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  // m/s^2, body frame
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   // rad/s, body frame
};

// a = a_true + b_a + n_a and w = w_true + b_w + n_w with white Gaussian noise.
struct ImuErrorModel {
  Eigen::Vector3d bias_accel = Eigen::Vector3d::Zero();
  Eigen::Vector3d bias_gyro = Eigen::Vector3d::Zero();
  double sigma_accel = 0.0;
  double sigma_gyro = 0.0;
};

// Planar IMU: forward acceleration on body x, yaw rate on body z. The truth
// is resampled to `rate_hz` by linear interpolation of a and omega.
std::vector<ImuSample> simulate_imu(std::span<const GroundTruthSample> truth,
                                    const ImuErrorModel& model, double rate_hz,
                                    Rng& rng);

struct LidarScan {
  double t = 0.0;
  std::vector<double> angles;  // sensor frame, strictly increasing
  std::vector<double> ranges;
  double max_range = 0.0;

  std::size_t size() const { return ranges.size(); }
};

struct LidarConfig {
  int beams = 360;
  double fov = 2.0 * kPi;
  double max_range = 8.0;
  double range_sigma = 0.02;
};

// Beam angles for a scan: a full circle is sampled without repeating the
// seam, a partial field of view includes both edges.
std::vector<double> beam_angles(int beams, double fov);

// Distance from `origin` along `angle` to the first Wall cell, or max_range.
double cast_ray(const OccupancyGrid& grid, const Point2& origin, double angle,
                double max_range);

LidarScan simulate_lidar(const OccupancyGrid& grid, const Pose2D& pose,
                         const LidarConfig& config, Rng& rng, double t = 0.0);

}  // namespace fuselocate

#endif  // FUSELOCATE_SENSORS_HPP_
