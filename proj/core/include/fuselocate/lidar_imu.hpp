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

#ifndef FUSELOCATE_LIDAR_IMU_HPP_
#define FUSELOCATE_LIDAR_IMU_HPP_

#include <span>
#include <string>
#include <vector>

#include "fuselocate/geometry.hpp"
#include "fuselocate/sensors.hpp"
#include "fuselocate/world.hpp"

namespace fuselocate {

struct DeadReckonState {
  Pose2D pose;
  double v = 0.0;
  double t = 0.0;
};

// One integration step over (state.t, imu.t]: heading first, then speed,
// then position with the updated heading and speed.
void dead_reckon_step(DeadReckonState& state, const ImuSample& imu);

// Integrates the whole stream. The first output is the initial pose at the
// first IMU timestamp.
Trajectory dead_reckon(std::span<const ImuSample> imu,
                       const DeadReckonState& initial);

struct LogOddsParams {
  double l_occ = 0.85;
  double l_free = -0.4;
  double l_max = 10.0;
  bool operator==(const LogOddsParams&) const = default;
};

// Occupancy map in log-odds form; unobserved cells hold exactly 0.
class LogOddsMap {
 public:
  LogOddsMap() = default;
  LogOddsMap(const GridGeometry& geometry, const LogOddsParams& params = {});

  const GridGeometry& geometry() const { return geometry_; }
  const LogOddsParams& params() const { return params_; }

  double log_odds(const CellIndex& c) const { return cells_[geometry_.index(c)]; }
  double probability(const CellIndex& c) const {
    return probabilities_[geometry_.index(c)];
  }
  // Adds `delta` and clamps to [-l_max, l_max].
  void add(const CellIndex& c, double delta);
  bool has_observations() const;
  const std::vector<double>& cells() const { return cells_; }

  // Occupied above `occupied`, Free below `free`, Unknown otherwise.
  OccupancyGrid threshold(double occupied = 0.65, double free = 0.35) const;

  bool operator==(const LogOddsMap&) const = default;

 private:
  GridGeometry geometry_;
  LogOddsParams params_;
  std::vector<double> cells_;
  std::vector<double> probabilities_;  // cached 1 / (1 + exp(-log_odds))
};

// Inserts one scan taken at `pose`. Within a scan every touched cell is
// updated once: beam endpoints (range < max_range) get l_occ, the cells the
// beams cross before their endpoints get l_free.
void insert_scan(LogOddsMap& map, const Pose2D& pose, const LidarScan& scan);

LogOddsMap update_map(LogOddsMap map, const Pose2D& pose, const LidarScan& scan);

struct ScanMatchConfig {
  double linear_window = 0.3;           // +/- m
  double angular_window = 5.0 * kPi / 180.0;  // +/- rad
  double angular_resolution = 0.5 * kPi / 180.0;
  int levels = 3;
  // Converged when the score reaches this fraction of the beam count.
  double min_score_fraction = 0.3;
};

struct ScanMatchResult {
  Pose2D pose;
  double score = 0.0;
  bool converged = false;
};

// Sum over beams with a return of the map probability of the cell under the
// transformed endpoint.
double scan_score(const LogOddsMap& map, const LidarScan& scan, const Pose2D& pose);

// Best candidate on the lattice around `guess` whose steps are the map
// resolution and `angular_resolution`. The search is coarse to fine: each
// coarser level doubles the translation step and scores against a
// max-pooled probability map, so a coarse score bounds the scores of the
// fine candidates it covers and branches that cannot win are skipped. The
// result equals an exhaustive search of the window. Equal scores go to the
// candidate closest to the guess.
ScanMatchResult scan_match(const LogOddsMap& map, const LidarScan& scan,
                           const Pose2D& guess, const ScanMatchConfig& config);

struct SlamConfig {
  bool use_scans = true;
  ScanMatchConfig matcher;
  LogOddsParams map_params;
  // Consecutive failed matches before the run is flagged as diverged.
  int divergence_scans = 5;
  // Blend of the scan-derived speed into the dead-reckoned speed after a
  // converged match (0 keeps the inertial speed).
  double velocity_gain = 1.0;
};

struct SlamEvent {
  double t = 0.0;
  bool converged = false;
  double score = 0.0;
  std::string note;
};

struct SlamResult {
  Trajectory trajectory;
  LogOddsMap map;
  std::vector<SlamEvent> events;
  bool diverged = false;
};

// Dead reckoning between scans; at each scan the propagated pose seeds the
// matcher, a converged match replaces the pose, and the scan is inserted at
// the adopted pose. Emits one pose per scan. Without scans the output is
// dead_reckon() of the IMU stream.
SlamResult slam_pipeline(std::span<const ImuSample> imu,
                         std::span<const LidarScan> scans,
                         const Pose2D& initial, const GridGeometry& map_geometry,
                         const SlamConfig& config);

}  // namespace fuselocate

#endif  // FUSELOCATE_LIDAR_IMU_HPP_
