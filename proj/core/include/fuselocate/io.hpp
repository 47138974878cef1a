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

#ifndef FUSELOCATE_IO_HPP_
#define FUSELOCATE_IO_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fuselocate/ekf.hpp"
#include "fuselocate/fingerprint.hpp"
#include "fuselocate/lidar_imu.hpp"
#include "fuselocate/mlp.hpp"
#include "fuselocate/sensors.hpp"
#include "fuselocate/world.hpp"

namespace fuselocate::io {

namespace fs = std::filesystem;

// Decimal with 9 significant digits, the precision of every CSV artifact.
std::string format_number(double value);

std::string read_text(const fs::path& path);
// Creates parent directories; throws IoError on failure.
void write_text(const fs::path& path, const std::string& content);

// Occupancy grids: binary PGM (P5, 0 = Wall, 254 = Free, 205 = Unknown,
// top row first) plus a JSON sidecar at the same stem with resolution,
// origin and size.
void write_grid(const fs::path& pgm_path, const OccupancyGrid& grid);
OccupancyGrid read_grid(const fs::path& pgm_path);
fs::path sidecar_path(const fs::path& pgm_path);

// Probabilities thresholded at 0.65 (occupied) and 0.35 (free).
void write_map(const fs::path& pgm_path, const LogOddsMap& map);

void write_access_points(const fs::path& path, std::span<const AccessPoint> aps);
std::vector<AccessPoint> read_access_points(const fs::path& path);

// t,x,y,theta,v,omega,a
void write_ground_truth(const fs::path& path, std::span<const GroundTruthSample> samples);
std::vector<GroundTruthSample> read_ground_truth(const fs::path& path);

// t,ax,ay,az,gx,gy,gz
void write_imu(const fs::path& path, std::span<const ImuSample> samples);
std::vector<ImuSample> read_imu(const fs::path& path);

struct TimedRssi {
  double t = 0.0;
  RssiVector rssi;
};

// t,rssi_0..rssi_{M-1}
void write_rssi(const fs::path& path, std::span<const TimedRssi> samples);
std::vector<TimedRssi> read_rssi(const fs::path& path);

// t,beam_index,angle,range; one row per beam.
void write_scans(const fs::path& path, std::span<const LidarScan> scans);
std::vector<LidarScan> read_scans(const fs::path& path, double max_range);

// x,y,rssi_0..rssi_{M-1} in dBm; missing = -110.
void write_database(const fs::path& path, const FingerprintDatabase& db);
FingerprintDatabase read_database(const fs::path& path);

// Versioned JSON: dims, dropout rate, row-major weights, biases and the
// input normalization. Doubles round-trip exactly.
void write_model(const fs::path& path, const MlpModel& model,
                 const Normalization& normalization);
struct StoredModel {
  MlpModel model;
  Normalization normalization;
};
StoredModel read_model(const fs::path& path);
std::string model_to_json(const MlpModel& model, const Normalization& normalization);
StoredModel model_from_json(const std::string& text);

// t,x,y,theta
void write_trajectory(const fs::path& path, const Trajectory& trajectory);
Trajectory read_trajectory(const fs::path& path);

// t,x,y,theta,v,omega,p_xx,p_yy
void write_fused(const fs::path& path, std::span<const ekf::FusedSample> samples);

// One JSON object per line.
void write_filter_events(const fs::path& path, std::span<const ekf::FilterEvent> events);
void write_slam_events(const fs::path& path, std::span<const SlamEvent> events);

}  // namespace fuselocate::io

#endif  // FUSELOCATE_IO_HPP_
