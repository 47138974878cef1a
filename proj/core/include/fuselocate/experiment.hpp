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

#ifndef FUSELOCATE_EXPERIMENT_HPP_
#define FUSELOCATE_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fuselocate/ekf.hpp"
#include "fuselocate/eval.hpp"
#include "fuselocate/fingerprint.hpp"
#include "fuselocate/io.hpp"
#include "fuselocate/lidar_imu.hpp"
#include "fuselocate/sensors.hpp"
#include "fuselocate/world.hpp"

namespace fuselocate {

namespace fs = std::filesystem;

// Forward is clockwise around the corridor loop, backward counterclockwise.
enum class Direction { kForward, kBackward };
const char* direction_name(Direction direction);
// Lower-case directory name of a method ("wifi", "lidar_imu", "ekf").
std::string method_slug(Method method);

// Built by parse_config. Member initializers are placeholders; default_config()
// carries the calibrated defaults.
struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  std::string output_dir;

  FloorSpec floor;
  double resolution = 0.05;
  std::vector<std::string> floors;
  std::vector<Direction> directions;
  std::vector<Method> methods;

  int ap_count = 16;
  ApLayout ap_layout = ApLayout::kPerimeter;
  RadioRanges radio_ranges;
  RadioChannel channel;

  MotionProfile motion;
  double imu_rate_hz = 100.0;
  ImuErrorModel imu_errors;
  double wifi_rate_hz = 1.0;
  double lidar_rate_hz = 10.0;
  LidarConfig lidar;

  double rp_spacing = 0.5;
  int samples_per_rp = 10;
  int knn_k = 3;
  TrainConfig train;

  SlamConfig slam;

  ekf::NoiseConfig noise;
  ekf::Covariance initial_covariance = ekf::FilterInit::default_initial_covariance();
  bool ekf_scan_match_updates = false;
  double scan_match_sigma = 0.1;

  // The fully defaulted configuration as pretty-printed JSON.
  std::string resolved_json;
};

// Parses a JSON configuration merged over the defaults. `overrides` are
// "dotted.key=value" strings applied before validation; values parse as JSON
// and fall back to plain strings. Throws ConfigError naming the field path.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::optional<fs::path>& path,
                             const std::vector<std::string>& overrides = {});
ExperimentConfig default_config();
std::string default_config_json();

// --out, then config output_dir, then $FUSELOCATE_OUT, then "fuselocate_out".
fs::path resolve_output_dir(const std::optional<std::string>& cli_out,
                            const ExperimentConfig& config);

// In-memory pipeline, shared by the commands and the acceptance suite.
struct FloorAssets {
  OccupancyGrid grid;
  std::vector<AccessPoint> aps;
};
FloorAssets build_floor_assets(const ExperimentConfig& config, int floor_index);

struct SensorLogs {
  std::vector<GroundTruthSample> truth;
  std::vector<ImuSample> imu;
  std::vector<io::TimedRssi> rssi;
  std::vector<LidarScan> scans;
};
// Simulates one traversal. `run_seed` drives every noise stream of the run.
SensorLogs simulate_run(const ExperimentConfig& config, const FloorAssets& assets,
                        int floor_index, Direction direction, std::uint64_t run_seed);
Pose2D start_pose(const ExperimentConfig& config, Direction direction);

FingerprintDatabase collect_floor_database(const ExperimentConfig& config,
                                           const FloorAssets& assets, int floor_index);
DatabaseSplit split_floor_database(const ExperimentConfig& config,
                                   const FingerprintDatabase& db, int floor_index);
// Applies an existing normalization to a raw database.
FingerprintDatabase normalize_database(const FingerprintDatabase& raw,
                                       const Normalization& normalization);
TrainResult train_floor_model(const ExperimentConfig& config,
                              const FingerprintDatabase& db, int floor_index);

struct WifiFix {
  double t = 0.0;
  PositionEstimate estimate;
};
std::vector<WifiFix> wifi_fixes(const io::StoredModel& model,
                                std::span<const io::TimedRssi> rssi);
Trajectory wifi_trajectory(std::span<const WifiFix> fixes);
SlamResult run_lidar_imu(const ExperimentConfig& config, const GridGeometry& geometry,
                         std::span<const ImuSample> imu, std::span<const LidarScan> scans,
                         Direction direction);
// `slam` supplies scan-match observations when enabled in the config.
ekf::FuseResult run_ekf(const ExperimentConfig& config, std::span<const ImuSample> imu,
                        std::span<const WifiFix> fixes, Direction direction,
                        const SlamResult* slam = nullptr);

// Artifact layout.
fs::path floor_dir(const fs::path& out, const ExperimentConfig& config, int floor_index);
fs::path run_dir(const fs::path& out, const ExperimentConfig& config, int floor_index,
                 Direction direction);
fs::path method_dir(const fs::path& out, const ExperimentConfig& config, int floor_index,
                    Direction direction, Method method);

// Commands. Each writes resolved_config.json and records its stage in
// manifest.json under `out`.
void cmd_generate(const ExperimentConfig& config, const fs::path& out, int jobs = 1);
void cmd_fingerprint_collect(const ExperimentConfig& config, const fs::path& out,
                             int jobs = 1);
void cmd_fingerprint_train(const ExperimentConfig& config, const fs::path& out,
                           int jobs = 1);
void cmd_fingerprint_predict(const ExperimentConfig& config, const fs::path& out,
                             int jobs = 1);
void cmd_fingerprint_eval(const ExperimentConfig& config, const fs::path& out,
                          int jobs = 1);
void cmd_run(const ExperimentConfig& config, const fs::path& out, Method method,
             int jobs = 1);

struct EvaluateSummary {
  std::size_t report_rows = 0;
  std::size_t floor_rows = 0;
  std::size_t direction_rows = 0;
  std::vector<std::string> warnings;
};
EvaluateSummary cmd_evaluate(const ExperimentConfig& config, const fs::path& out);
EvaluateSummary cmd_all(const ExperimentConfig& config, const fs::path& out, int jobs = 1);

std::string sha256_hex(const std::string& bytes);
// Lists artifacts in manifest.json that are missing or whose hash differs.
std::vector<std::string> verify_manifest(const fs::path& out);

}  // namespace fuselocate

#endif  // FUSELOCATE_EXPERIMENT_HPP_
