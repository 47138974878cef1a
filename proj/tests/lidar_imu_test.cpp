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


#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fuselocate/eval.hpp"
#include "fuselocate/experiment.hpp"
#include "fuselocate/lidar_imu.hpp"
#include "fuselocate/sensors.hpp"
#include "fuselocate/world.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

namespace fuselocate {
namespace {

constexpr double kDeg = kPi / 180.0;

std::vector<ImuSample> constant_imu(double accel, double gyro, double dt, int steps) {
  std::vector<ImuSample> imu;
  for (int i = 0; i <= steps; ++i) {
    ImuSample s;
    s.t = i * dt;
    s.accel.x() = accel;
    s.gyro.z() = gyro;
    imu.push_back(s);
  }
  return imu;
}

GridGeometry open_geometry() {
  return {400, 400, 0.05, Point2(-10.0, -10.0)};
}

LidarScan single_beam(double angle, double range, double max_range = 8.0) {
  LidarScan scan;
  scan.angles = {angle};
  scan.ranges = {range};
  scan.max_range = max_range;
  return scan;
}

TEST(DeadReckon, ZeroInputStaysPut) {
  DeadReckonState init;
  init.pose = Pose2D(1.0, 2.0, 0.3);
  const Trajectory traj = dead_reckon(constant_imu(0.0, 0.0, 0.01, 100), init);
  ASSERT_EQ(traj.size(), 101u);
  EXPECT_EQ(traj.front().t, 0.0);
  for (const auto& s : traj.samples()) EXPECT_EQ(s.pose, init.pose);
}

TEST(DeadReckon, ConstantAccelerationMatchesHalfAtSquared) {
  const Trajectory traj = dead_reckon(constant_imu(1.0, 0.0, 0.001, 1000), {});
  EXPECT_NEAR(traj.back().t, 1.0, 1e-12);
  EXPECT_NEAR(traj.back().pose.x, 0.5, 1e-3);
  EXPECT_EQ(traj.back().pose.y, 0.0);
}

TEST(DeadReckon, GyroBiasDrift) {
  const double b = 0.01;
  DeadReckonState init;
  init.v = 1.0;
  const Trajectory traj = dead_reckon(constant_imu(0.0, b, 0.01, 1000), init);
  EXPECT_NEAR(traj.back().pose.theta, 0.1, 1e-9);
  // Cross-track error: integral of v sin(b t) over 10 s.
  const double cross = (1.0 - std::cos(b * 10.0)) / b;
  EXPECT_NEAR(traj.back().pose.y, cross, 2e-3);
}

TEST(DeadReckon, StepOrderIsHeadingSpeedPosition) {
  DeadReckonState state;
  state.v = 1.0;
  ImuSample imu;
  imu.t = 0.5;
  imu.accel.x() = 2.0;
  imu.gyro.z() = kPi;
  dead_reckon_step(state, imu);
  EXPECT_NEAR(state.pose.theta, 0.5 * kPi, 1e-12);
  EXPECT_DOUBLE_EQ(state.v, 2.0);
  EXPECT_NEAR(state.pose.x, 0.0, 1e-12);
  EXPECT_NEAR(state.pose.y, 1.0, 1e-12);
  EXPECT_EQ(state.t, 0.5);
}

TEST(LogOdds, SingleBeamUpdate) {
  const LogOddsMap fresh(open_geometry());
  EXPECT_FALSE(fresh.has_observations());
  const LogOddsMap map = update_map(fresh, Pose2D(0.01, 0.01, 0.0), single_beam(0.0, 5.0));
  const LogOddsParams p;
  // The beam runs along row 200 from column 200 to the endpoint column 300.
  std::size_t touched = 0;
  for (int y = 0; y < 400; ++y) {
    for (int x = 0; x < 400; ++x) {
      const double l = map.log_odds({x, y});
      if (y == 200 && x >= 200 && x < 300) {
        EXPECT_EQ(l, p.l_free) << x;
      } else if (y == 200 && x == 300) {
        EXPECT_EQ(l, p.l_occ);
      } else {
        EXPECT_EQ(l, 0.0);
      }
      touched += l != 0.0;
    }
  }
  EXPECT_EQ(touched, 101u);
  EXPECT_EQ(map.probability({0, 0}), 0.5);
  EXPECT_DOUBLE_EQ(map.probability({300, 200}), 1.0 / (1.0 + std::exp(-p.l_occ)));
}

TEST(LogOdds, MaxRangeBeamOnlyClears) {
  const LogOddsMap map =
      update_map(LogOddsMap(open_geometry()), Pose2D(0.01, 0.01, 0.0), single_beam(0.0, 8.0));
  for (int x = 200; x < 361; ++x) EXPECT_LE(map.log_odds({x, 200}), 0.0);
  EXPECT_EQ(map.log_odds({362, 200}), 0.0);
}

TEST(LogOdds, RepeatedHitsSaturate) {
  LogOddsMap map(open_geometry());
  const LogOddsParams p;
  const int n = static_cast<int>(std::ceil(p.l_max / p.l_occ));
  for (int i = 0; i < n; ++i) map = update_map(map, Pose2D(0.01, 0.01, 0.0), single_beam(0.0, 5.0));
  EXPECT_EQ(map.log_odds({300, 200}), p.l_max);
  for (int i = 0; i < 30; ++i) map = update_map(map, Pose2D(0.01, 0.01, 0.0), single_beam(0.0, 5.0));
  EXPECT_EQ(map.log_odds({300, 200}), p.l_max);
  EXPECT_EQ(map.log_odds({250, 200}), -p.l_max);
  for (double l : map.cells()) {
    const double prob = 1.0 / (1.0 + std::exp(-l));
    EXPECT_GT(prob, 0.0);
    EXPECT_LT(prob, 1.0);
  }
}

TEST(LogOdds, DisjointScansCommute) {
  const LogOddsMap empty(open_geometry());
  const Pose2D pa(-3.0, 0.01, 0.0), pb(3.0, 2.01, 0.0);
  LidarScan a = single_beam(kPi, 1.5);
  LidarScan b;
  b.max_range = 8.0;
  b.angles = {-0.5, 0.0, 0.4};
  b.ranges = {1.0, 2.0, 8.0};
  const LogOddsMap ab = update_map(update_map(empty, pa, a), pb, b);
  const LogOddsMap ba = update_map(update_map(empty, pb, b), pa, a);
  EXPECT_TRUE(ab == ba);
}

TEST(LogOdds, CorridorWallsClassifiedFromTruthPoses) {
  const OccupancyGrid grid = build_floor(FloorSpec{});
  const LidarConfig lidar;
  LogOddsMap map(grid.geometry());
  std::vector<Point2> poses;
  const auto loop = corridor_loop(FloorSpec{}, true);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    // 50 poses evenly spaced along the 40 m center loop.
    double s = 40.0 * i / 50.0;
    std::size_t leg = 0;
    while (s > (loop[leg + 1] - loop[leg]).norm()) {
      s -= (loop[leg + 1] - loop[leg]).norm();
      ++leg;
    }
    const Point2 p = loop[leg] + s * (loop[leg + 1] - loop[leg]).normalized();
    poses.push_back(p);
    const Pose2D pose(p.x(), p.y(), 0.0);
    insert_scan(map, pose, simulate_lidar(grid, pose, lidar, rng));
  }
  // Wall cells bordering free space and within range of some pose.
  std::size_t surface = 0, occupied = 0;
  const auto& g = grid.geometry();
  for (int y = 1; y + 1 < g.height; ++y) {
    for (int x = 1; x + 1 < g.width; ++x) {
      if (grid.at({x, y}) != CellState::kWall) continue;
      const bool borders = grid.at({x + 1, y}) == CellState::kFree ||
                           grid.at({x - 1, y}) == CellState::kFree ||
                           grid.at({x, y + 1}) == CellState::kFree ||
                           grid.at({x, y - 1}) == CellState::kFree;
      if (!borders) continue;
      bool near = false;
      for (const Point2& p : poses) near = near || (g.cell_center({x, y}) - p).norm() < lidar.max_range;
      if (!near) continue;
      ++surface;
      occupied += map.probability({x, y}) > 0.7;
    }
  }
  ASSERT_GT(surface, 1000u);
  EXPECT_GE(static_cast<double>(occupied), 0.9 * static_cast<double>(surface))
      << occupied << " of " << surface;
}

class ScanMatchTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    grid_ = new OccupancyGrid(build_floor(FloorSpec{}));
    lidar_.range_sigma = 0.0;
    map_ = new LogOddsMap(scenes::reference_map(*grid_, lidar_));
  }
  static void TearDownTestSuite() {
    delete map_;
    delete grid_;
  }
  static inline OccupancyGrid* grid_ = nullptr;
  static inline LogOddsMap* map_ = nullptr;
  static inline LidarConfig lidar_;
};

TEST_F(ScanMatchTest, SelfMatchReturnsGuess) {
  Rng rng(31);
  for (int i = 0; i < 4; ++i) {
    // A map built from the scan itself: every endpoint of the scan at the
    // true pose hits a cell of maximal probability, so no candidate scores
    // higher and the tie goes to the guess.
    const Pose2D truth = scenes::random_corridor_pose(*grid_, rng, 0.3);
    const LidarScan scan = simulate_lidar(*grid_, truth, lidar_, rng);
    LogOddsMap map(grid_->geometry());
    for (int k = 0; k < 3; ++k) insert_scan(map, truth, scan);
    const ScanMatchResult r = scan_match(map, scan, truth, ScanMatchConfig{});
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.pose, truth);
    EXPECT_DOUBLE_EQ(r.score, scan_score(map, scan, truth));
  }
}

TEST_F(ScanMatchTest, NeverLeavesWindow) {
  Rng rng(32);
  std::uniform_real_distribution<double> off(-0.6, 0.6), aoff(-0.3, 0.3);
  ScanMatchConfig config;
  config.linear_window = 0.2;
  config.angular_window = 4.0 * kDeg;
  for (int i = 0; i < 30; ++i) {
    const Pose2D truth = scenes::random_corridor_pose(*grid_, rng, 0.3);
    const LidarScan scan = simulate_lidar(*grid_, truth, lidar_, rng);
    const Pose2D guess(truth.x + off(rng), truth.y + off(rng), truth.theta + aoff(rng));
    const ScanMatchResult r = scan_match(*map_, scan, guess, config);
    EXPECT_LE(std::abs(r.pose.x - guess.x), config.linear_window + 1e-9);
    EXPECT_LE(std::abs(r.pose.y - guess.y), config.linear_window + 1e-9);
    EXPECT_LE(std::abs(normalize_angle(r.pose.theta - guess.theta)),
              config.angular_window + 1e-9);
    EXPECT_GE(r.score, scan_score(*map_, scan, guess) - 1e-9);
  }
}

TEST_F(ScanMatchTest, EqualsBruteForceAtEveryPyramidDepth) {
  Rng rng(33);
  std::uniform_real_distribution<double> off(-0.1, 0.1), aoff(-2.0 * kDeg, 2.0 * kDeg);
  ScanMatchConfig config;
  config.linear_window = 0.2;
  config.angular_window = 2.0 * kDeg;
  for (int levels : {1, 2, 4}) {
    config.levels = levels;
    for (int i = 0; i < 6; ++i) {
      const Pose2D truth = scenes::random_corridor_pose(*grid_, rng, 0.3);
      const LidarScan scan = simulate_lidar(*grid_, truth, lidar_, rng);
      const Pose2D guess(truth.x + off(rng), truth.y + off(rng), truth.theta + aoff(rng));
      const ScanMatchResult fast = scan_match(*map_, scan, guess, config);
      const oracle::BruteMatch brute = oracle::brute_force_match(*map_, scan, guess, config);
      EXPECT_EQ(fast.pose, brute.pose) << "levels " << levels;
      EXPECT_NEAR(fast.score, brute.score, 1e-9);
    }
  }
}

TEST_F(ScanMatchTest, RecoversControlledOffset) {
  Rng rng(34);
  ScanMatchConfig config;
  config.linear_window = 0.5;
  config.angular_window = 10.0 * kDeg;
  for (int i = 0; i < 5; ++i) {
    const Pose2D truth = scenes::random_corridor_pose(*grid_, rng, 0.3);
    const LidarScan scan = simulate_lidar(*grid_, truth, lidar_, rng);
    const Pose2D guess(truth.x + 0.2, truth.y + 0.2, truth.theta + 5.0 * kDeg);
    const ScanMatchResult r = scan_match(*map_, scan, guess, config);
    EXPECT_LE(std::hypot(r.pose.x - truth.x, r.pose.y - truth.y), grid_->resolution());
    EXPECT_LE(std::abs(normalize_angle(r.pose.theta - truth.theta)), 1.0 * kDeg);
  }
}

TEST(ScanMatch, UnknownMapDoesNotConverge) {
  const LogOddsMap map(open_geometry());
  LidarScan scan;
  scan.max_range = 8.0;
  scan.angles = beam_angles(36, 2.0 * kPi);
  scan.ranges.assign(36, 2.0);
  const Pose2D guess(0.3, -0.2, 0.1);
  const ScanMatchResult r = scan_match(map, scan, guess, ScanMatchConfig{});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.pose, guess);
}

TEST(ScanMatch, RejectsBadLevels) {
  LogOddsMap map(open_geometry());
  map.add({10, 10}, 1.0);
  ScanMatchConfig config;
  config.levels = 0;
  EXPECT_THROW(scan_match(map, single_beam(0.0, 1.0), Pose2D(), config), InvalidArgument);
}

ExperimentConfig noiseless_config() {
  ExperimentConfig config = default_config();
  config.imu_errors = ImuErrorModel{};
  config.lidar.range_sigma = 0.0;
  // The experiment's shorter calibrated range leaves corridor legs without
  // an end wall in view, where the matcher slides along the corridor.
  config.lidar.max_range = LidarConfig{}.max_range;
  return config;
}

double final_error(const std::vector<GroundTruthSample>& truth, const Trajectory& traj) {
  return (truth.back().pose.position() - traj.back().pose.position()).norm();
}

TEST(Slam, NoiselessRunStaysWithinTwoCells) {
  const ExperimentConfig config = noiseless_config();
  const FloorAssets assets = build_floor_assets(config, 0);
  const SensorLogs logs = simulate_run(config, assets, 0, Direction::kForward, 1);
  const SlamResult slam = run_lidar_imu(config, assets.grid.geometry(), logs.imu,
                                        logs.scans, Direction::kForward);
  EXPECT_FALSE(slam.diverged);
  EXPECT_EQ(slam.trajectory.size(), logs.scans.size());
  const Alignment aligned = align(to_trajectory(logs.truth), slam.trajectory);
  double worst = 0.0;
  for (const double e : pair_errors(aligned.pairs)) worst = std::max(worst, e);
  EXPECT_LE(worst, 2.0 * config.resolution);
}

TEST(Slam, ImuOnlyEqualsDeadReckoning) {
  const ExperimentConfig config = default_config();
  const FloorAssets assets = build_floor_assets(config, 0);
  const SensorLogs logs = simulate_run(config, assets, 0, Direction::kBackward, 2);
  SlamConfig slam_config = config.slam;
  slam_config.use_scans = false;
  const Pose2D start = start_pose(config, Direction::kBackward);
  const SlamResult slam =
      slam_pipeline(logs.imu, logs.scans, start, assets.grid.geometry(), slam_config);
  DeadReckonState init;
  init.pose = start;
  init.t = logs.imu.front().t;
  EXPECT_TRUE(slam.trajectory == dead_reckon(logs.imu, init));
  EXPECT_FALSE(slam.map.has_observations());
}

TEST(Slam, ScanMatchingBeatsDeadReckoningAtTheEnd) {
  const ExperimentConfig config = default_config();
  const FloorAssets assets = build_floor_assets(config, 0);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    for (const Direction d : {Direction::kForward, Direction::kBackward}) {
      const SensorLogs logs = simulate_run(config, assets, 0, d, seed);
      const SlamResult slam =
          run_lidar_imu(config, assets.grid.geometry(), logs.imu, logs.scans, d);
      DeadReckonState init;
      init.pose = start_pose(config, d);
      init.t = logs.imu.front().t;
      const Trajectory dr = dead_reckon(logs.imu, init);
      EXPECT_LT(final_error(logs.truth, slam.trajectory), final_error(logs.truth, dr))
          << "seed " << seed << " " << direction_name(d);
    }
  }
}

}  // namespace
}  // namespace fuselocate
