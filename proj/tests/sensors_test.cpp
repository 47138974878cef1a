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
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fuselocate/sensors.hpp"
#include "fuselocate/world.hpp"
#include "oracles.hpp"

namespace fuselocate {
namespace {

OccupancyGrid open_grid(int width, int height, double resolution = 0.05) {
  GridGeometry g;
  g.width = width;
  g.height = height;
  g.resolution = resolution;
  g.origin = Point2(-0.5 * width * resolution, -0.5 * height * resolution);
  return OccupancyGrid(g, CellState::kFree);
}

TEST(Rssi, ReferenceDistanceGivesTxPower) {
  const AccessPoint ap{0, Point2::Zero(), -42.0, 2.7};
  RadioChannel channel;
  EXPECT_DOUBLE_EQ(mean_rssi_dbm(ap, 1.0, 0, channel), -42.0);
}

TEST(Rssi, PathLossAtTenMetres) {
  const AccessPoint ap{0, Point2::Zero(), -40.0, 2.0};
  RadioChannel channel;
  EXPECT_NEAR(mean_rssi_dbm(ap, 10.0, 0, channel), -60.0, 1e-12);
  EXPECT_NEAR(mean_rssi_dbm(ap, 10.0, 2, channel), -60.0 - 2 * channel.wall_loss_db, 1e-12);
}

TEST(Rssi, NoiseFreeSimulationMatchesModel) {
  const OccupancyGrid grid = open_grid(400, 400);
  const std::vector<AccessPoint> aps{{0, Point2(0.0, 0.0), -40.0, 2.0}};
  RadioChannel channel;
  channel.shadowing_sigma_db = 0.0;
  Rng rng(1);
  const RssiVector r = simulate_rssi(aps, grid, Pose2D(6.0, 8.0, 0.0), channel, rng);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r.values[0], -60.0, 1e-12);
}

TEST(Rssi, StrictlyDecreasesWithDistance) {
  const OccupancyGrid grid = open_grid(400, 400);
  const std::vector<AccessPoint> aps{{0, Point2(-9.0, 0.0), -35.0, 2.5}};
  RadioChannel channel;
  channel.shadowing_sigma_db = 0.0;
  Rng rng(1);
  double previous = 0.0;
  for (int i = 0; i < 30; ++i) {
    const double x = -8.5 + 0.5 * i;
    const double v = simulate_rssi(aps, grid, Pose2D(x, 0.0, 0.0), channel, rng).values[0];
    if (i > 0) EXPECT_LT(v, previous);
    previous = v;
  }
}

TEST(Rssi, DropoutAndDetectionFloorGiveSentinel) {
  const OccupancyGrid grid = open_grid(400, 400);
  std::vector<AccessPoint> aps;
  for (int i = 0; i < 5; ++i) aps.push_back({i, Point2(i - 2.0, 3.0), -40.0, 2.5});
  RadioChannel channel;
  channel.dropout_prob = 1.0;
  Rng rng(2);
  const RssiVector r = simulate_rssi(aps, grid, Pose2D(0.0, 0.0, 0.0), channel, rng);
  EXPECT_EQ(r.missing_count(), 5u);
  for (double v : r.values) EXPECT_EQ(v, kMissingRssiDbm);

  const std::vector<AccessPoint> weak{{0, Point2(9.0, 9.0), -100.0, 4.0}};
  RadioChannel quiet;
  quiet.shadowing_sigma_db = 0.0;
  EXPECT_EQ(simulate_rssi(weak, grid, Pose2D(-9.0, -9.0, 0.0), quiet, rng).values[0],
            kMissingRssiDbm);
}

TEST(Rssi, ShadowingStatistics) {
  const OccupancyGrid grid = open_grid(400, 400);
  const std::vector<AccessPoint> aps{{0, Point2(3.0, 4.0), -40.0, 2.0}};
  RadioChannel channel;
  channel.shadowing_sigma_db = 4.0;
  Rng rng(3);
  constexpr int kDraws = 100;
  double sum = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    sum += simulate_rssi(aps, grid, Pose2D(0.0, 0.0, 0.0), channel, rng).values[0];
  }
  const double expected = -40.0 - 20.0 * std::log10(5.0);
  EXPECT_NEAR(sum / kDraws, expected, 3.0 * 4.0 / std::sqrt(kDraws));
}

TEST(Rssi, PoseInsideWallIsRejected) {
  const OccupancyGrid grid = build_floor(FloorSpec{});
  const std::vector<AccessPoint> aps{{0, Point2(1.0, 1.0), -40.0, 2.0}};
  Rng rng(1);
  EXPECT_THROW(simulate_rssi(aps, grid, Pose2D(6.0, 6.0, 0.0), RadioChannel{}, rng),
               InvalidArgument);
}

TEST(CountWalls, CountsWallRunsAndSkipsTheTransmitterRun) {
  const OccupancyGrid grid = build_floor(FloorSpec{});
  // Across the inner block from the left corridor to the right corridor.
  EXPECT_EQ(count_walls(grid, Point2(1.0, 6.0), Point2(11.0, 6.0)), 1);
  EXPECT_EQ(count_walls(grid, Point2(1.0, 6.0), Point2(1.0, 9.0)), 0);
  // Transmitter mounted inside the outer wall band.
  EXPECT_EQ(count_walls(grid, Point2(1.0, 6.0), Point2(-0.1, 6.0)), 0);
  EXPECT_EQ(count_walls(grid, Point2(11.0, 6.0), Point2(-0.1, 6.0)), 1);
}

std::vector<GroundTruthSample> straight_truth(double duration, double dt, double v) {
  std::vector<GroundTruthSample> truth;
  for (int k = 0; k * dt <= duration + 1e-12; ++k) {
    GroundTruthSample s;
    s.t = k * dt;
    s.pose = Pose2D(v * s.t, 0.0, 0.0);
    s.v = v;
    truth.push_back(s);
  }
  return truth;
}

TEST(Imu, ErrorFreeSamplesReproduceTruth) {
  const OccupancyGrid grid = build_floor(FloorSpec{});
  const auto truth = generate_path(grid, corridor_loop(FloorSpec{}, true), MotionProfile{});
  Rng rng(1);
  const auto imu = simulate_imu(truth, ImuErrorModel{}, 100.0, rng);
  ASSERT_EQ(imu.size(), truth.size());
  for (std::size_t k = 0; k < imu.size(); ++k) {
    EXPECT_DOUBLE_EQ(imu[k].accel.x(), truth[k].a);
    EXPECT_DOUBLE_EQ(imu[k].gyro.z(), truth[k].omega);
    EXPECT_EQ(imu[k].accel.y(), 0.0);
    EXPECT_EQ(imu[k].gyro.x(), 0.0);
  }
}

TEST(Imu, BiasOnlyStationary) {
  std::vector<GroundTruthSample> truth = straight_truth(2.0, 0.01, 0.0);
  ImuErrorModel model;
  model.bias_accel = Eigen::Vector3d(0.05, 0.0, 0.0);
  Rng rng(1);
  for (const auto& s : simulate_imu(truth, model, 100.0, rng)) {
    EXPECT_EQ(s.accel, Eigen::Vector3d(0.05, 0.0, 0.0));
  }
}

TEST(Imu, NoiseStatistics) {
  const auto truth = straight_truth(1000.0, 0.01, 0.0);
  ImuErrorModel model;
  model.bias_accel = Eigen::Vector3d(0.02, 0.0, 0.0);
  model.sigma_accel = 0.1;
  Rng rng(11);
  const auto imu = simulate_imu(truth, model, 100.0, rng);
  ASSERT_GE(imu.size(), 100000u);
  double sum = 0.0, sq = 0.0;
  const auto n = static_cast<double>(imu.size());
  for (const auto& s : imu) sum += s.accel.x();
  const double mean = sum / n;
  for (const auto& s : imu) sq += (s.accel.x() - mean) * (s.accel.x() - mean);
  const double sd = std::sqrt(sq / (n - 1.0));
  EXPECT_NEAR(mean, 0.02, 3.0 * 0.1 / std::sqrt(n));
  EXPECT_NEAR(sd, 0.1, 0.005);
}

TEST(Imu, LengthAndTimestampsFollowRate) {
  const auto truth = straight_truth(3.07, 0.01, 1.0);
  const double duration = truth.back().t - truth.front().t;
  for (const double rate : {100.0, 200.0, 250.0}) {
    Rng rng(1);
    const auto imu = simulate_imu(truth, ImuErrorModel{}, rate, rng);
    EXPECT_EQ(imu.size(), static_cast<std::size_t>(std::ceil(duration * rate - 1e-9)) + 1);
    for (std::size_t k = 0; k < imu.size(); ++k) {
      EXPECT_DOUBLE_EQ(imu[k].t, truth.front().t + static_cast<double>(k) / rate);
    }
  }
  Rng rng(1);
  EXPECT_THROW(simulate_imu({}, ImuErrorModel{}, 100.0, rng), InvalidArgument);
}

TEST(Lidar, OpenGridReturnsMaxRange) {
  const OccupancyGrid grid = open_grid(400, 400);
  LidarConfig config;
  config.max_range = 5.0;
  config.range_sigma = 0.0;
  Rng rng(1);
  const LidarScan scan = simulate_lidar(grid, Pose2D(0, 0, 0), config, rng);
  ASSERT_EQ(scan.size(), 360u);
  for (double r : scan.ranges) EXPECT_EQ(r, 5.0);
}

TEST(Lidar, WallPlaneAtFiveMetres) {
  OccupancyGrid grid = open_grid(400, 400);
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (grid.geometry().cell_center({x, y}).x() >= 5.0) grid.set({x, y}, CellState::kWall);
    }
  }
  LidarConfig config;
  config.max_range = 8.0;
  config.range_sigma = 0.0;
  Rng rng(1);
  const LidarScan scan = simulate_lidar(grid, Pose2D(0.01, 0.01, 0.0), config, rng);
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (std::abs(scan.angles[i]) < std::abs(scan.angles[ahead])) ahead = i;
  }
  ASSERT_NEAR(scan.angles[ahead], 0.0, 1e-12);
  EXPECT_NEAR(scan.ranges[ahead], 5.0 - 0.01, grid.resolution());
}

TEST(Lidar, RangesStayInsideBoundsWithNoise) {
  const OccupancyGrid grid = build_floor(FloorSpec{});
  LidarConfig config;
  config.range_sigma = 0.5;
  Rng rng(5);
  const LidarScan scan = simulate_lidar(grid, Pose2D(1.0, 1.0, 0.3), config, rng, 2.5);
  EXPECT_EQ(scan.t, 2.5);
  for (double r : scan.ranges) {
    EXPECT_GT(r, 0.0);
    EXPECT_LE(r, config.max_range);
  }
  EXPECT_THROW(simulate_lidar(grid, Pose2D(6.0, 6.0, 0.0), config, rng), InvalidArgument);
}

TEST(Lidar, BeamAnglesCoverFieldOfView) {
  const auto full = beam_angles(4, 2.0 * kPi);
  ASSERT_EQ(full.size(), 4u);
  EXPECT_NEAR(full[1] - full[0], kPi / 2.0, 1e-15);
  EXPECT_LT(full.back() - full.front(), 2.0 * kPi);
  const auto part = beam_angles(3, kPi);
  EXPECT_NEAR(part.front(), -kPi / 2.0, 1e-15);
  EXPECT_NEAR(part.back(), kPi / 2.0, 1e-15);
}

TEST(Lidar, RayCastingAgreesWithDenseSampling) {
  const OccupancyGrid grid = build_floor(FloorSpec{});
  Rng rng(6);
  std::uniform_real_distribution<double> coord(0.0, 12.0), ang(-kPi, kPi);
  const double step = grid.resolution() / 1000.0;
  int tested = 0;
  while (tested < 1000) {
    const Point2 p(coord(rng), coord(rng));
    if (!grid.is_free(p)) continue;
    ++tested;
    const double a = ang(rng);
    const double got = cast_ray(grid, p, a, 8.0);
    const double want = oracle::dense_ray(grid, p, a, 8.0);
    EXPECT_GE(want - got, -1e-12);
    EXPECT_LE(want - got, step + 1e-12);
  }
}

}  // namespace
}  // namespace fuselocate
