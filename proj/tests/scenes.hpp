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


// Shared fixtures on the default corridor floor.

#ifndef FUSELOCATE_TESTS_SCENES_HPP_
#define FUSELOCATE_TESTS_SCENES_HPP_

#include <cmath>
#include <random>

#include "fuselocate/lidar_imu.hpp"
#include "fuselocate/sensors.hpp"
#include "fuselocate/world.hpp"

namespace fuselocate::scenes {

// Map built from scans taken every 0.25 m along the corridor center line.
inline LogOddsMap reference_map(const OccupancyGrid& grid, const LidarConfig& lidar) {
  LogOddsMap map(grid.geometry());
  const auto loop = corridor_loop(FloorSpec{}, true);
  Rng rng(1);
  for (std::size_t i = 0; i + 1 < loop.size(); ++i) {
    const Point2 leg = loop[i + 1] - loop[i];
    const int n = static_cast<int>(leg.norm() / 0.25);
    for (int k = 0; k < n; ++k) {
      const Point2 p = loop[i] + (static_cast<double>(k) / n) * leg;
      insert_scan(map, Pose2D(p.x(), p.y(), 0.0), simulate_lidar(grid, Pose2D(p.x(), p.y(), 0.0), lidar, rng));
    }
  }
  return map;
}

// Uniform pose in the corridor ring at least `margin` from every wall.
inline Pose2D random_corridor_pose(const OccupancyGrid& grid, Rng& rng, double margin) {
  std::uniform_real_distribution<double> coord(0.0, 12.0), ang(-kPi, kPi);
  while (true) {
    const Point2 p(coord(rng), coord(rng));
    bool clear = true;
    for (int k = 0; k < 16 && clear; ++k) {
      const double a = 2.0 * kPi * k / 16;
      clear = grid.is_free(p + margin * Point2(std::cos(a), std::sin(a)));
    }
    if (clear && grid.is_free(p)) return Pose2D(p.x(), p.y(), ang(rng));
  }
}

}  // namespace fuselocate::scenes

#endif  // FUSELOCATE_TESTS_SCENES_HPP_
