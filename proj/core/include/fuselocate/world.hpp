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

#ifndef FUSELOCATE_WORLD_HPP_
#define FUSELOCATE_WORLD_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fuselocate/geometry.hpp"

namespace fuselocate {

enum class CellState : std::uint8_t { kFree, kWall, kUnknown };

struct CellIndex {
  int x = 0;
  int y = 0;
  bool operator==(const CellIndex&) const = default;
};

// Raster geometry shared by the ground-truth floor plan and estimated maps.
// Cell (0, 0) has its lower-left corner at `origin`; x grows with column,
// y with row.
struct GridGeometry {
  int width = 0;
  int height = 0;
  double resolution = 0.05;
  Point2 origin = Point2::Zero();

  std::size_t cell_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool contains(const CellIndex& c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
  }
  std::size_t index(const CellIndex& c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c.x);
  }
  CellIndex world_to_cell(const Point2& p) const {
    return {static_cast<int>(std::floor((p.x() - origin.x()) / resolution)),
            static_cast<int>(std::floor((p.y() - origin.y()) / resolution))};
  }
  Point2 cell_center(const CellIndex& c) const {
    return {origin.x() + (c.x + 0.5) * resolution,
            origin.y() + (c.y + 0.5) * resolution};
  }
  bool contains_point(const Point2& p) const {
    return contains(world_to_cell(p));
  }
  bool operator==(const GridGeometry&) const = default;
};

// Walks the cells pierced by the segment start->end in order (Amanatides-Woo
// traversal). `visit(cell, entry_distance)` is called for every in-grid cell
// whose entry distance along the segment is <= its length; returning false
// stops the walk. The walk also stops when the ray leaves the grid.
template <typename Visitor>
void traverse_segment(const GridGeometry& geometry, const Point2& start,
                      const Point2& end, Visitor&& visit) {
  const Point2 delta = end - start;
  const double length = delta.norm();
  CellIndex cell = geometry.world_to_cell(start);
  if (!geometry.contains(cell)) return;
  if (length == 0.0) {
    visit(cell, 0.0);
    return;
  }
  const Point2 dir = delta / length;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double res = geometry.resolution;

  const int step_x = dir.x() > 0.0 ? 1 : (dir.x() < 0.0 ? -1 : 0);
  const int step_y = dir.y() > 0.0 ? 1 : (dir.y() < 0.0 ? -1 : 0);
  const double t_delta_x = step_x != 0 ? res / std::abs(dir.x()) : kInf;
  const double t_delta_y = step_y != 0 ? res / std::abs(dir.y()) : kInf;

  auto boundary = [&](int index, int step, double origin, double s,
                      double d) {
    if (step == 0) return kInf;
    const double edge = origin + (step > 0 ? index + 1 : index) * res;
    return (edge - s) / d;
  };
  double t_max_x =
      boundary(cell.x, step_x, geometry.origin.x(), start.x(), dir.x());
  double t_max_y =
      boundary(cell.y, step_y, geometry.origin.y(), start.y(), dir.y());

  double t = 0.0;
  while (true) {
    if (!visit(cell, t)) return;
    if (t_max_x < t_max_y) {
      cell.x += step_x;
      t = t_max_x;
      t_max_x += t_delta_x;
    } else {
      cell.y += step_y;
      t = t_max_y;
      t_max_y += t_delta_y;
    }
    if (t > length || !geometry.contains(cell)) return;
  }
}

// Rasterized floor plan.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(const GridGeometry& geometry, CellState fill);

  const GridGeometry& geometry() const { return geometry_; }
  int width() const { return geometry_.width; }
  int height() const { return geometry_.height; }
  double resolution() const { return geometry_.resolution; }
  const Point2& origin() const { return geometry_.origin; }

  CellState at(const CellIndex& c) const { return cells_[geometry_.index(c)]; }
  void set(const CellIndex& c, CellState state) {
    cells_[geometry_.index(c)] = state;
  }
  // Free and inside the grid.
  bool is_free(const Point2& p) const;
  // Wall, or outside the grid.
  bool is_blocked(const Point2& p) const;

  const std::vector<CellState>& cells() const { return cells_; }
  std::size_t count(CellState state) const;

  bool operator==(const OccupancyGrid&) const = default;

 private:
  GridGeometry geometry_;
  std::vector<CellState> cells_;
};

// Rectangular-ring corridor floor: an outer wall band, a Free corridor ring
// inside it and a solid inner Wall block.
struct FloorSpec {
  double outer_width = 12.4;
  double outer_height = 12.4;
  double corridor_width = 2.0;
  double wall_thickness = 0.2;
  Point2 origin{-0.2, -0.2};
};

OccupancyGrid build_floor(const FloorSpec& spec, double resolution = 0.05);

// Axis-aligned rectangle through the corridor ring's center line, as a
// closed waypoint loop (first point repeated at the end). Clockwise when
// `clockwise` is set, starting at the lower-left corner.
std::vector<Point2> corridor_loop(const FloorSpec& spec, bool clockwise);

struct AccessPoint {
  int id = 0;
  Point2 position = Point2::Zero();
  double tx_power_dbm = -40.0;
  double path_loss_exponent = 2.5;

  bool operator==(const AccessPoint&) const = default;
};

enum class ApLayout { kPerimeter, kUniformRandom };

struct RadioRanges {
  double tx_power_min_dbm = -40.0;
  double tx_power_max_dbm = -40.0;
  double exponent_min = 2.5;
  double exponent_max = 2.5;
};

std::vector<AccessPoint> place_aps(const OccupancyGrid& grid, int count,
                                   ApLayout layout, std::uint64_t seed,
                                   const RadioRanges& radio = {});

struct GroundTruthSample {
  double t = 0.0;
  Pose2D pose;
  double v = 0.0;      // signed linear speed, m/s
  double omega = 0.0;  // rad/s
  double a = 0.0;      // tangential acceleration, m/s^2
};

// Speed profile of the simulated platform. `omega` and `a` of a sample
// describe the motion over the step that ends at that sample.
struct MotionProfile {
  double cruise_speed = 0.5;
  double accel_limit = 0.5;
  double turn_rate = 0.5;
  double dt = 0.01;
};

// Straight legs with a trapezoidal speed profile between consecutive
// waypoints, stopping at each waypoint and rotating in place toward the next
// leg. Phase durations are whole multiples of dt (speed and turn rate are
// lowered just enough to make them so).
std::vector<GroundTruthSample> generate_path(const OccupancyGrid& grid,
                                             std::span<const Point2> waypoints,
                                             const MotionProfile& profile);

Trajectory to_trajectory(std::span<const GroundTruthSample> samples);

}  // namespace fuselocate

#endif  // FUSELOCATE_WORLD_HPP_
