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

#include "fuselocate/world.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include <fmt/core.h>

#include "fuselocate/common.hpp"

namespace fuselocate {
namespace {

int to_cells(double meters, double resolution) {
  return static_cast<int>(std::lround(meters / resolution));
}

// Number of whole dt steps covering `duration`, tolerant to the rounding of
// quotients such as 1.0 / 0.01.
long steps_for(double duration, double dt) {
  return static_cast<long>(std::ceil(duration / dt - 1e-6));
}

struct Phase {
  enum class Kind { kStraight, kRotate } kind = Kind::kStraight;
  long first_step = 0;
  long step_count = 0;
  Pose2D start;
  // Straight legs.
  long ramp_steps = 0;
  long cruise_steps = 0;
  double peak_speed = 0.0;
  double accel = 0.0;
  // Rotations.
  double omega = 0.0;
};

double straight_distance(const Phase& p, double tau, double dt) {
  const double t_ramp = p.ramp_steps * dt;
  const double t_cruise = p.cruise_steps * dt;
  if (tau <= t_ramp) return 0.5 * p.accel * tau * tau;
  const double ramp_distance = 0.5 * p.accel * t_ramp * t_ramp;
  if (tau <= t_ramp + t_cruise) {
    return ramp_distance + p.peak_speed * (tau - t_ramp);
  }
  const double td = std::min(tau - t_ramp - t_cruise, t_ramp);
  return ramp_distance + p.peak_speed * t_cruise + p.peak_speed * td -
         0.5 * p.accel * td * td;
}

double straight_speed(const Phase& p, double tau, double dt) {
  const double t_ramp = p.ramp_steps * dt;
  const double t_cruise = p.cruise_steps * dt;
  if (tau <= t_ramp) return p.accel * tau;
  if (tau <= t_ramp + t_cruise) return p.peak_speed;
  const double td = std::min(tau - t_ramp - t_cruise, t_ramp);
  return std::max(0.0, p.peak_speed - p.accel * td);
}

// Acceleration over local step `j` (the step from j to j + 1).
double straight_step_accel(const Phase& p, long j) {
  if (j < p.ramp_steps) return p.accel;
  if (j < p.ramp_steps + p.cruise_steps) return 0.0;
  return -p.accel;
}

}  // namespace

Trajectory::Trajectory(std::vector<TimedPose> samples)
    : samples_(std::move(samples)) {
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i].t > samples_[i - 1].t)) {
      throw InvalidArgument(
          fmt::format("trajectory timestamps not strictly increasing at "
                      "index {} ({} after {})",
                      i, samples_[i].t, samples_[i - 1].t));
    }
  }
}

void Trajectory::append(double t, const Pose2D& pose) {
  if (!samples_.empty() && !(t > samples_.back().t)) {
    throw InvalidArgument(fmt::format(
        "trajectory timestamp {} does not follow {}", t, samples_.back().t));
  }
  samples_.push_back({t, pose});
}

OccupancyGrid::OccupancyGrid(const GridGeometry& geometry, CellState fill)
    : geometry_(geometry) {
  if (geometry.width <= 0 || geometry.height <= 0) {
    throw InvalidArgument("grid dimensions must be positive");
  }
  if (!(geometry.resolution > 0.0)) {
    throw InvalidArgument("grid resolution must be positive");
  }
  cells_.assign(geometry.cell_count(), fill);
}

bool OccupancyGrid::is_free(const Point2& p) const {
  const CellIndex c = geometry_.world_to_cell(p);
  return geometry_.contains(c) && at(c) == CellState::kFree;
}

bool OccupancyGrid::is_blocked(const Point2& p) const {
  const CellIndex c = geometry_.world_to_cell(p);
  return !geometry_.contains(c) || at(c) == CellState::kWall;
}

std::size_t OccupancyGrid::count(CellState state) const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), state));
}

OccupancyGrid build_floor(const FloorSpec& spec, double resolution) {
  if (!(resolution > 0.0)) {
    throw InvalidArgument("floor resolution must be positive");
  }
  if (!(spec.outer_width > 0.0) || !(spec.outer_height > 0.0) ||
      !(spec.corridor_width > 0.0) || !(spec.wall_thickness > 0.0)) {
    throw InvalidArgument("floor dimensions must be positive");
  }
  const int width = to_cells(spec.outer_width, resolution);
  const int height = to_cells(spec.outer_height, resolution);
  const int wall = to_cells(spec.wall_thickness, resolution);
  const int corridor = to_cells(spec.corridor_width, resolution);
  if (corridor < 3) {
    throw InvalidArgument(fmt::format(
        "corridor width {} m is narrower than 3 cells at {} m/cell",
        spec.corridor_width, resolution));
  }
  if (wall < 1) {
    throw InvalidArgument("wall thickness is below one cell");
  }
  if (2 * (wall + corridor) >= width || 2 * (wall + corridor) >= height) {
    throw InvalidArgument(
        "outer rectangle too small for the corridor ring and its inner wall "
        "block");
  }

  GridGeometry geometry{width, height, resolution, spec.origin};
  OccupancyGrid grid(geometry, CellState::kWall);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int depth = std::min({x, width - 1 - x, y, height - 1 - y});
      if (depth >= wall && depth < wall + corridor) {
        grid.set({x, y}, CellState::kFree);
      }
    }
  }
  return grid;
}

std::vector<Point2> corridor_loop(const FloorSpec& spec, bool clockwise) {
  const double inset = spec.wall_thickness + 0.5 * spec.corridor_width;
  const double x0 = spec.origin.x() + inset;
  const double y0 = spec.origin.y() + inset;
  const double x1 = spec.origin.x() + spec.outer_width - inset;
  const double y1 = spec.origin.y() + spec.outer_height - inset;
  if (clockwise) {
    return {{x0, y0}, {x0, y1}, {x1, y1}, {x1, y0}, {x0, y0}};
  }
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
}

std::vector<AccessPoint> place_aps(const OccupancyGrid& grid, int count,
                                   ApLayout layout, std::uint64_t seed,
                                   const RadioRanges& radio) {
  if (count < 1) throw InvalidArgument("access point count must be >= 1");
  if (radio.exponent_min < 1.5 || radio.exponent_max > 6.0 ||
      radio.exponent_min > radio.exponent_max) {
    throw InvalidArgument("path loss exponent range must lie in [1.5, 6.0]");
  }
  if (radio.tx_power_min_dbm > radio.tx_power_max_dbm) {
    throw InvalidArgument("tx power range is inverted");
  }
  const GridGeometry& g = grid.geometry();
  Rng rng(seed);
  std::vector<Point2> positions;
  positions.reserve(static_cast<std::size_t>(count));

  if (layout == ApLayout::kPerimeter) {
    // Centers of the outermost cell ring.
    const std::size_t ring_cells =
        2 * static_cast<std::size_t>(g.width + g.height) - 4;
    if (static_cast<std::size_t>(count) > ring_cells) {
      throw InvalidArgument(fmt::format(
          "{} access points exceed the {} perimeter cells", count, ring_cells));
    }
    const double half = 0.5 * g.resolution;
    const double x0 = g.origin.x() + half;
    const double y0 = g.origin.y() + half;
    const double w = (g.width - 1) * g.resolution;
    const double h = (g.height - 1) * g.resolution;
    const double perimeter = 2.0 * (w + h);
    for (int k = 0; k < count; ++k) {
      double s = (k + 0.5) * perimeter / count;
      Point2 p;
      if (s < w) {
        p = {x0 + s, y0};
      } else if ((s -= w) < h) {
        p = {x0 + w, y0 + s};
      } else if ((s -= h) < w) {
        p = {x0 + w - s, y0 + h};
      } else {
        s -= w;
        p = {x0, y0 + h - s};
      }
      positions.push_back(p);
    }
  } else {
    if (static_cast<std::size_t>(count) > g.cell_count()) {
      throw InvalidArgument(fmt::format(
          "{} access points exceed the {} grid cells", count, g.cell_count()));
    }
    std::uniform_int_distribution<std::size_t> pick(0, g.cell_count() - 1);
    std::unordered_set<std::size_t> used;
    while (positions.size() < static_cast<std::size_t>(count)) {
      const std::size_t index = pick(rng);
      if (!used.insert(index).second) continue;
      const CellIndex c{static_cast<int>(index % g.width),
                        static_cast<int>(index / g.width)};
      positions.push_back(g.cell_center(c));
    }
  }

  std::uniform_real_distribution<double> power(radio.tx_power_min_dbm,
                                                radio.tx_power_max_dbm);
  std::uniform_real_distribution<double> exponent(radio.exponent_min,
                                                  radio.exponent_max);
  std::vector<AccessPoint> aps;
  aps.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    AccessPoint ap;
    ap.id = static_cast<int>(i);
    ap.position = positions[i];
    ap.tx_power_dbm = radio.tx_power_min_dbm == radio.tx_power_max_dbm
                          ? radio.tx_power_min_dbm
                          : power(rng);
    ap.path_loss_exponent = radio.exponent_min == radio.exponent_max
                                ? radio.exponent_min
                                : exponent(rng);
    aps.push_back(ap);
  }
  return aps;
}

std::vector<GroundTruthSample> generate_path(const OccupancyGrid& grid,
                                             std::span<const Point2> waypoints,
                                             const MotionProfile& profile) {
  if (!(profile.dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (!(profile.cruise_speed > 0.0) || !(profile.accel_limit > 0.0) ||
      !(profile.turn_rate > 0.0)) {
    throw InvalidArgument("speed, acceleration and turn rate must be positive");
  }
  if (waypoints.size() < 2) {
    throw InvalidArgument("a path needs at least two waypoints");
  }
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    if (!grid.is_free(waypoints[i])) {
      throw InvalidArgument(fmt::format("waypoint {} ({}, {}) is not in free space",
                                        i, waypoints[i].x(), waypoints[i].y()));
    }
  }
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    bool blocked = false;
    traverse_segment(grid.geometry(), waypoints[i], waypoints[i + 1],
                     [&](const CellIndex& c, double) {
                       if (grid.at(c) == CellState::kWall) {
                         blocked = true;
                         return false;
                       }
                       return true;
                     });
    if (blocked) {
      throw InvalidArgument(fmt::format(
          "segment {} from ({}, {}) to ({}, {}) crosses a wall cell", i,
          waypoints[i].x(), waypoints[i].y(), waypoints[i + 1].x(),
          waypoints[i + 1].y()));
    }
  }

  const double dt = profile.dt;
  std::vector<Phase> phases;
  long step = 0;
  bool have_heading = false;
  Pose2D pose(waypoints[0].x(), waypoints[0].y(), 0.0);

  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const Point2 leg = waypoints[i + 1] - waypoints[i];
    const double length = leg.norm();
    if (length == 0.0) continue;
    const double heading = std::atan2(leg.y(), leg.x());
    if (!have_heading) {
      pose = Pose2D(pose.x, pose.y, heading);
      have_heading = true;
    } else {
      const double turn = normalize_angle(heading - pose.theta);
      if (std::abs(turn) > 1e-12) {
        Phase rotate;
        rotate.kind = Phase::Kind::kRotate;
        rotate.first_step = step;
        rotate.step_count = std::max(1L, steps_for(std::abs(turn) / profile.turn_rate, dt));
        rotate.start = pose;
        rotate.omega = turn / (rotate.step_count * dt);
        phases.push_back(rotate);
        step += rotate.step_count;
        pose = Pose2D(pose.x, pose.y, heading);
      }
    }

    Phase straight;
    straight.kind = Phase::Kind::kStraight;
    straight.first_step = step;
    straight.start = pose;
    const double v = profile.cruise_speed;
    const double a = profile.accel_limit;
    double t_ramp;
    double t_cruise;
    if (length >= v * v / a) {
      t_ramp = v / a;
      t_cruise = (length - v * v / a) / v;
    } else {
      t_ramp = std::sqrt(length / a);
      t_cruise = 0.0;
    }
    straight.ramp_steps = std::max(1L, steps_for(t_ramp, dt));
    straight.cruise_steps = t_cruise > 0.0 ? steps_for(t_cruise, dt) : 0;
    straight.peak_speed =
        length / ((straight.ramp_steps + straight.cruise_steps) * dt);
    straight.accel = straight.peak_speed / (straight.ramp_steps * dt);
    straight.step_count = 2 * straight.ramp_steps + straight.cruise_steps;
    phases.push_back(straight);
    step += straight.step_count;
    pose = Pose2D(waypoints[i + 1].x(), waypoints[i + 1].y(), heading);
  }
  if (phases.empty()) {
    throw InvalidArgument("all path segments have zero length");
  }

  const long total_steps = step;
  std::vector<GroundTruthSample> samples;
  samples.reserve(static_cast<std::size_t>(total_steps + 1));
  std::size_t phase_index = 0;
  for (long k = 0; k <= total_steps; ++k) {
    while (phase_index + 1 < phases.size() &&
           k >= phases[phase_index + 1].first_step) {
      ++phase_index;
    }
    const Phase& p = phases[phase_index];
    const long j = k - p.first_step;
    const double tau = j * dt;

    GroundTruthSample s;
    s.t = k * dt;
    if (p.kind == Phase::Kind::kStraight) {
      const double d = straight_distance(p, tau, dt);
      s.pose = Pose2D(p.start.x + d * std::cos(p.start.theta),
                      p.start.y + d * std::sin(p.start.theta), p.start.theta);
      s.v = straight_speed(p, tau, dt);
    } else {
      s.pose = Pose2D(p.start.x, p.start.y, p.start.theta + p.omega * tau);
      s.v = 0.0;
    }
    // Motion over the step ending at k.
    if (k > 0) {
      const long prev = k - 1;
      std::size_t q = phase_index;
      if (prev < phases[q].first_step) --q;
      const Phase& pp = phases[q];
      const long jj = prev - pp.first_step;
      if (pp.kind == Phase::Kind::kStraight) {
        s.a = straight_step_accel(pp, jj);
      } else {
        s.omega = pp.omega;
      }
    }
    samples.push_back(s);
  }
  // Pin the final pose to the last waypoint.
  samples.back().pose =
      Pose2D(waypoints.back().x(), waypoints.back().y(), pose.theta);
  samples.back().v = 0.0;
  return samples;
}

Trajectory to_trajectory(std::span<const GroundTruthSample> samples) {
  std::vector<TimedPose> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.t, s.pose});
  return Trajectory(std::move(out));
}

}  // namespace fuselocate
