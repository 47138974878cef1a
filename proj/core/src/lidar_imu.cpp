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

#include "fuselocate/lidar_imu.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <fmt/core.h>

#include "fuselocate/common.hpp"

namespace fuselocate {
namespace {

constexpr double kUnknownProbability = 0.5;

double to_probability(double log_odds) { return 1.0 / (1.0 + std::exp(-log_odds)); }

// Probabilities over a rectangular cell window of a map, optionally
// max-pooled; cells outside the window read as unknown.
class ProbabilityPatch {
 public:
  ProbabilityPatch(const LogOddsMap& map, int x0, int y0, int x1, int y1)
      : x0_(x0), y0_(y0), width_(std::max(0, x1 - x0 + 1)),
        height_(std::max(0, y1 - y0 + 1)) {
    values_.assign(static_cast<std::size_t>(width_) * height_, kUnknownProbability);
    const GridGeometry& g = map.geometry();
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (g.contains({x, y})) {
          values_[local(x, y)] = map.probability({x, y});
        }
      }
    }
  }

  double at(int x, int y) const {
    if (x < x0_ || y < y0_ || x >= x0_ + width_ || y >= y0_ + height_) {
      return kUnknownProbability;
    }
    return values_[local(x, y)];
  }

  // Max over the size x size block whose lower-left cell is the cell
  // itself, separable. Blocks reaching past the patch edge are truncated.
  ProbabilityPatch pooled(int size) const {
    ProbabilityPatch out = *this;
    if (size <= 1) return out;
    std::vector<double> tmp(values_.size());
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        double m = 0.0;
        for (int dx = x; dx <= std::min(width_ - 1, x + size - 1); ++dx) {
          m = std::max(m, values_[static_cast<std::size_t>(y) * width_ + dx]);
        }
        tmp[static_cast<std::size_t>(y) * width_ + x] = m;
      }
    }
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        double m = 0.0;
        for (int dy = y; dy <= std::min(height_ - 1, y + size - 1); ++dy) {
          m = std::max(m, tmp[static_cast<std::size_t>(dy) * width_ + x]);
        }
        out.values_[static_cast<std::size_t>(y) * width_ + x] = m;
      }
    }
    return out;
  }

 private:
  std::size_t local(int x, int y) const {
    return static_cast<std::size_t>(y - y0_) * width_ + (x - x0_);
  }

  int x0_, y0_, width_, height_;
  std::vector<double> values_;
};

struct Candidate {
  int ix = 0, iy = 0, it = 0;
  double score = -1.0;
};

// Higher score first; among equal scores the smaller offset from the guess.
bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  const auto key = [](const Candidate& c) {
    return std::make_tuple(std::abs(c.it), std::abs(c.iy), std::abs(c.ix), c.it,
                           c.iy, c.ix);
  };
  return key(a) < key(b);
}

struct Return {
  double range;
  double angle;  // sensor frame
};

std::vector<Return> scan_returns(const LidarScan& scan) {
  std::vector<Return> out;
  out.reserve(scan.size());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (scan.ranges[i] < scan.max_range) out.push_back({scan.ranges[i], scan.angles[i]});
  }
  return out;
}

// Sum over endpoint cells shifted by (ix, iy) cells.
double score_cells(const ProbabilityPatch& patch, const std::vector<CellIndex>& cells,
                   int ix, int iy) {
  double score = 0.0;
  for (const CellIndex& c : cells) score += patch.at(c.x + ix, c.y + iy);
  return score;
}

}  // namespace

void dead_reckon_step(DeadReckonState& state, const ImuSample& imu) {
  const double dt = imu.t - state.t;
  const double theta = normalize_angle(state.pose.theta + imu.gyro.z() * dt);
  state.v += imu.accel.x() * dt;
  state.pose = Pose2D(state.pose.x + state.v * dt * std::cos(theta),
                      state.pose.y + state.v * dt * std::sin(theta), theta);
  state.t = imu.t;
}

Trajectory dead_reckon(std::span<const ImuSample> imu,
                       const DeadReckonState& initial) {
  if (imu.empty()) throw InvalidArgument("dead reckoning needs IMU samples");
  DeadReckonState state = initial;
  state.t = imu.front().t;
  Trajectory out;
  out.append(state.t, state.pose);
  for (std::size_t k = 1; k < imu.size(); ++k) {
    if (!(imu[k].t > imu[k - 1].t)) {
      throw InvalidArgument(fmt::format("IMU timestamps not increasing at sample {}", k));
    }
    dead_reckon_step(state, imu[k]);
    out.append(state.t, state.pose);
  }
  return out;
}

LogOddsMap::LogOddsMap(const GridGeometry& geometry, const LogOddsParams& params)
    : geometry_(geometry),
      params_(params),
      cells_(geometry.cell_count(), 0.0),
      probabilities_(geometry.cell_count(), to_probability(0.0)) {
  if (!(params.l_max > 0.0)) throw InvalidArgument("l_max must be positive");
}

void LogOddsMap::add(const CellIndex& c, double delta) {
  const std::size_t i = geometry_.index(c);
  cells_[i] = std::clamp(cells_[i] + delta, -params_.l_max, params_.l_max);
  probabilities_[i] = to_probability(cells_[i]);
}

bool LogOddsMap::has_observations() const {
  return std::any_of(cells_.begin(), cells_.end(), [](double l) { return l != 0.0; });
}

OccupancyGrid LogOddsMap::threshold(double occupied, double free) const {
  OccupancyGrid grid(geometry_, CellState::kUnknown);
  for (int y = 0; y < geometry_.height; ++y) {
    for (int x = 0; x < geometry_.width; ++x) {
      const double p = probability({x, y});
      if (p > occupied) {
        grid.set({x, y}, CellState::kWall);
      } else if (p < free) {
        grid.set({x, y}, CellState::kFree);
      }
    }
  }
  return grid;
}

void insert_scan(LogOddsMap& map, const Pose2D& pose, const LidarScan& scan) {
  const GridGeometry& g = map.geometry();
  // 0 untouched, 1 free, 2 hit.
  std::vector<std::uint8_t> marks(g.cell_count(), 0);
  std::vector<std::size_t> touched;
  const Point2 origin = pose.position();
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const double range = scan.ranges[i];
    const double angle = pose.theta + scan.angles[i];
    const Point2 end = origin + range * Point2(std::cos(angle), std::sin(angle));
    const CellIndex end_cell = g.world_to_cell(end);
    traverse_segment(g, origin, end, [&](const CellIndex& c, double) {
      if (c == end_cell) return false;
      const std::size_t idx = g.index(c);
      if (marks[idx] == 0) {
        marks[idx] = 1;
        touched.push_back(idx);
      }
      return true;
    });
    if (range < scan.max_range && g.contains(end_cell)) {
      const std::size_t idx = g.index(end_cell);
      if (marks[idx] == 0) touched.push_back(idx);
      marks[idx] = 2;
    }
  }
  const LogOddsParams& p = map.params();
  for (std::size_t idx : touched) {
    const CellIndex c{static_cast<int>(idx % g.width), static_cast<int>(idx / g.width)};
    map.add(c, marks[idx] == 2 ? p.l_occ : p.l_free);
  }
}

LogOddsMap update_map(LogOddsMap map, const Pose2D& pose, const LidarScan& scan) {
  insert_scan(map, pose, scan);
  return map;
}

double scan_score(const LogOddsMap& map, const LidarScan& scan, const Pose2D& pose) {
  double score = 0.0;
  const GridGeometry& g = map.geometry();
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (!(scan.ranges[i] < scan.max_range)) continue;
    const double a = pose.theta + scan.angles[i];
    const Point2 p = pose.position() + scan.ranges[i] * Point2(std::cos(a), std::sin(a));
    const CellIndex c = g.world_to_cell(p);
    score += g.contains(c) ? map.probability(c) : kUnknownProbability;
  }
  return score;
}

ScanMatchResult scan_match(const LogOddsMap& map, const LidarScan& scan,
                           const Pose2D& guess, const ScanMatchConfig& config) {
  if (config.levels < 1 || config.levels > 16) {
    throw InvalidArgument("scan matching needs between 1 and 16 levels");
  }
  if (!(config.angular_resolution > 0.0) || config.linear_window < 0.0 ||
      config.angular_window < 0.0) {
    throw InvalidArgument("invalid scan matching window");
  }
  ScanMatchResult result{guess, 0.0, false};
  if (!map.has_observations()) return result;

  const GridGeometry& g = map.geometry();
  const double res = g.resolution;
  const double ares = config.angular_resolution;
  const int nx = static_cast<int>(std::floor(config.linear_window / res + 1e-9));
  const int nt = static_cast<int>(std::floor(config.angular_window / ares + 1e-9));

  const std::vector<Return> returns = scan_returns(scan);
  const int top_stride = 1 << (config.levels - 1);

  // Endpoint cells at the guess translation for every angular offset; a
  // translation by (ix, iy) cells shifts every index by the same amount.
  // Endpoints use the same arithmetic as insert_scan() and scan_score(), so
  // a return on a cell boundary lands in the cell the map recorded.
  std::vector<std::vector<CellIndex>> cells(static_cast<std::size_t>(2 * nt + 1));
  const Point2 origin = guess.position();
  const CellIndex center = g.world_to_cell(origin);
  int lo_x = center.x, lo_y = center.y, hi_x = center.x, hi_y = center.y;
  for (int it = -nt; it <= nt; ++it) {
    const double theta = guess.theta + it * ares;
    auto& slot = cells[static_cast<std::size_t>(it + nt)];
    slot.reserve(returns.size());
    for (const Return& r : returns) {
      const double a = theta + r.angle;
      const CellIndex c = g.world_to_cell(origin + r.range * Point2(std::cos(a), std::sin(a)));
      lo_x = std::min(lo_x, c.x);
      lo_y = std::min(lo_y, c.y);
      hi_x = std::max(hi_x, c.x);
      hi_y = std::max(hi_y, c.y);
      slot.push_back(c);
    }
  }

  // The patch covers every shifted endpoint and every pooling block read.
  const int slack = nx + top_stride + 1;
  std::vector<ProbabilityPatch> pyramid;
  pyramid.emplace_back(map, lo_x - slack, lo_y - slack, hi_x + slack, hi_y + slack);
  for (int level = 1; level < config.levels; ++level) {
    pyramid.push_back(pyramid.front().pooled(1 << level));
  }

  // Branch and bound. A node of height h covers the offsets [ix, ix + 2^h)
  // x [iy, iy + 2^h) at one angle; its score on the level-h pooled map
  // bounds every covered candidate, so subtrees that cannot reach the best
  // score are skipped. Equal bounds are still explored so that ties resolve
  // exactly as in an exhaustive search.
  struct Node {
    int ix, iy, it, height;
    double bound;
  };
  Candidate best;
  bool have = false;
  auto by_bound = [](const Node& a, const Node& b) {
    if (a.bound != b.bound) return a.bound > b.bound;
    return std::make_tuple(std::abs(a.it), std::abs(a.iy), std::abs(a.ix), a.it, a.iy,
                           a.ix) < std::make_tuple(std::abs(b.it), std::abs(b.iy),
                                                   std::abs(b.ix), b.it, b.iy, b.ix);
  };
  auto node = [&](int ix, int iy, int it, int height) {
    const auto& ends = cells[static_cast<std::size_t>(it + nt)];
    return Node{ix, iy, it, height,
                score_cells(pyramid[static_cast<std::size_t>(height)], ends, ix, iy)};
  };
  auto search = [&](auto&& self, std::vector<Node>& nodes) -> void {
    std::sort(nodes.begin(), nodes.end(), by_bound);
    for (const Node& n : nodes) {
      if (have && n.bound < best.score) return;
      if (n.height == 0) {
        const Candidate c{n.ix, n.iy, n.it, n.bound};
        if (!have || better(c, best)) {
          best = c;
          have = true;
        }
        continue;
      }
      const int half = 1 << (n.height - 1);
      std::vector<Node> children;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int ix = n.ix + dx * half;
          const int iy = n.iy + dy * half;
          if (ix > nx || iy > nx) continue;
          children.push_back(node(ix, iy, n.it, n.height - 1));
        }
      }
      self(self, children);
    }
  };
  std::vector<Node> roots;
  const int top = config.levels - 1;
  for (int it = -nt; it <= nt; ++it) {
    for (int iy = -nx; iy <= nx; iy += top_stride) {
      for (int ix = -nx; ix <= nx; ix += top_stride) roots.push_back(node(ix, iy, it, top));
    }
  }
  search(search, roots);

  result.pose = Pose2D(guess.x + best.ix * res, guess.y + best.iy * res,
                       guess.theta + best.it * ares);
  result.score = best.score;
  result.converged =
      best.score >= config.min_score_fraction * static_cast<double>(scan.size());
  return result;
}

SlamResult slam_pipeline(std::span<const ImuSample> imu,
                         std::span<const LidarScan> scans,
                         const Pose2D& initial, const GridGeometry& map_geometry,
                         const SlamConfig& config) {
  if (imu.empty()) throw InvalidArgument("SLAM needs an IMU stream");
  SlamResult result;
  result.map = LogOddsMap(map_geometry, config.map_params);
  DeadReckonState state{initial, 0.0, imu.front().t};
  if (!config.use_scans || scans.empty()) {
    result.trajectory = dead_reckon(imu, state);
    return result;
  }

  const double half_period =
      imu.size() > 1 ? 0.5 * (imu.back().t - imu.front().t) / (imu.size() - 1) : 0.0;
  std::size_t k = 0;
  int failures = 0;
  bool have_previous = false;
  Pose2D previous_pose;
  double previous_t = 0.0;
  for (std::size_t s = 0; s < scans.size(); ++s) {
    const LidarScan& scan = scans[s];
    if (scan.t < imu.front().t - half_period || scan.t > imu.back().t + half_period) {
      throw InvalidArgument(fmt::format(
          "scan {} at t = {} lies outside the IMU span", s, scan.t));
    }
    if (s > 0 && !(scan.t > scans[s - 1].t)) {
      throw InvalidArgument(fmt::format("scan timestamps not increasing at scan {}", s));
    }
    while (k + 1 < imu.size() && imu[k + 1].t <= scan.t + half_period) {
      dead_reckon_step(state, imu[k + 1]);
      ++k;
    }

    SlamEvent event{scan.t, false, 0.0, {}};
    if (result.map.has_observations()) {
      const ScanMatchResult match = scan_match(result.map, scan, state.pose, config.matcher);
      event.converged = match.converged;
      event.score = match.score;
      if (match.converged) {
        if (have_previous && scan.t > previous_t) {
          const Point2 step = match.pose.position() - previous_pose.position();
          const Point2 heading(std::cos(match.pose.theta), std::sin(match.pose.theta));
          const double scan_speed = step.dot(heading) / (scan.t - previous_t);
          state.v += config.velocity_gain * (scan_speed - state.v);
        }
        state.pose = match.pose;
        failures = 0;
      } else if (++failures >= config.divergence_scans) {
        if (!result.diverged) event.note = "diverged: continuing on dead reckoning";
        result.diverged = true;
      }
    } else {
      event.note = "map empty: scan inserted at the propagated pose";
    }
    insert_scan(result.map, state.pose, scan);
    result.trajectory.append(scan.t, state.pose);
    result.events.push_back(std::move(event));
    previous_pose = state.pose;
    previous_t = scan.t;
    have_previous = true;
  }
  return result;
}

}  // namespace fuselocate
