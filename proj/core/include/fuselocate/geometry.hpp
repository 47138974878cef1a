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

#ifndef FUSELOCATE_GEOMETRY_HPP_
#define FUSELOCATE_GEOMETRY_HPP_

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>

namespace fuselocate {

using Point2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;

// Wraps an angle into (-pi, pi].
inline double normalize_angle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * kPi);
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2D() = default;
  Pose2D(double x_in, double y_in, double theta_in)
      : x(x_in), y(y_in), theta(normalize_angle(theta_in)) {}

  Point2 position() const { return {x, y}; }

  // Maps a point from this pose's body frame into the world frame.
  Point2 transform(const Point2& body) const {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {x + c * body.x() - s * body.y(), y + s * body.x() + c * body.y()};
  }

  bool operator==(const Pose2D&) const = default;
};

struct TimedPose {
  double t = 0.0;
  Pose2D pose;

  bool operator==(const TimedPose&) const = default;
};

// Timestamped pose sequence. Timestamps are strictly increasing; append()
// enforces it.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<TimedPose> samples);

  void append(double t, const Pose2D& pose);

  const std::vector<TimedPose>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const TimedPose& operator[](std::size_t i) const { return samples_[i]; }
  const TimedPose& front() const { return samples_.front(); }
  const TimedPose& back() const { return samples_.back(); }

  bool operator==(const Trajectory&) const = default;

 private:
  std::vector<TimedPose> samples_;
};

}  // namespace fuselocate

#endif  // FUSELOCATE_GEOMETRY_HPP_
