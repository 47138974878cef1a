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

#ifndef FUSELOCATE_EVAL_HPP_
#define FUSELOCATE_EVAL_HPP_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fuselocate/geometry.hpp"
#include "fuselocate/world.hpp"

namespace fuselocate {

struct AlignedPair {
  double t = 0.0;
  Point2 truth = Point2::Zero();
  Point2 pred = Point2::Zero();
};

struct Alignment {
  std::vector<AlignedPair> pairs;
  // Truth samples outside the prediction's time span.
  std::size_t dropped = 0;
};

// Keeps the truth timestamps and interpolates the prediction linearly at
// each one inside the prediction's span.
Alignment align(const Trajectory& truth, const Trajectory& pred);

// (1/N) * sum of Euclidean distances between truth and prediction.
double mean_2d_error(std::span<const AlignedPair> pairs);

std::vector<double> pair_errors(std::span<const AlignedPair> pairs);

struct CdfPoint {
  double error = 0.0;
  double fraction = 0.0;
};

// Distinct sorted errors with the fraction of samples at or below each.
std::vector<CdfPoint> error_cdf(std::span<const AlignedPair> pairs);

enum class Method { kWiFi, kLidarImu, kEkf };

const char* method_name(Method method);
Method parse_method(const std::string& name);

struct MethodReport {
  Method method = Method::kWiFi;
  double mean_2d_error = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  std::size_t samples = 0;
  // Mean error over consecutive windows of `segment_seconds`.
  std::vector<double> segment_errors;
};

MethodReport make_report(Method method, std::span<const AlignedPair> pairs,
                         double segment_seconds = 10.0);

struct Comparison {
  // Ascending mean error, ties by method name.
  std::vector<MethodReport> reports;
  std::map<std::string, Method> winners;  // metric -> best method
  std::vector<std::string> warnings;
};

Comparison compare_methods(const Trajectory& truth,
                           const std::map<Method, Trajectory>& estimates,
                           double segment_seconds = 10.0);

struct OverlayOptions {
  // Trajectories with at least stride * min_decimated_vertices samples are
  // drawn with every stride-th sample.
  int stride = 10;
  int min_decimated_vertices = 100;
  double pixels_per_meter = 40.0;
};

std::string render_overlay_svg(const OccupancyGrid& grid, const Trajectory& truth,
                               const std::map<Method, Trajectory>& estimates,
                               const OverlayOptions& options = {});

void render_overlay(const OccupancyGrid& grid, const Trajectory& truth,
                    const std::map<Method, Trajectory>& estimates,
                    const std::filesystem::path& output,
                    const OverlayOptions& options = {});

}  // namespace fuselocate

#endif  // FUSELOCATE_EVAL_HPP_
