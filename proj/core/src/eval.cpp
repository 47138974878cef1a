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

#include "fuselocate/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <fmt/core.h>

#include "fuselocate/common.hpp"

namespace fuselocate {
namespace {

double sorted_quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void require_pairs(std::span<const AlignedPair> pairs) {
  if (pairs.empty()) throw InvalidArgument("no aligned pairs to evaluate");
}

struct Style {
  const char* color;
  const char* dash;
};

Style style_for(Method m) {
  switch (m) {
    case Method::kWiFi:
      return {"#1f77b4", "6,4"};
    case Method::kLidarImu:
      return {"#ff7f0e", "2,3"};
    case Method::kEkf:
      return {"#2ca02c", "10,3,2,3"};
  }
  return {"#777777", "4,4"};
}

}  // namespace

Alignment align(const Trajectory& truth, const Trajectory& pred) {
  if (truth.empty() || pred.empty()) {
    throw InvalidArgument("alignment needs two nonempty trajectories");
  }
  const double t0 = pred.front().t;
  const double t1 = pred.back().t;
  Alignment out;
  const auto& ps = pred.samples();
  std::size_t j = 0;
  for (const TimedPose& s : truth.samples()) {
    if (s.t < t0 || s.t > t1) {
      ++out.dropped;
      continue;
    }
    while (j + 1 < ps.size() && ps[j + 1].t <= s.t) ++j;
    Point2 p = ps[j].pose.position();
    if (j + 1 < ps.size() && s.t > ps[j].t) {
      const double w = (s.t - ps[j].t) / (ps[j + 1].t - ps[j].t);
      p = (1.0 - w) * ps[j].pose.position() + w * ps[j + 1].pose.position();
    }
    out.pairs.push_back({s.t, s.pose.position(), p});
  }
  if (out.pairs.empty()) {
    throw InvalidArgument(fmt::format(
        "trajectories do not overlap in time (truth [{}, {}], prediction [{}, {}])",
        truth.front().t, truth.back().t, t0, t1));
  }
  return out;
}

double mean_2d_error(std::span<const AlignedPair> pairs) {
  require_pairs(pairs);
  double sum = 0.0;
  for (const AlignedPair& p : pairs) {
    const double dx = p.truth.x() - p.pred.x();
    const double dy = p.truth.y() - p.pred.y();
    sum += std::sqrt(dx * dx + dy * dy);
  }
  return sum / static_cast<double>(pairs.size());
}

std::vector<double> pair_errors(std::span<const AlignedPair> pairs) {
  std::vector<double> errors;
  errors.reserve(pairs.size());
  for (const AlignedPair& p : pairs) {
    const double dx = p.truth.x() - p.pred.x();
    const double dy = p.truth.y() - p.pred.y();
    errors.push_back(std::sqrt(dx * dx + dy * dy));
  }
  return errors;
}

std::vector<CdfPoint> error_cdf(std::span<const AlignedPair> pairs) {
  require_pairs(pairs);
  std::vector<double> errors = pair_errors(pairs);
  std::sort(errors.begin(), errors.end());
  const double n = static_cast<double>(errors.size());
  std::vector<CdfPoint> cdf;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i + 1 < errors.size() && errors[i + 1] == errors[i]) continue;
    cdf.push_back({errors[i], i + 1 == errors.size() ? 1.0 : static_cast<double>(i + 1) / n});
  }
  return cdf;
}

const char* method_name(Method method) {
  switch (method) {
    case Method::kWiFi:
      return "WiFi";
    case Method::kLidarImu:
      return "LidarImu";
    case Method::kEkf:
      return "EKF";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  std::string lower;
  for (char c : name) {
    if (c != '_' && c != '-' && c != '/') lower += static_cast<char>(std::tolower(c));
  }
  if (lower == "wifi") return Method::kWiFi;
  if (lower == "lidarimu") return Method::kLidarImu;
  if (lower == "ekf") return Method::kEkf;
  throw InvalidArgument(fmt::format("unknown method '{}' (expected WiFi, LidarImu or EKF)", name));
}

MethodReport make_report(Method method, std::span<const AlignedPair> pairs,
                         double segment_seconds) {
  require_pairs(pairs);
  MethodReport report;
  report.method = method;
  report.samples = pairs.size();
  report.mean_2d_error = mean_2d_error(pairs);
  std::vector<double> errors = pair_errors(pairs);

  if (segment_seconds > 0.0) {
    const double t0 = pairs.front().t;
    std::size_t i = 0;
    while (i < pairs.size()) {
      const auto segment = static_cast<long>(std::floor((pairs[i].t - t0) / segment_seconds));
      double sum = 0.0;
      std::size_t n = 0;
      while (i < pairs.size() &&
             static_cast<long>(std::floor((pairs[i].t - t0) / segment_seconds)) == segment) {
        sum += errors[i];
        ++n;
        ++i;
      }
      report.segment_errors.push_back(sum / static_cast<double>(n));
    }
  }

  std::sort(errors.begin(), errors.end());
  report.median = sorted_quantile(errors, 0.5);
  report.p95 = sorted_quantile(errors, 0.95);
  report.max = errors.back();
  return report;
}

Comparison compare_methods(const Trajectory& truth,
                           const std::map<Method, Trajectory>& estimates,
                           double segment_seconds) {
  if (estimates.empty()) throw InvalidArgument("no estimates to compare");
  Comparison out;
  for (const auto& [method, trajectory] : estimates) {
    try {
      const Alignment aligned = align(truth, trajectory);
      out.reports.push_back(make_report(method, aligned.pairs, segment_seconds));
    } catch (const Error& e) {
      out.warnings.push_back(fmt::format("{} excluded: {}", method_name(method), e.what()));
    }
  }
  std::sort(out.reports.begin(), out.reports.end(),
            [](const MethodReport& a, const MethodReport& b) {
              if (a.mean_2d_error != b.mean_2d_error) return a.mean_2d_error < b.mean_2d_error;
              return std::string(method_name(a.method)) < method_name(b.method);
            });
  if (out.reports.empty()) return out;

  auto pick = [&](auto metric) {
    const MethodReport* best = &out.reports.front();
    for (const auto& r : out.reports) {
      const double m = metric(r);
      const double bm = metric(*best);
      if (m < bm || (m == bm && std::string(method_name(r.method)) < method_name(best->method))) {
        best = &r;
      }
    }
    return best->method;
  };
  out.winners["mean"] = pick([](const MethodReport& r) { return r.mean_2d_error; });
  out.winners["median"] = pick([](const MethodReport& r) { return r.median; });
  out.winners["p95"] = pick([](const MethodReport& r) { return r.p95; });
  out.winners["max"] = pick([](const MethodReport& r) { return r.max; });
  return out;
}

std::string render_overlay_svg(const OccupancyGrid& grid, const Trajectory& truth,
                               const std::map<Method, Trajectory>& estimates,
                               const OverlayOptions& options) {
  if (truth.empty()) throw InvalidArgument("overlay needs a nonempty truth trajectory");
  for (const auto& [method, trajectory] : estimates) {
    if (trajectory.empty()) {
      throw InvalidArgument(fmt::format("{} trajectory is empty", method_name(method)));
    }
  }
  const GridGeometry& g = grid.geometry();
  const double scale = options.pixels_per_meter;
  const double margin = 20.0;
  const double legend_height = 20.0 * static_cast<double>(estimates.size() + 1) + 10.0;
  const double map_w = g.width * g.resolution * scale;
  const double map_h = g.height * g.resolution * scale;
  const double width = map_w + 2.0 * margin;
  const double height = map_h + 2.0 * margin + legend_height;

  auto px = [&](double x) { return margin + (x - g.origin.x()) * scale; };
  auto py = [&](double y) { return margin + map_h - (y - g.origin.y()) * scale; };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n";
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.1f}\" height=\"{:.1f}\" "
      "viewBox=\"0 0 {:.1f} {:.1f}\">\n",
      width, height, width, height);
  svg += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg += "<g id=\"walls\" fill=\"#4d4d4d\" stroke=\"none\">\n";
  const double cell = g.resolution * scale;
  for (int y = 0; y < g.height; ++y) {
    int x = 0;
    while (x < g.width) {
      if (grid.at({x, y}) != CellState::kWall) {
        ++x;
        continue;
      }
      const int start = x;
      while (x < g.width && grid.at({x, y}) == CellState::kWall) ++x;
      svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\"/>\n",
                         margin + start * cell, margin + map_h - (y + 1) * cell,
                         (x - start) * cell, cell);
    }
  }
  svg += "</g>\n";

  auto polyline = [&](const Trajectory& t, const std::string& id, const char* color,
                      const char* dash, double stroke) {
    const auto n = static_cast<long>(t.size());
    const int stride = n >= static_cast<long>(options.stride) * options.min_decimated_vertices
                           ? std::max(1, options.stride)
                           : 1;
    std::string points;
    for (long i = 0; i < n; i += stride) {
      const Pose2D& p = t[static_cast<std::size_t>(i)].pose;
      if (!points.empty()) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", px(p.x), py(p.y));
    }
    std::string dash_attr = dash ? fmt::format(" stroke-dasharray=\"{}\"", dash) : "";
    return fmt::format(
        "<polyline id=\"{}\" data-samples=\"{}\" data-stride=\"{}\" fill=\"none\" "
        "stroke=\"{}\" stroke-width=\"{:.1f}\"{} points=\"{}\"/>\n",
        id, n, stride, color, stroke, dash_attr, points);
  };

  svg += polyline(truth, "truth", "#000000", nullptr, 2.0);
  for (const auto& [method, trajectory] : estimates) {
    const Style st = style_for(method);
    svg += polyline(trajectory, method_name(method), st.color, st.dash, 1.5);
  }

  double ly = margin + map_h + 20.0;
  auto legend = [&](const char* label, const char* color, const char* dash) {
    std::string dash_attr = dash ? fmt::format(" stroke-dasharray=\"{}\"", dash) : "";
    svg += fmt::format(
        "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"{}\" "
        "stroke-width=\"2\"{}/>\n"
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        margin, ly, margin + 30.0, ly, color, dash_attr, margin + 38.0, ly + 4.0, label);
    ly += 20.0;
  };
  legend("Ground truth", "#000000", nullptr);
  for (const auto& [method, trajectory] : estimates) {
    const Style st = style_for(method);
    legend(method_name(method), st.color, st.dash);
  }
  svg += "</svg>\n";
  return svg;
}

void render_overlay(const OccupancyGrid& grid, const Trajectory& truth,
                    const std::map<Method, Trajectory>& estimates,
                    const std::filesystem::path& output, const OverlayOptions& options) {
  const std::string svg = render_overlay_svg(grid, truth, estimates, options);
  std::ofstream out(output, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write overlay to {}", output.string()));
  out << svg;
  if (!out) throw IoError(fmt::format("failed while writing {}", output.string()));
}

}  // namespace fuselocate
