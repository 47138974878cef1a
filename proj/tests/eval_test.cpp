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
#include <cstring>
#include <filesystem>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fuselocate/eval.hpp"
#include "fuselocate/world.hpp"
#include "oracles.hpp"

namespace fuselocate {
namespace {

Trajectory line(double t0, double dt, int n, double speed, const Point2& offset = Point2::Zero()) {
  Trajectory traj;
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * dt;
    traj.append(t, Pose2D(offset.x() + speed * t, offset.y() + 0.5 * speed * t, 0.0));
  }
  return traj;
}

std::vector<AlignedPair> random_pairs(Rng& rng, int n) {
  std::uniform_real_distribution<double> c(-20.0, 20.0);
  std::vector<AlignedPair> pairs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    pairs[static_cast<std::size_t>(i)] = {0.1 * i, {c(rng), c(rng)}, {c(rng), c(rng)}};
  }
  return pairs;
}

TEST(MeanError, PythagoreanPairs) {
  const std::vector<AlignedPair> pairs{{0.0, {3, 4}, {0, 0}}, {1.0, {1, 1}, {1, 1}}};
  EXPECT_DOUBLE_EQ(mean_2d_error(pairs), 2.5);
  EXPECT_THROW(mean_2d_error(std::vector<AlignedPair>{}), InvalidArgument);
}

TEST(MeanError, ZeroIffIdentical) {
  const Trajectory t = line(0.0, 0.1, 50, 1.0);
  const Alignment a = align(t, t);
  EXPECT_EQ(mean_2d_error(a.pairs), 0.0);
  auto pairs = a.pairs;
  pairs[7].pred.x() += 1e-6;
  EXPECT_GT(mean_2d_error(pairs), 0.0);
}

TEST(MeanError, EqualsReSummationBitForBit) {
  Rng rng(5);
  const auto pairs = random_pairs(rng, 1000);
  const double a = mean_2d_error(pairs);
  const double b = oracle::naive_mean_error(pairs);
  EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
}

TEST(MeanError, TranslationInvariant) {
  Rng rng(6);
  auto pairs = random_pairs(rng, 200);
  const double before = mean_2d_error(pairs);
  for (auto& p : pairs) {
    p.truth += Point2(0.25, -0.5);
    p.pred += Point2(0.25, -0.5);
  }
  EXPECT_NEAR(mean_2d_error(pairs), before, 1e-12);
}

TEST(Align, IdenticalGridsZip) {
  const Trajectory truth = line(0.0, 0.1, 20, 1.0);
  const Trajectory pred = line(0.0, 0.1, 20, 1.0, Point2(1, 2));
  const Alignment a = align(truth, pred);
  ASSERT_EQ(a.pairs.size(), 20u);
  EXPECT_EQ(a.dropped, 0u);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(a.pairs[i].t, truth[i].t);
    EXPECT_EQ(a.pairs[i].truth, truth[i].pose.position());
    EXPECT_EQ(a.pairs[i].pred, pred[i].pose.position());
  }
}

TEST(Align, HalfRateInterpolatesLinearMotion) {
  const Trajectory truth = line(0.0, 0.01, 201, 0.8);
  const Trajectory pred = line(0.0, 0.02, 101, 0.8);
  const Alignment a = align(truth, pred);
  ASSERT_EQ(a.pairs.size(), 201u);
  for (const auto& p : a.pairs) EXPECT_NEAR((p.truth - p.pred).norm(), 0.0, 1e-12);
}

TEST(Align, DropsTruthOutsidePredictionSpan) {
  const Trajectory truth = line(0.0, 0.1, 30, 1.0);
  const Trajectory pred = line(1.0, 0.1, 11, 1.0);
  const Alignment a = align(truth, pred);
  EXPECT_EQ(a.pairs.size(), 11u);
  EXPECT_EQ(a.dropped, 19u);
  EXPECT_NEAR(a.pairs.front().t, 1.0, 1e-12);
}

TEST(Align, DisjointSpansThrow) {
  EXPECT_THROW(align(line(0.0, 0.1, 10, 1.0), line(5.0, 0.1, 10, 1.0)), InvalidArgument);
  EXPECT_THROW(align(Trajectory{}, line(0.0, 0.1, 10, 1.0)), InvalidArgument);
}

TEST(ErrorCdf, AllZeroIsSingleStep) {
  const std::vector<AlignedPair> pairs(5, AlignedPair{0.0, {1, 1}, {1, 1}});
  const auto cdf = error_cdf(pairs);
  ASSERT_EQ(cdf.size(), 1u);
  EXPECT_EQ(cdf[0].error, 0.0);
  EXPECT_EQ(cdf[0].fraction, 1.0);
}

TEST(ErrorCdf, RankArithmetic) {
  std::vector<AlignedPair> pairs;
  for (double e : {3.0, 1.0, 4.0, 2.0}) pairs.push_back({0.0, {0, 0}, {e, 0}});
  const auto cdf = error_cdf(pairs);
  ASSERT_EQ(cdf.size(), 4u);
  EXPECT_EQ(cdf[1].error, 2.0);
  EXPECT_EQ(cdf[1].fraction, 0.5);
  EXPECT_EQ(cdf.back().fraction, 1.0);
  EXPECT_THROW(error_cdf(std::vector<AlignedPair>{}), InvalidArgument);
}

TEST(ErrorCdf, MonotoneAndEndsAtOne) {
  Rng rng(7);
  const auto cdf = error_cdf(random_pairs(rng, 777));
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    EXPECT_LT(cdf[i - 1].error, cdf[i].error);
    EXPECT_LT(cdf[i - 1].fraction, cdf[i].fraction);
  }
  EXPECT_EQ(cdf.back().fraction, 1.0);
}

TEST(Report, StatisticsAndSegments) {
  std::vector<AlignedPair> pairs;
  for (int i = 0; i < 20; ++i) pairs.push_back({1.0 * i, {0, 0}, {i < 10 ? 1.0 : 3.0, 0}});
  const MethodReport r = make_report(Method::kWiFi, pairs, 10.0);
  EXPECT_DOUBLE_EQ(r.mean_2d_error, 2.0);
  EXPECT_EQ(r.max, 3.0);
  EXPECT_GE(r.p95, r.median);
  ASSERT_EQ(r.segment_errors.size(), 2u);
  EXPECT_DOUBLE_EQ(r.segment_errors[0], 1.0);
  EXPECT_DOUBLE_EQ(r.segment_errors[1], 3.0);
}

TEST(Compare, SingletonWins) {
  const Trajectory truth = line(0.0, 0.1, 20, 1.0);
  const Comparison c = compare_methods(truth, {{Method::kLidarImu, line(0.0, 0.1, 20, 1.0, {0.1, 0})}});
  ASSERT_EQ(c.reports.size(), 1u);
  for (const auto& [metric, method] : c.winners) EXPECT_EQ(method, Method::kLidarImu) << metric;
  EXPECT_THROW(compare_methods(truth, {}), InvalidArgument);
}

TEST(Compare, TiesBreakAlphabetically) {
  const Trajectory truth = line(0.0, 0.1, 20, 1.0);
  const Trajectory est = line(0.0, 0.1, 20, 1.0, {0.3, 0});
  const Comparison c = compare_methods(truth, {{Method::kWiFi, est}, {Method::kEkf, est}});
  ASSERT_EQ(c.reports.size(), 2u);
  EXPECT_EQ(c.reports[0].method, Method::kEkf);
  EXPECT_EQ(c.reports[1].method, Method::kWiFi);
  EXPECT_EQ(c.reports[0].mean_2d_error, c.reports[1].mean_2d_error);
  EXPECT_EQ(c.reports[0].p95, c.reports[1].p95);
  EXPECT_EQ(c.winners.at("mean"), Method::kEkf);
}

TEST(Compare, OrderingFollowsRelabeling) {
  const Trajectory truth = line(0.0, 0.1, 20, 1.0);
  const Trajectory near = line(0.0, 0.1, 20, 1.0, {0.1, 0});
  const Trajectory far = line(0.0, 0.1, 20, 1.0, {0.9, 0});
  const Comparison a = compare_methods(truth, {{Method::kWiFi, near}, {Method::kEkf, far}});
  const Comparison b = compare_methods(truth, {{Method::kWiFi, far}, {Method::kEkf, near}});
  EXPECT_EQ(a.reports[0].method, Method::kWiFi);
  EXPECT_EQ(b.reports[0].method, Method::kEkf);
  EXPECT_EQ(a.reports[0].mean_2d_error, b.reports[0].mean_2d_error);
}

TEST(Compare, FailingMethodIsExcludedWithWarning) {
  const Trajectory truth = line(0.0, 0.1, 20, 1.0);
  const Comparison c = compare_methods(
      truth, {{Method::kWiFi, line(0.0, 0.1, 20, 1.0)}, {Method::kEkf, line(50.0, 0.1, 5, 1.0)}});
  ASSERT_EQ(c.reports.size(), 1u);
  EXPECT_EQ(c.reports[0].method, Method::kWiFi);
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_NE(c.warnings[0].find("EKF"), std::string::npos);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::kWiFi, Method::kLidarImu, Method::kEkf}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_EQ(parse_method("lidar_imu"), Method::kLidarImu);
  EXPECT_THROW(parse_method("gps"), InvalidArgument);
}

struct ParsedPolyline {
  std::string id;
  long samples = 0;
  long stride = 0;
  std::size_t vertices = 0;
};

std::vector<ParsedPolyline> parse_polylines(const std::string& svg) {
  const std::regex re(
      "<polyline id=\"([^\"]+)\" data-samples=\"(\\d+)\" data-stride=\"(\\d+)\"[^>]* "
      "points=\"([^\"]*)\"");
  std::vector<ParsedPolyline> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator();
       ++it) {
    ParsedPolyline p{(*it)[1], std::stol((*it)[2]), std::stol((*it)[3]), 0};
    const std::string points = (*it)[4];
    std::size_t pos = 0;
    while (pos < points.size()) {
      ++p.vertices;
      pos = points.find(' ', pos);
      if (pos == std::string::npos) break;
      ++pos;
    }
    out.push_back(p);
  }
  return out;
}

TEST(Overlay, ParsedVertexCountsFollowStride) {
  const OccupancyGrid grid = build_floor(FloorSpec{});
  const Trajectory truth = line(0.0, 0.01, 2345, 0.004, {1, 1});
  const Trajectory wifi = line(0.0, 1.0, 24, 0.004, {1.2, 1});
  const std::string svg =
      render_overlay_svg(grid, truth, {{Method::kWiFi, wifi}, {Method::kEkf, truth}});
  EXPECT_EQ(svg.rfind("</svg>"), svg.size() - std::string("</svg>\n").size());
  const auto lines = parse_polylines(svg);
  ASSERT_EQ(lines.size(), 3u);
  for (const auto& p : lines) {
    const long expected = (p.samples + p.stride - 1) / p.stride;
    EXPECT_EQ(static_cast<long>(p.vertices), expected) << p.id;
  }
  EXPECT_EQ(lines[0].id, "truth");
  EXPECT_EQ(lines[0].stride, 10);
  EXPECT_EQ(lines[0].vertices, 235u);
  EXPECT_EQ(lines[1].id, "WiFi");
  EXPECT_EQ(lines[1].stride, 1);
  EXPECT_EQ(lines[1].vertices, 24u);
  EXPECT_EQ(lines[2].vertices, 235u);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
}

TEST(Overlay, TruthOnlyAndDeterministic) {
  const OccupancyGrid grid = build_floor(FloorSpec{});
  const Trajectory truth = line(0.0, 0.1, 50, 0.1, {1, 1});
  const std::string a = render_overlay_svg(grid, truth, {});
  EXPECT_EQ(parse_polylines(a).size(), 1u);
  EXPECT_EQ(a, render_overlay_svg(grid, truth, {}));
  EXPECT_THROW(render_overlay_svg(grid, Trajectory{}, {}), InvalidArgument);

  const auto dir = std::filesystem::temp_directory_path() / "fuselocate_overlay_test";
  std::filesystem::create_directories(dir);
  render_overlay(grid, truth, {}, dir / "a.svg");
  render_overlay(grid, truth, {}, dir / "b.svg");
  EXPECT_EQ(std::filesystem::file_size(dir / "a.svg"), a.size());
  EXPECT_THROW(render_overlay(grid, truth, {}, dir / "missing" / "x" / "a.svg"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace fuselocate
