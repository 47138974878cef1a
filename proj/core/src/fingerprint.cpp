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

#include "fuselocate/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include <fmt/core.h>

namespace fuselocate {
namespace {

bool is_missing(double v) { return std::isnan(v) || v == kMissingRssiDbm; }

// Linear-interpolation quantile of sorted values.
double quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void require_nonempty(const FingerprintDatabase& db) {
  if (db.records.empty()) throw InvalidArgument("fingerprint database is empty");
}

}  // namespace

Eigen::VectorXd Normalization::apply(const RssiVector& rssi) const {
  if (rssi.size() != offset.size()) {
    throw InvalidArgument(fmt::format("RSSI vector has {} entries, expected {}",
                                      rssi.size(), offset.size()));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(rssi.size()));
  for (std::size_t i = 0; i < rssi.size(); ++i) {
    const double v = std::isnan(rssi.values[i]) ? kMissingRssiDbm : rssi.values[i];
    out[static_cast<Eigen::Index>(i)] =
        std::clamp((v - offset[i]) * scale[i], 0.0, 1.0);
  }
  return out;
}

Eigen::MatrixXd FingerprintDatabase::feature_matrix() const {
  Eigen::MatrixXd x(ap_count, static_cast<Eigen::Index>(records.size()));
  for (std::size_t c = 0; c < records.size(); ++c) {
    for (int r = 0; r < ap_count; ++r) {
      x(r, static_cast<Eigen::Index>(c)) = records[c].rssi.values[static_cast<std::size_t>(r)];
    }
  }
  return x;
}

Eigen::MatrixXd FingerprintDatabase::position_matrix() const {
  Eigen::MatrixXd y(2, static_cast<Eigen::Index>(records.size()));
  for (std::size_t c = 0; c < records.size(); ++c) {
    y.col(static_cast<Eigen::Index>(c)) = records[c].position;
  }
  return y;
}

std::vector<Point2> reference_points(const OccupancyGrid& grid, double spacing) {
  if (!(spacing >= grid.resolution())) {
    throw InvalidArgument(fmt::format(
        "RP spacing {} m is finer than the grid resolution {} m", spacing,
        grid.resolution()));
  }
  const Point2 lo = grid.origin();
  const Point2 hi = lo + grid.resolution() * Point2(grid.width(), grid.height());
  const auto i_min = static_cast<long>(std::ceil(lo.x() / spacing - 0.5));
  const auto i_max = static_cast<long>(std::floor(hi.x() / spacing - 0.5));
  const auto j_min = static_cast<long>(std::ceil(lo.y() / spacing - 0.5));
  const auto j_max = static_cast<long>(std::floor(hi.y() / spacing - 0.5));
  std::vector<Point2> points;
  for (long j = j_min; j <= j_max; ++j) {
    for (long i = i_min; i <= i_max; ++i) {
      const Point2 p((i + 0.5) * spacing, (j + 0.5) * spacing);
      if (grid.is_free(p)) points.push_back(p);
    }
  }
  return points;
}

FingerprintDatabase collect_database(const OccupancyGrid& grid,
                                     std::span<const AccessPoint> aps,
                                     double rp_spacing, int samples_per_rp,
                                     const RadioChannel& channel, Rng& rng) {
  if (grid.count(CellState::kFree) == 0) {
    throw InvalidArgument("grid has no free cells to survey");
  }
  if (samples_per_rp < 1) throw InvalidArgument("samples per RP must be >= 1");
  if (aps.empty()) throw InvalidArgument("no access points to survey");
  FingerprintDatabase db;
  db.ap_count = static_cast<int>(aps.size());
  for (const Point2& rp : reference_points(grid, rp_spacing)) {
    for (int s = 0; s < samples_per_rp; ++s) {
      db.records.push_back(
          {rp, simulate_rssi(aps, grid, Pose2D(rp.x(), rp.y(), 0.0), channel, rng)});
    }
  }
  if (db.records.empty()) {
    throw InvalidArgument("no reference point of the lattice lies in free space");
  }
  return db;
}

std::vector<std::size_t> find_outliers(const FingerprintDatabase& db) {
  std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < db.records.size(); ++i) {
    const Point2& p = db.records[i].position;
    groups[{p.x(), p.y()}].push_back(i);
  }
  std::vector<bool> flagged(db.records.size(), false);
  std::vector<double> values;
  for (const auto& [rp, members] : groups) {
    if (members.size() < 2) continue;
    for (int f = 0; f < db.ap_count; ++f) {
      values.clear();
      for (std::size_t i : members) {
        const double v = db.records[i].rssi.values[static_cast<std::size_t>(f)];
        if (!is_missing(v)) values.push_back(v);
      }
      if (values.size() < 2) continue;
      std::sort(values.begin(), values.end());
      const double median = quantile(values, 0.5);
      const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
      for (std::size_t i : members) {
        const double v = db.records[i].rssi.values[static_cast<std::size_t>(f)];
        if (!is_missing(v) && std::abs(v - median) > 3.0 * iqr) flagged[i] = true;
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flagged.size(); ++i) {
    if (flagged[i]) out.push_back(i);
  }
  return out;
}

FingerprintDatabase preprocess(const FingerprintDatabase& db) {
  require_nonempty(db);
  if (db.preprocessed()) return db;
  for (const auto& r : db.records) {
    if (r.rssi.size() != static_cast<std::size_t>(db.ap_count)) {
      throw InvalidArgument("record RSSI length differs from the AP count");
    }
  }

  FingerprintDatabase filled = db;
  for (auto& r : filled.records) {
    for (double& v : r.rssi.values) {
      if (std::isnan(v)) v = kMissingRssiDbm;
    }
  }

  const std::vector<std::size_t> outliers = find_outliers(filled);
  FingerprintDatabase out;
  out.ap_count = db.ap_count;
  std::size_t next = 0;
  for (std::size_t i = 0; i < filled.records.size(); ++i) {
    if (next < outliers.size() && outliers[next] == i) {
      ++next;
      continue;
    }
    out.records.push_back(std::move(filled.records[i]));
  }
  if (out.records.empty()) {
    throw InvalidArgument("outlier removal left no fingerprint records");
  }
  for (auto& r : out.records) {
    for (double& v : r.rssi.values) v = std::clamp(v, kMissingRssiDbm, 0.0);
  }

  Normalization norm;
  const auto m = static_cast<std::size_t>(db.ap_count);
  norm.offset.assign(m, 0.0);
  norm.scale.assign(m, 0.0);
  for (std::size_t f = 0; f < m; ++f) {
    double lo = out.records.front().rssi.values[f];
    double hi = lo;
    for (const auto& r : out.records) {
      lo = std::min(lo, r.rssi.values[f]);
      hi = std::max(hi, r.rssi.values[f]);
    }
    norm.offset[f] = lo;
    norm.scale[f] = hi > lo ? 1.0 / (hi - lo) : 0.0;
  }
  for (auto& r : out.records) {
    const Eigen::VectorXd scaled = norm.apply(r.rssi);
    for (std::size_t f = 0; f < m; ++f) {
      r.rssi.values[f] = scaled[static_cast<Eigen::Index>(f)];
    }
  }
  out.normalization = std::move(norm);
  return out;
}

DatabaseSplit split_database(const FingerprintDatabase& db,
                             double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  require_nonempty(db);
  std::vector<std::size_t> order(db.records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(order.size())));
  DatabaseSplit split;
  split.train.ap_count = split.test.ap_count = db.ap_count;
  split.train.normalization = split.test.normalization = db.normalization;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& target = i < n_train ? split.train : split.test;
    target.records.push_back(db.records[order[i]]);
  }
  return split;
}

TrainResult train_mlp(const FingerprintDatabase& db, const TrainConfig& config,
                      const FingerprintDatabase* validation) {
  require_nonempty(db);
  if (!db.preprocessed()) {
    throw InvalidArgument("train_mlp needs a preprocessed database");
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw InvalidArgument("epochs and batch size must be positive");
  }
  if (!(config.adam.learning_rate > 0.0)) {
    throw InvalidArgument("learning rate must be positive");
  }

  TrainResult result;
  result.normalization = *db.normalization;
  result.model = MlpModel({db.ap_count, 109, 73, 54, 109, 109, 109, 2},
                          config.dropout_rate);
  Rng init_rng(derive_seed(config.seed, {1}));
  Rng shuffle_rng(derive_seed(config.seed, {2}));
  Rng dropout_rng(derive_seed(config.seed, {3}));
  result.model.initialize(init_rng);

  const Eigen::MatrixXd x = db.feature_matrix();
  const Eigen::MatrixXd y = db.position_matrix();
  Eigen::MatrixXd vx, vy;
  if (validation != nullptr && !validation->records.empty()) {
    vx = validation->feature_matrix();
    vy = validation->position_matrix();
  }
  result.initial_loss = result.model.loss(x, y);

  const auto n = static_cast<std::size_t>(x.cols());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  MlpGradients gradients;
  Eigen::MatrixXd bx, by;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
      const std::size_t count = std::min(batch, n - start);
      bx.resize(x.rows(), static_cast<Eigen::Index>(count));
      by.resize(2, static_cast<Eigen::Index>(count));
      for (std::size_t c = 0; c < count; ++c) {
        bx.col(static_cast<Eigen::Index>(c)) = x.col(order[start + c]);
        by.col(static_cast<Eigen::Index>(c)) = y.col(order[start + c]);
      }
      const double loss =
          result.model.loss_and_gradients(bx, by, &dropout_rng, gradients);
      if (!std::isfinite(loss)) {
        throw NumericalError(fmt::format(
            "non-finite training loss at epoch {} batch {}", epoch, b));
      }
      result.model.adam_step(gradients, config.adam);
    }
    const double epoch_loss = result.model.loss(x, y);
    if (!std::isfinite(epoch_loss) || !result.model.all_finite()) {
      throw NumericalError(
          fmt::format("training diverged to non-finite values after epoch {}", epoch));
    }
    result.train_loss.push_back(epoch_loss);
    if (vx.cols() > 0) result.validation_loss.push_back(result.model.loss(vx, vy));
  }
  return result;
}

PositionEstimate predict(const MlpModel& model, const RssiVector& rssi,
                         const Normalization& normalization) {
  if (rssi.size() != static_cast<std::size_t>(model.input_dim())) {
    throw InvalidArgument(fmt::format("RSSI vector has {} entries, model expects {}",
                                      rssi.size(), model.input_dim()));
  }
  const Eigen::MatrixXd out = model.forward(normalization.apply(rssi));
  PositionEstimate estimate;
  estimate.position = out.col(0);
  estimate.low_confidence = rssi.size() - rssi.missing_count() < 3;
  if (!estimate.position.allFinite()) {
    throw NumericalError("fingerprint model produced a non-finite position");
  }
  return estimate;
}

Point2 knn_predict(const FingerprintDatabase& db, const RssiVector& rssi, int k) {
  require_nonempty(db);
  if (k < 1 || static_cast<std::size_t>(k) > db.records.size()) {
    throw InvalidArgument(fmt::format("k = {} outside [1, {}]", k, db.records.size()));
  }
  if (rssi.size() != static_cast<std::size_t>(db.ap_count)) {
    throw InvalidArgument("query RSSI length differs from the AP count");
  }
  Eigen::VectorXd query(db.ap_count);
  if (db.normalization) {
    query = db.normalization->apply(rssi);
  } else {
    for (int i = 0; i < db.ap_count; ++i) query[i] = rssi.values[static_cast<std::size_t>(i)];
  }
  std::vector<std::pair<double, std::size_t>> distances;
  distances.reserve(db.records.size());
  for (std::size_t i = 0; i < db.records.size(); ++i) {
    double d2 = 0.0;
    for (int f = 0; f < db.ap_count; ++f) {
      const double diff = db.records[i].rssi.values[static_cast<std::size_t>(f)] - query[f];
      d2 += diff * diff;
    }
    distances.emplace_back(d2, i);
  }
  std::partial_sort(distances.begin(), distances.begin() + k, distances.end());
  Point2 sum = Point2::Zero();
  for (int i = 0; i < k; ++i) sum += db.records[distances[static_cast<std::size_t>(i)].second].position;
  return sum / static_cast<double>(k);
}

}  // namespace fuselocate
