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

#ifndef FUSELOCATE_FINGERPRINT_HPP_
#define FUSELOCATE_FINGERPRINT_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fuselocate/common.hpp"
#include "fuselocate/mlp.hpp"
#include "fuselocate/sensors.hpp"
#include "fuselocate/world.hpp"

namespace fuselocate {

// Per-feature min-max scaling: value' = clamp((value - offset) * scale, 0, 1).
// A constant feature has scale 0 and maps to 0.
struct Normalization {
  std::vector<double> offset;
  std::vector<double> scale;

  std::size_t size() const { return offset.size(); }
  Eigen::VectorXd apply(const RssiVector& rssi) const;
  bool operator==(const Normalization&) const = default;
};

struct FingerprintRecord {
  Point2 position = Point2::Zero();
  RssiVector rssi;  // dBm, or scaled features once the database is preprocessed
};

struct FingerprintDatabase {
  std::vector<FingerprintRecord> records;
  int ap_count = 0;
  // Present once preprocess() has run; record values are then in [0, 1].
  std::optional<Normalization> normalization;

  bool preprocessed() const { return normalization.has_value(); }
  std::size_t size() const { return records.size(); }
  // Features as matrix columns (ap_count x N) and positions (2 x N).
  Eigen::MatrixXd feature_matrix() const;
  Eigen::MatrixXd position_matrix() const;
};

// Lattice points ((i + 1/2) * spacing, (j + 1/2) * spacing) that fall in Free
// cells, row by row.
std::vector<Point2> reference_points(const OccupancyGrid& grid, double spacing);

FingerprintDatabase collect_database(const OccupancyGrid& grid,
                                     std::span<const AccessPoint> aps,
                                     double rp_spacing, int samples_per_rp,
                                     const RadioChannel& channel, Rng& rng);

// Indices of records whose RSSI deviates, on any heard feature, from the
// median of the records at the same reference point by more than three
// interquartile ranges.
std::vector<std::size_t> find_outliers(const FingerprintDatabase& db);

// Missing-value filling, outlier removal and min-max scaling with the
// statistics of `db` itself. Applying it to a preprocessed database is a
// no-op.
FingerprintDatabase preprocess(const FingerprintDatabase& db);

struct DatabaseSplit {
  FingerprintDatabase train;
  FingerprintDatabase test;
};

// Seeded shuffle, then the first `train_fraction` of records go to train.
DatabaseSplit split_database(const FingerprintDatabase& db,
                             double train_fraction, std::uint64_t seed);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  double dropout_rate = 0.2;
};

struct TrainResult {
  MlpModel model;
  Normalization normalization;
  double initial_loss = 0.0;
  // Dropout-free MSE over the training set after each epoch.
  std::vector<double> train_loss;
  // Same on the validation database when one was given.
  std::vector<double> validation_loss;
};

// Trains the fingerprint regressor on a preprocessed database.
TrainResult train_mlp(const FingerprintDatabase& db, const TrainConfig& config,
                      const FingerprintDatabase* validation = nullptr);

struct PositionEstimate {
  Point2 position = Point2::Zero();
  // Fewer than three access points heard.
  bool low_confidence = false;
};

PositionEstimate predict(const MlpModel& model, const RssiVector& rssi,
                         const Normalization& normalization);

// Mean reference position of the k nearest records (Euclidean distance in
// the database's feature space, ties to the lower record index).
Point2 knn_predict(const FingerprintDatabase& db, const RssiVector& rssi, int k);

}  // namespace fuselocate

#endif  // FUSELOCATE_FINGERPRINT_HPP_
