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

#include "fuselocate/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <fmt/core.h>
#include <openssl/evp.h>

#include "fuselocate/common.hpp"
#include "json.hpp"

#ifndef FUSELOCATE_VERSION
#define FUSELOCATE_VERSION "0.0.0"
#endif

namespace fuselocate {
namespace {

using nlohmann::json;

// Seed stream identifiers. Floor-level streams take (floor, id); run-level
// streams take (floor, direction, id).
enum Stream : std::uint64_t {
  kStreamAps = 1,
  kStreamDatabase = 2,
  kStreamSplit = 3,
  kStreamTrain = 4,
  kStreamImu = 11,
  kStreamRssi = 12,
  kStreamLidar = 13,
};

constexpr double kDeg = kPi / 180.0;

json defaults() {
  return json::parse(R"({
  "master_seed": 1,
  "output_dir": "",
  "world": {
    "outer_width": 12.4,
    "outer_height": 12.4,
    "corridor_width": 2.0,
    "wall_thickness": 0.2,
    "origin": [-0.2, -0.2],
    "resolution": 0.05
  },
  "floors": ["floor_1", "floor_2", "floor_3"],
  "directions": ["forward", "backward"],
  "methods": ["WiFi", "LidarImu", "EKF"],
  "access_points": {
    "count": 16,
    "layout": "perimeter",
    "tx_power_dbm": [-45.0, -35.0],
    "path_loss_exponent": [2.2, 3.0]
  },
  "radio": {
    "shadowing_sigma_db": 6.0,
    "wall_loss_db": 5.0,
    "dropout_prob": 0.0,
    "reference_distance": 1.0
  },
  "motion": {
    "cruise_speed": 0.5,
    "accel_limit": 0.5,
    "turn_rate": 0.5,
    "dt": 0.01
  },
  "imu": {
    "rate_hz": 100.0,
    "bias_accel": [0.005, 0.0, 0.0],
    "bias_gyro": [0.0, 0.0, 0.001],
    "sigma_accel": 0.05,
    "sigma_gyro": 0.005
  },
  "wifi": {
    "rate_hz": 1.0
  },
  "lidar": {
    "rate_hz": 10.0,
    "beams": 360,
    "fov_deg": 360.0,
    "max_range": 5.0,
    "range_sigma": 0.02
  },
  "fingerprint": {
    "rp_spacing": 0.5,
    "samples_per_rp": 10,
    "knn_k": 3,
    "epochs": 200,
    "batch_size": 32,
    "learning_rate": 0.001,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "train_fraction": 0.8,
    "dropout_rate": 0.2
  },
  "slam": {
    "use_scans": true,
    "linear_window": 0.3,
    "angular_window_deg": 5.0,
    "angular_resolution_deg": 0.5,
    "levels": 3,
    "min_score_fraction": 0.3,
    "divergence_scans": 5,
    "velocity_gain": 0.0,
    "l_occ": 0.85,
    "l_free": -0.4,
    "l_max": 10.0
  },
  "ekf": {
    "q_per_second": [1e-4, 1e-4, 1e-5, 1e-2, 1e-3],
    "r_sigma": 0.8,
    "gate_chi2": null,
    "initial_sigma_xy": 1.0,
    "initial_sigma_heading_deg": 10.0,
    "initial_sigma_v": 0.5,
    "initial_sigma_omega": 0.1,
    "scan_match_updates": false,
    "scan_match_sigma": 0.1
  }
})");
}

[[noreturn]] void config_fail(const std::string& path, const std::string& message) {
  throw ConfigError(fmt::format("config: {}: {}", path.empty() ? "<root>" : path, message));
}

const char* type_label(const json& j) {
  if (j.is_object()) return "an object";
  if (j.is_array()) return "an array";
  if (j.is_string()) return "a string";
  if (j.is_boolean()) return "a boolean";
  if (j.is_number()) return "a number";
  return "null";
}

// Overlays `user` onto `base`, rejecting keys and types the defaults lack.
void merge_into(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) config_fail(path, fmt::format("expected an object, got {}", type_label(user)));
  for (const auto& [key, value] : user.items()) {
    const std::string child = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) config_fail(child, "unknown key");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_into(slot, value, child);
    } else if (slot.is_null()) {
      if (!value.is_null() && !value.is_number()) {
        config_fail(child, fmt::format("expected a number or null, got {}", type_label(value)));
      }
      slot = value;
    } else {
      const bool same = (slot.is_number() && value.is_number()) ||
                        (slot.is_array() && value.is_array()) ||
                        (slot.is_string() && value.is_string()) ||
                        (slot.is_boolean() && value.is_boolean());
      if (!same) {
        config_fail(child, fmt::format("expected {}, got {}", type_label(slot), type_label(value)));
      }
      slot = value;
    }
  }
}

void apply_override(json& user, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(fmt::format("--set expects KEY=VALUE, got '{}'", assignment));
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &user;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError(fmt::format("--set: malformed key '{}'", key));
    if (!node->is_object()) config_fail(key.substr(0, start - 1), "expected an object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

const json& at_path(const json& root, const std::string& path) {
  const json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    node = &node->at(path.substr(start, dot - start));
    if (dot == std::string::npos) return *node;
    start = dot + 1;
  }
}

double number(const json& root, const std::string& path) {
  const json& j = at_path(root, path);
  if (!j.is_number()) config_fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) config_fail(path, "must be finite");
  return v;
}

double positive(const json& root, const std::string& path) {
  const double v = number(root, path);
  if (!(v > 0.0)) config_fail(path, fmt::format("must be positive, got {}", v));
  return v;
}

double non_negative(const json& root, const std::string& path) {
  const double v = number(root, path);
  if (v < 0.0) config_fail(path, fmt::format("must be non-negative, got {}", v));
  return v;
}

double in_range(const json& root, const std::string& path, double lo, double hi) {
  const double v = number(root, path);
  if (v < lo || v > hi) config_fail(path, fmt::format("must lie in [{}, {}], got {}", lo, hi, v));
  return v;
}

int integer(const json& root, const std::string& path, int lo) {
  const json& j = at_path(root, path);
  if (!j.is_number_integer()) config_fail(path, "expected an integer");
  const auto v = j.get<long long>();
  if (v < lo || v > std::numeric_limits<int>::max()) {
    config_fail(path, fmt::format("must be an integer >= {}, got {}", lo, v));
  }
  return static_cast<int>(v);
}

std::vector<double> vector_of(const json& root, const std::string& path, std::size_t size) {
  const json& j = at_path(root, path);
  if (j.size() != size) config_fail(path, fmt::format("expected {} numbers, got {}", size, j.size()));
  std::vector<double> out;
  for (std::size_t i = 0; i < size; ++i) {
    if (!j[i].is_number()) config_fail(fmt::format("{}[{}]", path, i), "expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

std::pair<double, double> range_of(const json& root, const std::string& path) {
  const auto v = vector_of(root, path, 2);
  if (v[0] > v[1]) config_fail(path, "minimum exceeds maximum");
  return {v[0], v[1]};
}

std::vector<std::string> strings(const json& root, const std::string& path) {
  std::vector<std::string> out;
  const json& j = at_path(root, path);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) config_fail(fmt::format("{}[{}]", path, i), "expected a string");
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

void require_whole_period(const json& root, const std::string& path, double rate, double dt) {
  const double steps = 1.0 / (rate * dt);
  if (std::abs(steps - std::round(steps)) > 1e-6 || std::round(steps) < 1.0) {
    config_fail(path, "period must be a whole multiple of motion.dt");
  }
  (void)root;
}

ExperimentConfig extract(const json& root) {
  ExperimentConfig c;
  const json& seed = root.at("master_seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
    config_fail("master_seed", "expected a non-negative integer");
  }
  c.master_seed = seed.get<std::uint64_t>();
  c.output_dir = root.at("output_dir").get<std::string>();

  c.floor.outer_width = positive(root, "world.outer_width");
  c.floor.outer_height = positive(root, "world.outer_height");
  c.floor.corridor_width = positive(root, "world.corridor_width");
  c.floor.wall_thickness = positive(root, "world.wall_thickness");
  const auto origin = vector_of(root, "world.origin", 2);
  c.floor.origin = Point2(origin[0], origin[1]);
  c.resolution = positive(root, "world.resolution");

  static const std::regex kName("[A-Za-z0-9_-]+");
  c.floors = strings(root, "floors");
  if (c.floors.empty()) config_fail("floors", "needs at least one floor");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < c.floors.size(); ++i) {
    if (!std::regex_match(c.floors[i], kName)) {
      config_fail(fmt::format("floors[{}]", i), "names may use letters, digits, '_' and '-'");
    }
    if (!seen.insert(c.floors[i]).second) config_fail(fmt::format("floors[{}]", i), "duplicate floor");
  }
  const auto dirs = strings(root, "directions");
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    if (dirs[i] == "forward") {
      c.directions.push_back(Direction::kForward);
    } else if (dirs[i] == "backward") {
      c.directions.push_back(Direction::kBackward);
    } else {
      config_fail(fmt::format("directions[{}]", i), "expected 'forward' or 'backward'");
    }
  }
  const auto methods = strings(root, "methods");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    try {
      c.methods.push_back(parse_method(methods[i]));
    } catch (const Error& e) {
      config_fail(fmt::format("methods[{}]", i), e.what());
    }
  }

  c.ap_count = integer(root, "access_points.count", 1);
  const std::string layout = root.at("access_points").at("layout").get<std::string>();
  if (layout == "perimeter") {
    c.ap_layout = ApLayout::kPerimeter;
  } else if (layout == "uniform_random") {
    c.ap_layout = ApLayout::kUniformRandom;
  } else {
    config_fail("access_points.layout", "expected 'perimeter' or 'uniform_random'");
  }
  std::tie(c.radio_ranges.tx_power_min_dbm, c.radio_ranges.tx_power_max_dbm) =
      range_of(root, "access_points.tx_power_dbm");
  std::tie(c.radio_ranges.exponent_min, c.radio_ranges.exponent_max) =
      range_of(root, "access_points.path_loss_exponent");

  c.channel.shadowing_sigma_db = non_negative(root, "radio.shadowing_sigma_db");
  c.channel.wall_loss_db = non_negative(root, "radio.wall_loss_db");
  c.channel.dropout_prob = in_range(root, "radio.dropout_prob", 0.0, 1.0);
  c.channel.reference_distance = positive(root, "radio.reference_distance");

  c.motion.cruise_speed = positive(root, "motion.cruise_speed");
  c.motion.accel_limit = positive(root, "motion.accel_limit");
  c.motion.turn_rate = positive(root, "motion.turn_rate");
  c.motion.dt = positive(root, "motion.dt");

  c.imu_rate_hz = positive(root, "imu.rate_hz");
  if (c.imu_rate_hz * c.motion.dt < 1.0 - 1e-9) {
    config_fail("imu.rate_hz", "must be at least the ground-truth rate 1 / motion.dt");
  }
  const auto ba = vector_of(root, "imu.bias_accel", 3);
  const auto bg = vector_of(root, "imu.bias_gyro", 3);
  c.imu_errors.bias_accel = Eigen::Vector3d(ba[0], ba[1], ba[2]);
  c.imu_errors.bias_gyro = Eigen::Vector3d(bg[0], bg[1], bg[2]);
  c.imu_errors.sigma_accel = non_negative(root, "imu.sigma_accel");
  c.imu_errors.sigma_gyro = non_negative(root, "imu.sigma_gyro");

  c.wifi_rate_hz = positive(root, "wifi.rate_hz");
  require_whole_period(root, "wifi.rate_hz", c.wifi_rate_hz, c.motion.dt);
  c.lidar_rate_hz = positive(root, "lidar.rate_hz");
  require_whole_period(root, "lidar.rate_hz", c.lidar_rate_hz, c.motion.dt);
  c.lidar.beams = integer(root, "lidar.beams", 2);
  c.lidar.fov = in_range(root, "lidar.fov_deg", 1e-6, 360.0) * kDeg;
  c.lidar.max_range = positive(root, "lidar.max_range");
  c.lidar.range_sigma = non_negative(root, "lidar.range_sigma");

  c.rp_spacing = positive(root, "fingerprint.rp_spacing");
  c.samples_per_rp = integer(root, "fingerprint.samples_per_rp", 1);
  c.knn_k = integer(root, "fingerprint.knn_k", 1);
  c.train.epochs = integer(root, "fingerprint.epochs", 1);
  c.train.batch_size = integer(root, "fingerprint.batch_size", 1);
  c.train.adam.learning_rate = positive(root, "fingerprint.learning_rate");
  c.train.adam.beta1 = in_range(root, "fingerprint.beta1", 0.0, 1.0 - 1e-12);
  c.train.adam.beta2 = in_range(root, "fingerprint.beta2", 0.0, 1.0 - 1e-12);
  c.train.adam.epsilon = positive(root, "fingerprint.epsilon");
  c.train.train_fraction = in_range(root, "fingerprint.train_fraction", 1e-6, 1.0 - 1e-6);
  c.train.dropout_rate = in_range(root, "fingerprint.dropout_rate", 0.0, 0.95);

  c.slam.use_scans = root.at("slam").at("use_scans").get<bool>();
  c.slam.matcher.linear_window = non_negative(root, "slam.linear_window");
  c.slam.matcher.angular_window = non_negative(root, "slam.angular_window_deg") * kDeg;
  c.slam.matcher.angular_resolution = positive(root, "slam.angular_resolution_deg") * kDeg;
  c.slam.matcher.levels = integer(root, "slam.levels", 1);
  c.slam.matcher.min_score_fraction = in_range(root, "slam.min_score_fraction", 0.0, 1.0);
  c.slam.divergence_scans = integer(root, "slam.divergence_scans", 1);
  c.slam.velocity_gain = in_range(root, "slam.velocity_gain", 0.0, 1.0);
  c.slam.map_params.l_occ = positive(root, "slam.l_occ");
  c.slam.map_params.l_free = number(root, "slam.l_free");
  if (c.slam.map_params.l_free >= 0.0) config_fail("slam.l_free", "must be negative");
  c.slam.map_params.l_max = positive(root, "slam.l_max");

  const auto q = vector_of(root, "ekf.q_per_second", 5);
  c.noise.q_per_second = ekf::Matrix5::Zero();
  for (int i = 0; i < 5; ++i) {
    if (q[static_cast<std::size_t>(i)] < 0.0) {
      config_fail(fmt::format("ekf.q_per_second[{}]", i), "must be non-negative");
    }
    c.noise.q_per_second(i, i) = q[static_cast<std::size_t>(i)];
  }
  const double r = positive(root, "ekf.r_sigma");
  c.noise.r = r * r * ekf::Matrix2::Identity();
  const json& gate = root.at("ekf").at("gate_chi2");
  if (!gate.is_null()) c.noise.gate_chi2 = positive(root, "ekf.gate_chi2");
  const double sxy = positive(root, "ekf.initial_sigma_xy");
  const double sth = positive(root, "ekf.initial_sigma_heading_deg") * kDeg;
  const double sv = positive(root, "ekf.initial_sigma_v");
  const double sw = positive(root, "ekf.initial_sigma_omega");
  c.initial_covariance = ekf::Covariance::Zero();
  c.initial_covariance.diagonal() << sxy * sxy, sxy * sxy, sth * sth, sv * sv, sw * sw;
  c.ekf_scan_match_updates = root.at("ekf").at("scan_match_updates").get<bool>();
  c.scan_match_sigma = positive(root, "ekf.scan_match_sigma");
  c.noise.r_scan_match = c.scan_match_sigma * c.scan_match_sigma * ekf::Matrix2::Identity();

  c.resolved_json = root.dump(2) + "\n";
  return c;
}

// Runs fn(i) for i in [0, count) on up to `jobs` threads. The first failure in
// index order is rethrown.
template <typename Fn>
void run_tasks(std::size_t count, int jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1,
                                                      std::max<std::size_t>(count, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

class ArtifactLog {
 public:
  void add(const fs::path& path) {
    std::lock_guard<std::mutex> lock(mutex_);
    paths_.push_back(path);
  }
  const std::vector<fs::path>& paths() const { return paths_; }

 private:
  std::mutex mutex_;
  std::vector<fs::path> paths_;
};

std::string relative_name(const fs::path& out, const fs::path& path) {
  return fs::relative(path, out).generic_string();
}

void write_resolved_config(const ExperimentConfig& config, const fs::path& out) {
  io::write_text(out / "resolved_config.json", config.resolved_json);
}

void record_stage(const ExperimentConfig& config, const fs::path& out, const std::string& stage,
                  const ArtifactLog& artifacts, double seconds) {
  const fs::path path = out / "manifest.json";
  json manifest = json::object();
  if (fs::exists(path)) {
    try {
      manifest = json::parse(io::read_text(path));
    } catch (const json::exception&) {
      manifest = json::object();
    }
  }
  const std::string config_hash = sha256_hex(config.resolved_json);
  if (manifest.value("config_hash", std::string()) != config_hash) {
    manifest = json::object();  // stale stages belong to another config
  }
  manifest["run_id"] = config_hash.substr(0, 12);
  manifest["config_hash"] = config_hash;
  manifest["version"] = FUSELOCATE_VERSION;
  json files = json::object();
  for (const auto& p : artifacts.paths()) files[relative_name(out, p)] = sha256_hex(io::read_text(p));
  manifest["stages"][stage] = {{"wall_seconds", seconds}, {"artifacts", files}};
  io::write_text(path, manifest.dump(2) + "\n");
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void require_artifact(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw MissingArtifactError(
        fmt::format("missing upstream artifact {} (produced by `{}`)", path.string(), producer));
  }
}

struct RunKey {
  int floor = 0;
  Direction direction = Direction::kForward;
};

std::vector<RunKey> run_keys(const ExperimentConfig& config) {
  std::vector<RunKey> keys;
  for (int f = 0; f < static_cast<int>(config.floors.size()); ++f) {
    for (Direction d : config.directions) keys.push_back({f, d});
  }
  return keys;
}

std::uint64_t direction_index(Direction d) { return d == Direction::kForward ? 0 : 1; }

void write_wifi_events(const fs::path& path, std::span<const WifiFix> fixes) {
  std::string out;
  for (const auto& f : fixes) {
    out += json{{"t", f.t},
                {"x", f.estimate.position.x()},
                {"y", f.estimate.position.y()},
                {"low_confidence", f.estimate.low_confidence}}
               .dump() +
           "\n";
  }
  io::write_text(path, out);
}

}  // namespace

const char* direction_name(Direction direction) {
  return direction == Direction::kForward ? "forward" : "backward";
}

std::string method_slug(Method method) {
  switch (method) {
    case Method::kWiFi:
      return "wifi";
    case Method::kLidarImu:
      return "lidar_imu";
    case Method::kEkf:
      return "ekf";
  }
  return "unknown";
}

std::string default_config_json() { return defaults().dump(2) + "\n"; }

ExperimentConfig parse_config(const std::string& json_text,
                              const std::vector<std::string>& overrides) {
  json user;
  try {
    user = json_text.empty() ? json::object() : json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: invalid JSON: {}", e.what()));
  }
  for (const auto& o : overrides) apply_override(user, o);
  json merged = defaults();
  merge_into(merged, user, "");
  return extract(merged);
}

ExperimentConfig load_config(const std::optional<fs::path>& path,
                             const std::vector<std::string>& overrides) {
  std::string text;
  if (path) {
    try {
      text = io::read_text(*path);
    } catch (const IoError&) {
      throw ConfigError(fmt::format("config: cannot read {}", path->string()));
    }
  }
  return parse_config(text, overrides);
}

ExperimentConfig default_config() { return parse_config(""); }

fs::path resolve_output_dir(const std::optional<std::string>& cli_out,
                            const ExperimentConfig& config) {
  if (cli_out && !cli_out->empty()) return *cli_out;
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv("FUSELOCATE_OUT"); env != nullptr && *env != '\0') {
    return env;
  }
  return "fuselocate_out";
}

FloorAssets build_floor_assets(const ExperimentConfig& config, int floor_index) {
  FloorAssets assets;
  try {
    assets.grid = build_floor(config.floor, config.resolution);
    assets.aps = place_aps(assets.grid, config.ap_count, config.ap_layout,
                           derive_seed(config.master_seed,
                                       {static_cast<std::uint64_t>(floor_index), kStreamAps}),
                           config.radio_ranges);
  } catch (const InvalidArgument& e) {
    throw ConfigError(fmt::format("config: world: {}", e.what()));
  }
  return assets;
}

Pose2D start_pose(const ExperimentConfig& config, Direction direction) {
  const auto loop = corridor_loop(config.floor, direction == Direction::kForward);
  const Point2 leg = loop[1] - loop[0];
  return Pose2D(loop[0].x(), loop[0].y(), std::atan2(leg.y(), leg.x()));
}

SensorLogs simulate_run(const ExperimentConfig& config, const FloorAssets& assets,
                        int floor_index, Direction direction, std::uint64_t run_seed) {
  const auto f = static_cast<std::uint64_t>(floor_index);
  const auto d = direction_index(direction);
  const auto loop = corridor_loop(config.floor, direction == Direction::kForward);
  SensorLogs logs;
  logs.truth = generate_path(assets.grid, loop, config.motion);

  Rng imu_rng = make_rng(run_seed, {f, d, kStreamImu});
  logs.imu = simulate_imu(logs.truth, config.imu_errors, config.imu_rate_hz, imu_rng);

  const auto wifi_stride =
      static_cast<std::size_t>(std::llround(1.0 / (config.wifi_rate_hz * config.motion.dt)));
  Rng rssi_rng = make_rng(run_seed, {f, d, kStreamRssi});
  for (std::size_t k = 0; k < logs.truth.size(); k += wifi_stride) {
    logs.rssi.push_back({logs.truth[k].t, simulate_rssi(assets.aps, assets.grid,
                                                        logs.truth[k].pose, config.channel,
                                                        rssi_rng)});
  }

  const auto lidar_stride =
      static_cast<std::size_t>(std::llround(1.0 / (config.lidar_rate_hz * config.motion.dt)));
  Rng lidar_rng = make_rng(run_seed, {f, d, kStreamLidar});
  for (std::size_t k = 0; k < logs.truth.size(); k += lidar_stride) {
    logs.scans.push_back(simulate_lidar(assets.grid, logs.truth[k].pose, config.lidar,
                                        lidar_rng, logs.truth[k].t));
  }
  return logs;
}

FingerprintDatabase collect_floor_database(const ExperimentConfig& config,
                                           const FloorAssets& assets, int floor_index) {
  Rng rng = make_rng(config.master_seed,
                     {static_cast<std::uint64_t>(floor_index), kStreamDatabase});
  return collect_database(assets.grid, assets.aps, config.rp_spacing, config.samples_per_rp,
                          config.channel, rng);
}

DatabaseSplit split_floor_database(const ExperimentConfig& config,
                                   const FingerprintDatabase& db, int floor_index) {
  return split_database(
      db, config.train.train_fraction,
      derive_seed(config.master_seed, {static_cast<std::uint64_t>(floor_index), kStreamSplit}));
}

FingerprintDatabase normalize_database(const FingerprintDatabase& raw,
                                       const Normalization& normalization) {
  FingerprintDatabase out;
  out.ap_count = raw.ap_count;
  out.normalization = normalization;
  out.records.reserve(raw.records.size());
  for (const auto& r : raw.records) {
    const Eigen::VectorXd features = normalization.apply(r.rssi);
    FingerprintRecord record;
    record.position = r.position;
    record.rssi.values.assign(features.data(), features.data() + features.size());
    out.records.push_back(std::move(record));
  }
  return out;
}

TrainResult train_floor_model(const ExperimentConfig& config, const FingerprintDatabase& db,
                              int floor_index) {
  const DatabaseSplit split = split_floor_database(config, db, floor_index);
  const FingerprintDatabase train = preprocess(split.train);
  const FingerprintDatabase validation = normalize_database(split.test, *train.normalization);
  TrainConfig tc = config.train;
  tc.seed = derive_seed(config.master_seed, {static_cast<std::uint64_t>(floor_index), kStreamTrain});
  return train_mlp(train, tc, &validation);
}

std::vector<WifiFix> wifi_fixes(const io::StoredModel& model,
                                std::span<const io::TimedRssi> rssi) {
  std::vector<WifiFix> fixes;
  fixes.reserve(rssi.size());
  for (const auto& r : rssi) fixes.push_back({r.t, predict(model.model, r.rssi, model.normalization)});
  return fixes;
}

Trajectory wifi_trajectory(std::span<const WifiFix> fixes) {
  Trajectory trajectory;
  for (const auto& f : fixes) {
    trajectory.append(f.t, Pose2D(f.estimate.position.x(), f.estimate.position.y(), 0.0));
  }
  return trajectory;
}

SlamResult run_lidar_imu(const ExperimentConfig& config, const GridGeometry& geometry,
                         std::span<const ImuSample> imu, std::span<const LidarScan> scans,
                         Direction direction) {
  return slam_pipeline(imu, scans, start_pose(config, direction), geometry, config.slam);
}

ekf::FuseResult run_ekf(const ExperimentConfig& config, std::span<const ImuSample> imu,
                        std::span<const WifiFix> fixes, Direction direction,
                        const SlamResult* slam) {
  std::vector<ekf::PositionObservation> observations;
  for (const auto& f : fixes) {
    if (f.estimate.low_confidence) continue;
    observations.push_back({f.t, f.estimate.position, ekf::ObservationSource::kWiFi});
  }
  if (observations.empty()) {
    throw NumericalError("no usable Wi-Fi fix to initialize the filter");
  }
  if (config.ekf_scan_match_updates && slam != nullptr) {
    const auto& samples = slam->trajectory.samples();
    for (std::size_t i = 0; i < slam->events.size() && i < samples.size(); ++i) {
      if (!slam->events[i].converged) continue;
      observations.push_back(
          {samples[i].t, samples[i].pose.position(), ekf::ObservationSource::kScanMatch});
    }
    std::stable_sort(observations.begin(), observations.end(),
                     [](const auto& a, const auto& b) { return a.t < b.t; });
  }
  const Pose2D start = start_pose(config, direction);
  ekf::FilterInit init;
  const Point2 first = observations.front().z;
  init.state = ekf::make_state(first.x(), first.y(), start.theta, 0.0, 0.0);
  init.covariance = config.initial_covariance;
  return ekf::fuse_run(imu, observations, init, config.noise);
}

fs::path floor_dir(const fs::path& out, const ExperimentConfig& config, int floor_index) {
  return out / config.floors.at(static_cast<std::size_t>(floor_index));
}

fs::path run_dir(const fs::path& out, const ExperimentConfig& config, int floor_index,
                 Direction direction) {
  return floor_dir(out, config, floor_index) / direction_name(direction);
}

fs::path method_dir(const fs::path& out, const ExperimentConfig& config, int floor_index,
                    Direction direction, Method method) {
  return run_dir(out, config, floor_index, direction) / method_slug(method);
}

void cmd_generate(const ExperimentConfig& config, const fs::path& out, int jobs) {
  const StageTimer timer;
  write_resolved_config(config, out);
  ArtifactLog artifacts;
  std::vector<FloorAssets> assets(config.floors.size());
  run_tasks(config.floors.size(), jobs, [&](std::size_t f) {
    const int floor = static_cast<int>(f);
    assets[f] = build_floor_assets(config, floor);
    const fs::path dir = floor_dir(out, config, floor);
    io::write_grid(dir / "grid.pgm", assets[f].grid);
    io::write_access_points(dir / "aps.json", assets[f].aps);
    artifacts.add(dir / "grid.pgm");
    artifacts.add(dir / "grid.json");
    artifacts.add(dir / "aps.json");
  });
  const auto keys = run_keys(config);
  run_tasks(keys.size(), jobs, [&](std::size_t i) {
    const RunKey key = keys[i];
    const SensorLogs logs = simulate_run(config, assets[static_cast<std::size_t>(key.floor)],
                                         key.floor, key.direction, config.master_seed);
    const fs::path dir = run_dir(out, config, key.floor, key.direction);
    io::write_ground_truth(dir / "truth.csv", logs.truth);
    io::write_imu(dir / "imu.csv", logs.imu);
    io::write_rssi(dir / "rssi.csv", logs.rssi);
    io::write_scans(dir / "scan.csv", logs.scans);
    for (const char* name : {"truth.csv", "imu.csv", "rssi.csv", "scan.csv"}) {
      artifacts.add(dir / name);
    }
  });
  record_stage(config, out, "generate", artifacts, timer.seconds());
}

void cmd_fingerprint_collect(const ExperimentConfig& config, const fs::path& out, int jobs) {
  const StageTimer timer;
  write_resolved_config(config, out);
  ArtifactLog artifacts;
  run_tasks(config.floors.size(), jobs, [&](std::size_t f) {
    const int floor = static_cast<int>(f);
    const fs::path dir = floor_dir(out, config, floor);
    require_artifact(dir / "grid.pgm", "generate");
    require_artifact(dir / "aps.json", "generate");
    FloorAssets assets{io::read_grid(dir / "grid.pgm"), io::read_access_points(dir / "aps.json")};
    const FingerprintDatabase db = collect_floor_database(config, assets, floor);
    io::write_database(dir / "fingerprint" / "database.csv", db);
    artifacts.add(dir / "fingerprint" / "database.csv");
  });
  record_stage(config, out, "fingerprint_collect", artifacts, timer.seconds());
}

void cmd_fingerprint_train(const ExperimentConfig& config, const fs::path& out, int jobs) {
  const StageTimer timer;
  write_resolved_config(config, out);
  ArtifactLog artifacts;
  run_tasks(config.floors.size(), jobs, [&](std::size_t f) {
    const int floor = static_cast<int>(f);
    const fs::path dir = floor_dir(out, config, floor) / "fingerprint";
    require_artifact(dir / "database.csv", "fingerprint collect");
    const TrainResult result = train_floor_model(config, io::read_database(dir / "database.csv"), floor);
    io::write_model(dir / "model.json", result.model, result.normalization);
    json log{{"initial_loss", result.initial_loss},
             {"train_loss", result.train_loss},
             {"validation_loss", result.validation_loss}};
    io::write_text(dir / "training.json", log.dump(2) + "\n");
    artifacts.add(dir / "model.json");
    artifacts.add(dir / "training.json");
  });
  record_stage(config, out, "fingerprint_train", artifacts, timer.seconds());
}

void cmd_fingerprint_predict(const ExperimentConfig& config, const fs::path& out, int jobs) {
  const StageTimer timer;
  write_resolved_config(config, out);
  ArtifactLog artifacts;
  const auto keys = run_keys(config);
  run_tasks(keys.size(), jobs, [&](std::size_t i) {
    const RunKey key = keys[i];
    const fs::path model_path = floor_dir(out, config, key.floor) / "fingerprint" / "model.json";
    const fs::path dir = run_dir(out, config, key.floor, key.direction);
    require_artifact(model_path, "fingerprint train");
    require_artifact(dir / "rssi.csv", "generate");
    const auto rssi = io::read_rssi(dir / "rssi.csv");
    const auto fixes = wifi_fixes(io::read_model(model_path), rssi);
    std::string csv = "t,x,y,low_confidence\n";
    for (const auto& f : fixes) {
      csv += fmt::format("{},{},{},{}\n", io::format_number(f.t),
                         io::format_number(f.estimate.position.x()),
                         io::format_number(f.estimate.position.y()),
                         f.estimate.low_confidence ? 1 : 0);
    }
    io::write_text(dir / "wifi_fixes.csv", csv);
    artifacts.add(dir / "wifi_fixes.csv");
  });
  record_stage(config, out, "fingerprint_predict", artifacts, timer.seconds());
}

void cmd_fingerprint_eval(const ExperimentConfig& config, const fs::path& out, int jobs) {
  const StageTimer timer;
  write_resolved_config(config, out);
  ArtifactLog artifacts;
  run_tasks(config.floors.size(), jobs, [&](std::size_t f) {
    const int floor = static_cast<int>(f);
    const fs::path dir = floor_dir(out, config, floor) / "fingerprint";
    require_artifact(dir / "database.csv", "fingerprint collect");
    require_artifact(dir / "model.json", "fingerprint train");
    const DatabaseSplit split =
        split_floor_database(config, io::read_database(dir / "database.csv"), floor);
    const FingerprintDatabase reference = preprocess(split.train);
    const io::StoredModel model = io::read_model(dir / "model.json");
    const int k = std::min<int>(config.knn_k, static_cast<int>(reference.size()));
    double dnn_sum = 0.0;
    double knn_sum = 0.0;
    for (const auto& r : split.test.records) {
      dnn_sum += (predict(model.model, r.rssi, model.normalization).position - r.position).norm();
      knn_sum += (knn_predict(reference, r.rssi, k) - r.position).norm();
    }
    const double n = static_cast<double>(split.test.size());
    json report{{"test_records", split.test.size()},
                {"dnn_mean_2d_error", n > 0 ? dnn_sum / n : 0.0},
                {"knn_mean_2d_error", n > 0 ? knn_sum / n : 0.0},
                {"knn_k", k}};
    io::write_text(dir / "eval.json", report.dump(2) + "\n");
    artifacts.add(dir / "eval.json");
  });
  record_stage(config, out, "fingerprint_eval", artifacts, timer.seconds());
}

void cmd_run(const ExperimentConfig& config, const fs::path& out, Method method, int jobs) {
  const StageTimer timer;
  write_resolved_config(config, out);
  ArtifactLog artifacts;
  const auto keys = run_keys(config);
  run_tasks(keys.size(), jobs, [&](std::size_t i) {
    const RunKey key = keys[i];
    const fs::path floor = floor_dir(out, config, key.floor);
    const fs::path dir = run_dir(out, config, key.floor, key.direction);
    const fs::path target = method_dir(out, config, key.floor, key.direction, method);
    const fs::path model_path = floor / "fingerprint" / "model.json";
    auto load_fixes = [&] {
      require_artifact(model_path, "fingerprint train");
      require_artifact(dir / "rssi.csv", "generate");
      return wifi_fixes(io::read_model(model_path), io::read_rssi(dir / "rssi.csv"));
    };
    auto load_slam = [&](const std::vector<ImuSample>& imu) {
      require_artifact(floor / "grid.pgm", "generate");
      require_artifact(dir / "scan.csv", "generate");
      const GridGeometry geometry = io::read_grid(floor / "grid.pgm").geometry();
      const auto scans = io::read_scans(dir / "scan.csv", config.lidar.max_range);
      return run_lidar_imu(config, geometry, imu, scans, key.direction);
    };
    switch (method) {
      case Method::kWiFi: {
        const auto fixes = load_fixes();
        io::write_trajectory(target / "trajectory.csv", wifi_trajectory(fixes));
        write_wifi_events(target / "events.jsonl", fixes);
        break;
      }
      case Method::kLidarImu: {
        require_artifact(dir / "imu.csv", "generate");
        const auto imu = io::read_imu(dir / "imu.csv");
        const SlamResult slam = load_slam(imu);
        io::write_trajectory(target / "trajectory.csv", slam.trajectory);
        io::write_slam_events(target / "events.jsonl", slam.events);
        io::write_map(target / "map.pgm", slam.map);
        artifacts.add(target / "map.pgm");
        artifacts.add(target / "map.json");
        break;
      }
      case Method::kEkf: {
        require_artifact(dir / "imu.csv", "generate");
        const auto imu = io::read_imu(dir / "imu.csv");
        const auto fixes = load_fixes();
        std::optional<SlamResult> slam;
        if (config.ekf_scan_match_updates) slam = load_slam(imu);
        const ekf::FuseResult fused =
            run_ekf(config, imu, fixes, key.direction, slam ? &*slam : nullptr);
        io::write_trajectory(target / "trajectory.csv", fused.trajectory());
        io::write_fused(target / "fused.csv", fused.samples);
        io::write_filter_events(target / "events.jsonl", fused.events);
        artifacts.add(target / "fused.csv");
        break;
      }
    }
    artifacts.add(target / "trajectory.csv");
    artifacts.add(target / "events.jsonl");
  });
  record_stage(config, out, "run_" + method_slug(method), artifacts, timer.seconds());
}

EvaluateSummary cmd_evaluate(const ExperimentConfig& config, const fs::path& out) {
  const StageTimer timer;
  write_resolved_config(config, out);
  ArtifactLog artifacts;
  EvaluateSummary summary;
  const fs::path report_dir = out / "report";
  const std::string run_id = sha256_hex(config.resolved_json).substr(0, 12);

  std::string report = "run_id,floor,direction,method,mean_2d_error,median,p95,max,n_samples\n";
  // (floor, method) and (direction, method) accumulators of per-run means.
  std::map<std::pair<int, Method>, std::pair<double, int>> by_floor;
  std::map<std::pair<int, Method>, std::pair<double, int>> by_direction;

  for (const RunKey& key : run_keys(config)) {
    const std::string floor_name = config.floors[static_cast<std::size_t>(key.floor)];
    const std::string label = fmt::format("{}/{}", floor_name, direction_name(key.direction));
    const fs::path dir = run_dir(out, config, key.floor, key.direction);
    if (!fs::exists(dir / "truth.csv")) {
      summary.warnings.push_back(fmt::format("{}: missing truth.csv, run skipped", label));
      continue;
    }
    const Trajectory truth = to_trajectory(io::read_ground_truth(dir / "truth.csv"));
    std::map<Method, Trajectory> estimates;
    for (Method m : config.methods) {
      const fs::path path = method_dir(out, config, key.floor, key.direction, m) / "trajectory.csv";
      if (!fs::exists(path)) {
        summary.warnings.push_back(fmt::format("{}: missing {} trajectory", label, method_name(m)));
        continue;
      }
      estimates.emplace(m, io::read_trajectory(path));
    }
    if (estimates.empty()) continue;
    const Comparison comparison = compare_methods(truth, estimates);
    for (const auto& w : comparison.warnings) summary.warnings.push_back(label + ": " + w);
    std::vector<MethodReport> ordered = comparison.reports;
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.method < b.method; });
    for (const auto& r : ordered) {
      report += fmt::format("{},{},{},{},{},{},{},{},{}\n", run_id, floor_name,
                            direction_name(key.direction), method_name(r.method),
                            io::format_number(r.mean_2d_error), io::format_number(r.median),
                            io::format_number(r.p95), io::format_number(r.max), r.samples);
      ++summary.report_rows;
      auto& fa = by_floor[{key.floor, r.method}];
      fa.first += r.mean_2d_error;
      ++fa.second;
      auto& da = by_direction[{static_cast<int>(direction_index(key.direction)), r.method}];
      da.first += r.mean_2d_error;
      ++da.second;
    }

    const std::string stem = fmt::format("{}_{}", floor_name, direction_name(key.direction));
    for (const auto& [m, estimate] : estimates) {
      const Alignment alignment = align(truth, estimate);
      std::string cdf = "error,fraction\n";
      for (const auto& p : error_cdf(alignment.pairs)) {
        cdf += io::format_number(p.error) + "," + io::format_number(p.fraction) + "\n";
      }
      const fs::path cdf_path = report_dir / fmt::format("{}_{}_cdf.csv", stem, method_slug(m));
      io::write_text(cdf_path, cdf);
      artifacts.add(cdf_path);
    }
    const fs::path grid_path = floor_dir(out, config, key.floor) / "grid.pgm";
    if (fs::exists(grid_path)) {
      const fs::path svg = report_dir / (stem + "_overlay.svg");
      render_overlay(io::read_grid(grid_path), truth, estimates, svg);
      artifacts.add(svg);
    } else {
      summary.warnings.push_back(fmt::format("{}: missing grid.pgm, overlay skipped", label));
    }
  }

  std::string floor_table = "floor,method,mean_2d_error,runs\n";
  for (const auto& [k, acc] : by_floor) {
    floor_table += fmt::format("{},{},{},{}\n", config.floors[static_cast<std::size_t>(k.first)],
                               method_name(k.second), io::format_number(acc.first / acc.second),
                               acc.second);
    ++summary.floor_rows;
  }
  std::string direction_table = "direction,method,mean_2d_error,runs\n";
  for (const auto& [k, acc] : by_direction) {
    direction_table += fmt::format(
        "{},{},{},{}\n", direction_name(k.first == 0 ? Direction::kForward : Direction::kBackward),
        method_name(k.second), io::format_number(acc.first / acc.second), acc.second);
    ++summary.direction_rows;
  }
  if (summary.report_rows == 0) summary.warnings.push_back("no run artifacts to evaluate");

  io::write_text(report_dir / "report.csv", report);
  io::write_text(report_dir / "floor_table.csv", floor_table);
  io::write_text(report_dir / "direction_table.csv", direction_table);
  json status{{"run_id", run_id},
              {"partial", !summary.warnings.empty()},
              {"warnings", summary.warnings}};
  io::write_text(report_dir / "summary.json", status.dump(2) + "\n");
  for (const char* name : {"report.csv", "floor_table.csv", "direction_table.csv", "summary.json"}) {
    artifacts.add(report_dir / name);
  }
  record_stage(config, out, "evaluate", artifacts, timer.seconds());
  return summary;
}

EvaluateSummary cmd_all(const ExperimentConfig& config, const fs::path& out, int jobs) {
  cmd_generate(config, out, jobs);
  cmd_fingerprint_collect(config, out, jobs);
  cmd_fingerprint_train(config, out, jobs);
  for (Method m : config.methods) cmd_run(config, out, m, jobs);
  return cmd_evaluate(config, out);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::vector<std::string> verify_manifest(const fs::path& out) {
  std::vector<std::string> problems;
  const fs::path path = out / "manifest.json";
  if (!fs::exists(path)) return {"manifest.json is missing"};
  json manifest;
  try {
    manifest = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    return {fmt::format("manifest.json is invalid: {}", e.what())};
  }
  const json stages = manifest.value("stages", json::object());
  for (const auto& [stage, entry] : stages.items()) {
    for (const auto& [name, hash] : entry.at("artifacts").items()) {
      const fs::path artifact = out / name;
      if (!fs::exists(artifact)) {
        problems.push_back(fmt::format("{}: {} is missing", stage, name));
      } else if (sha256_hex(io::read_text(artifact)) != hash.get<std::string>()) {
        problems.push_back(fmt::format("{}: {} does not match its hash", stage, name));
      }
    }
  }
  return problems;
}

}  // namespace fuselocate
