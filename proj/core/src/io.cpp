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

#include "fuselocate/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "fuselocate/common.hpp"
#include "json.hpp"

namespace fuselocate::io {
namespace {

using nlohmann::json;

constexpr int kModelFormatVersion = 1;

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_number(std::string_view text, const fs::path& path, std::size_t line) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw IoError(fmt::format("{}:{}: cannot parse number '{}'", path.string(), line, text));
  }
  return value;
}

// Reads a CSV with a header row; calls `row(fields, line_number)` per data
// row after checking the column count.
template <typename RowFn>
std::vector<std::string> read_csv(const fs::path& path, RowFn&& row) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw IoError(fmt::format("{} is empty", path.string()));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  for (auto f : split(line)) header.emplace_back(f);
  std::size_t number = 1;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw IoError(fmt::format("{}:{}: expected {} columns, found {}", path.string(),
                                number, header.size(), fields.size()));
    }
    values.clear();
    for (auto f : fields) values.push_back(parse_number(f, path, number));
    row(values, number);
  }
  return header;
}

void expect_header(const std::vector<std::string>& header,
                   const std::vector<std::string>& expected, const fs::path& path) {
  if (header != expected) {
    std::string joined;
    for (const auto& h : expected) joined += (joined.empty() ? "" : ",") + h;
    throw IoError(fmt::format("{}: unexpected header, expected '{}'", path.string(), joined));
  }
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw IoError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
}

std::string rssi_header(std::size_t m, const char* first) {
  std::string header = first;
  for (std::size_t i = 0; i < m; ++i) header += fmt::format(",rssi_{}", i);
  return header;
}

}  // namespace

std::string format_number(double value) {
  if (value == 0.0) return "0";  // folds -0
  return fmt::format("{:.9g}", value);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError(fmt::format("cannot create directory {}: {}",
                                path.parent_path().string(), ec.message()));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << content;
  out.close();
  if (!out) throw IoError(fmt::format("failed while writing {}", path.string()));
}

fs::path sidecar_path(const fs::path& pgm_path) {
  fs::path p = pgm_path;
  p.replace_extension(".json");
  return p;
}

void write_grid(const fs::path& pgm_path, const OccupancyGrid& grid) {
  std::string pgm = fmt::format("P5\n{} {}\n255\n", grid.width(), grid.height());
  pgm.reserve(pgm.size() + grid.geometry().cell_count());
  for (int y = grid.height() - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width(); ++x) {
      switch (grid.at({x, y})) {
        case CellState::kWall:
          pgm.push_back(static_cast<char>(0));
          break;
        case CellState::kFree:
          pgm.push_back(static_cast<char>(254));
          break;
        case CellState::kUnknown:
          pgm.push_back(static_cast<char>(205));
          break;
      }
    }
  }
  write_text(pgm_path, pgm);
  json meta;
  meta["image"] = pgm_path.filename().string();
  meta["resolution"] = grid.resolution();
  meta["origin"] = {grid.origin().x(), grid.origin().y(), 0.0};
  meta["width"] = grid.width();
  meta["height"] = grid.height();
  meta["occupied_thresh"] = 0.65;
  meta["free_thresh"] = 0.35;
  meta["negate"] = 0;
  write_text(sidecar_path(pgm_path), meta.dump(2) + "\n");
}

OccupancyGrid read_grid(const fs::path& pgm_path) {
  const json meta = read_json(sidecar_path(pgm_path));
  GridGeometry g;
  try {
    g.resolution = meta.at("resolution").get<double>();
    g.origin = Point2(meta.at("origin").at(0).get<double>(), meta.at("origin").at(1).get<double>());
    g.width = meta.at("width").get<int>();
    g.height = meta.at("height").get<int>();
  } catch (const json::exception& e) {
    throw IoError(fmt::format("{}: {}", sidecar_path(pgm_path).string(), e.what()));
  }
  const std::string data = read_text(pgm_path);
  std::istringstream header(data);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  header >> magic >> w >> h >> maxval;
  if (!header || magic != "P5" || maxval != 255) {
    throw IoError(fmt::format("{}: not an 8-bit binary PGM", pgm_path.string()));
  }
  if (w != g.width || h != g.height) {
    throw IoError(fmt::format("{}: size {}x{} disagrees with its sidecar {}x{}",
                              pgm_path.string(), w, h, g.width, g.height));
  }
  const auto offset = static_cast<std::size_t>(header.tellg()) + 1;
  if (data.size() < offset + g.cell_count()) {
    throw IoError(fmt::format("{}: truncated pixel data", pgm_path.string()));
  }
  OccupancyGrid grid(g, CellState::kUnknown);
  std::size_t i = offset;
  for (int y = g.height - 1; y >= 0; --y) {
    for (int x = 0; x < g.width; ++x) {
      const auto v = static_cast<unsigned char>(data[i++]);
      grid.set({x, y}, v <= 50 ? CellState::kWall
                               : (v >= 250 ? CellState::kFree : CellState::kUnknown));
    }
  }
  return grid;
}

void write_map(const fs::path& pgm_path, const LogOddsMap& map) {
  write_grid(pgm_path, map.threshold(0.65, 0.35));
}

void write_access_points(const fs::path& path, std::span<const AccessPoint> aps) {
  json arr = json::array();
  for (const auto& ap : aps) {
    arr.push_back({{"id", ap.id},
                   {"x", ap.position.x()},
                   {"y", ap.position.y()},
                   {"tx_power_dbm", ap.tx_power_dbm},
                   {"path_loss_exponent", ap.path_loss_exponent}});
  }
  write_text(path, json{{"access_points", arr}}.dump(2) + "\n");
}

std::vector<AccessPoint> read_access_points(const fs::path& path) {
  const json doc = read_json(path);
  std::vector<AccessPoint> aps;
  try {
    for (const auto& item : doc.at("access_points")) {
      AccessPoint ap;
      ap.id = item.at("id").get<int>();
      ap.position = Point2(item.at("x").get<double>(), item.at("y").get<double>());
      ap.tx_power_dbm = item.at("tx_power_dbm").get<double>();
      ap.path_loss_exponent = item.at("path_loss_exponent").get<double>();
      aps.push_back(ap);
    }
  } catch (const json::exception& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return aps;
}

void write_ground_truth(const fs::path& path, std::span<const GroundTruthSample> samples) {
  std::string out = "t,x,y,theta,v,omega,a\n";
  for (const auto& s : samples) {
    out += fmt::format("{},{},{},{},{},{},{}\n", format_number(s.t), format_number(s.pose.x),
                       format_number(s.pose.y), format_number(s.pose.theta),
                       format_number(s.v), format_number(s.omega), format_number(s.a));
  }
  write_text(path, out);
}

std::vector<GroundTruthSample> read_ground_truth(const fs::path& path) {
  std::vector<GroundTruthSample> samples;
  const auto header = read_csv(path, [&](const std::vector<double>& v, std::size_t) {
    samples.push_back({v[0], Pose2D(v[1], v[2], v[3]), v[4], v[5], v[6]});
  });
  expect_header(header, {"t", "x", "y", "theta", "v", "omega", "a"}, path);
  return samples;
}

void write_imu(const fs::path& path, std::span<const ImuSample> samples) {
  std::string out = "t,ax,ay,az,gx,gy,gz\n";
  for (const auto& s : samples) {
    out += fmt::format("{},{},{},{},{},{},{}\n", format_number(s.t),
                       format_number(s.accel.x()), format_number(s.accel.y()),
                       format_number(s.accel.z()), format_number(s.gyro.x()),
                       format_number(s.gyro.y()), format_number(s.gyro.z()));
  }
  write_text(path, out);
}

std::vector<ImuSample> read_imu(const fs::path& path) {
  std::vector<ImuSample> samples;
  const auto header = read_csv(path, [&](const std::vector<double>& v, std::size_t) {
    ImuSample s;
    s.t = v[0];
    s.accel = Eigen::Vector3d(v[1], v[2], v[3]);
    s.gyro = Eigen::Vector3d(v[4], v[5], v[6]);
    samples.push_back(s);
  });
  expect_header(header, {"t", "ax", "ay", "az", "gx", "gy", "gz"}, path);
  return samples;
}

void write_rssi(const fs::path& path, std::span<const TimedRssi> samples) {
  const std::size_t m = samples.empty() ? 0 : samples.front().rssi.size();
  std::string out = rssi_header(m, "t") + "\n";
  for (const auto& s : samples) {
    if (s.rssi.size() != m) throw InvalidArgument("RSSI rows differ in length");
    out += format_number(s.t);
    for (double v : s.rssi.values) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  write_text(path, out);
}

std::vector<TimedRssi> read_rssi(const fs::path& path) {
  std::vector<TimedRssi> samples;
  const auto header = read_csv(path, [&](const std::vector<double>& v, std::size_t) {
    TimedRssi s;
    s.t = v[0];
    s.rssi.values.assign(v.begin() + 1, v.end());
    samples.push_back(std::move(s));
  });
  std::vector<std::string> expected{"t"};
  for (std::size_t i = 1; i < header.size(); ++i) expected.push_back(fmt::format("rssi_{}", i - 1));
  expect_header(header, expected, path);
  return samples;
}

void write_scans(const fs::path& path, std::span<const LidarScan> scans) {
  std::string out = "t,beam_index,angle,range\n";
  for (const auto& scan : scans) {
    const std::string t = format_number(scan.t);
    for (std::size_t i = 0; i < scan.size(); ++i) {
      out += fmt::format("{},{},{},{}\n", t, i, format_number(scan.angles[i]),
                         format_number(scan.ranges[i]));
    }
  }
  write_text(path, out);
}

std::vector<LidarScan> read_scans(const fs::path& path, double max_range) {
  std::vector<LidarScan> scans;
  const auto header = read_csv(path, [&](const std::vector<double>& v, std::size_t line) {
    const auto beam = static_cast<std::size_t>(v[1]);
    if (beam == 0) {
      LidarScan scan;
      scan.t = v[0];
      scan.max_range = max_range;
      scans.push_back(std::move(scan));
    }
    if (scans.empty() || scans.back().t != v[0] || scans.back().size() != beam) {
      throw IoError(fmt::format("{}:{}: beams out of sequence", path.string(), line));
    }
    scans.back().angles.push_back(v[2]);
    scans.back().ranges.push_back(std::min(v[3], max_range));
  });
  expect_header(header, {"t", "beam_index", "angle", "range"}, path);
  return scans;
}

void write_database(const fs::path& path, const FingerprintDatabase& db) {
  std::string out = rssi_header(static_cast<std::size_t>(db.ap_count), "x,y") + "\n";
  for (const auto& r : db.records) {
    out += format_number(r.position.x()) + "," + format_number(r.position.y());
    for (double v : r.rssi.values) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  write_text(path, out);
}

FingerprintDatabase read_database(const fs::path& path) {
  FingerprintDatabase db;
  const auto header = read_csv(path, [&](const std::vector<double>& v, std::size_t) {
    FingerprintRecord r;
    r.position = Point2(v[0], v[1]);
    r.rssi.values.assign(v.begin() + 2, v.end());
    db.records.push_back(std::move(r));
  });
  std::vector<std::string> expected{"x", "y"};
  for (std::size_t i = 2; i < header.size(); ++i) expected.push_back(fmt::format("rssi_{}", i - 2));
  expect_header(header, expected, path);
  db.ap_count = static_cast<int>(header.size()) - 2;
  return db;
}

std::string model_to_json(const MlpModel& model, const Normalization& normalization) {
  json doc;
  doc["format"] = "fuselocate-mlp";
  doc["version"] = kModelFormatVersion;
  doc["dims"] = model.dims();
  doc["dropout_rate"] = model.dropout_rate();
  json layers = json::array();
  for (const auto& layer : model.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.push_back(layer.weights(r, c));
    }
    layers.push_back({{"weights", w},
                      {"bias", std::vector<double>(layer.bias.data(),
                                                   layer.bias.data() + layer.bias.size())}});
  }
  doc["layers"] = layers;
  doc["normalization"] = {{"offset", normalization.offset}, {"scale", normalization.scale}};
  return doc.dump() + "\n";
}

StoredModel model_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "fuselocate-mlp") throw IoError("not a fuselocate model file");
    if (doc.at("version").get<int>() != kModelFormatVersion) {
      throw IoError(fmt::format("unsupported model version {}", doc.at("version").dump()));
    }
    StoredModel out;
    out.model = MlpModel(doc.at("dims").get<std::vector<int>>(),
                         doc.at("dropout_rate").get<double>());
    const auto& layers = doc.at("layers");
    if (layers.size() != out.model.layers().size()) throw IoError("layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& layer = out.model.layers()[i];
      const auto w = layers[i].at("weights").get<std::vector<double>>();
      const auto b = layers[i].at("bias").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(layer.weights.size()) ||
          b.size() != static_cast<std::size_t>(layer.bias.size())) {
        throw IoError(fmt::format("layer {} has the wrong number of parameters", i));
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = w[k++];
      }
      for (std::size_t j = 0; j < b.size(); ++j) layer.bias[static_cast<Eigen::Index>(j)] = b[j];
    }
    out.normalization.offset = doc.at("normalization").at("offset").get<std::vector<double>>();
    out.normalization.scale = doc.at("normalization").at("scale").get<std::vector<double>>();
    if (out.normalization.size() != static_cast<std::size_t>(out.model.input_dim()) ||
        out.normalization.scale.size() != out.normalization.offset.size()) {
      throw IoError("normalization size differs from the model input");
    }
    return out;
  } catch (const json::exception& e) {
    throw IoError(fmt::format("invalid model file: {}", e.what()));
  }
}

void write_model(const fs::path& path, const MlpModel& model,
                 const Normalization& normalization) {
  write_text(path, model_to_json(model, normalization));
}

StoredModel read_model(const fs::path& path) {
  try {
    return model_from_json(read_text(path));
  } catch (const IoError& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_trajectory(const fs::path& path, const Trajectory& trajectory) {
  std::string out = "t,x,y,theta\n";
  for (const auto& s : trajectory.samples()) {
    out += fmt::format("{},{},{},{}\n", format_number(s.t), format_number(s.pose.x),
                       format_number(s.pose.y), format_number(s.pose.theta));
  }
  write_text(path, out);
}

Trajectory read_trajectory(const fs::path& path) {
  std::vector<TimedPose> samples;
  const auto header = read_csv(path, [&](const std::vector<double>& v, std::size_t) {
    samples.push_back({v[0], Pose2D(v[1], v[2], v[3])});
  });
  expect_header(header, {"t", "x", "y", "theta"}, path);
  try {
    return Trajectory(std::move(samples));
  } catch (const InvalidArgument& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_fused(const fs::path& path, std::span<const ekf::FusedSample> samples) {
  std::string out = "t,x,y,theta,v,omega,p_xx,p_yy\n";
  for (const auto& s : samples) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", format_number(s.t),
                       format_number(s.state[ekf::kX]), format_number(s.state[ekf::kY]),
                       format_number(s.state[ekf::kTheta]), format_number(s.state[ekf::kV]),
                       format_number(s.state[ekf::kOmega]), format_number(s.p_xx),
                       format_number(s.p_yy));
  }
  write_text(path, out);
}

void write_filter_events(const fs::path& path, std::span<const ekf::FilterEvent> events) {
  std::string out;
  for (const auto& e : events) {
    json line;
    line["t"] = e.t;
    if (e.kind == ekf::FilterEvent::Kind::kUpdate) {
      line["event"] = "update";
      line["source"] = e.source == ekf::ObservationSource::kWiFi ? "wifi" : "scan_match";
      line["accepted"] = e.accepted;
      line["innovation_norm"] = e.innovation_norm;
      line["mahalanobis2"] = e.mahalanobis2;
    } else {
      line["event"] = "imu_gap";
      line["message"] = e.message;
    }
    out += line.dump() + "\n";
  }
  write_text(path, out);
}

void write_slam_events(const fs::path& path, std::span<const SlamEvent> events) {
  std::string out;
  for (const auto& e : events) {
    json line{{"t", e.t}, {"converged", e.converged}, {"score", e.score}};
    if (!e.note.empty()) line["note"] = e.note;
    out += line.dump() + "\n";
  }
  write_text(path, out);
}

}  // namespace fuselocate::io
