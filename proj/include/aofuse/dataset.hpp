// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aofuse/scene.hpp"
#include "aofuse/simulate.hpp"
#include "json.hpp"

namespace aofuse {

using json = nlohmann::json;

struct DatasetFrame {
  Pose camera_pose;  // world-from-sensor
  Pose sonar_pose;
  std::string camera_image;  // relative to the dataset directory
  std::string sonar_image;
};

struct Manifest {
  static constexpr int kVersion = 1;
  CameraModel camera;
  SonarModel sonar;
  double baseline = 0.0;
  double standoff = 0.0;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  std::array<Vec3, 2> roi{Vec3::Zero(), Vec3::Zero()};
  std::optional<AnalyticScene> scene;
  std::vector<DatasetFrame> frames;
};

struct Dataset {
  Manifest manifest;
  std::vector<CameraImage> camera;
  std::vector<SonarImage> sonar;

  bool has_camera() const { return !camera.empty(); }
  bool has_sonar() const { return !sonar.empty(); }
};

json camera_to_json(const CameraModel& cam);
json sonar_to_json(const SonarModel& sonar);
json scene_to_json(const AnalyticScene& scene);
json pose_to_json(const Pose& pose);
/// Strict parsers for machine-written documents; they throw BadDataset.
CameraModel camera_from_json(const json& j);
SonarModel sonar_from_json(const json& j);
AnalyticScene scene_from_json(const json& j);
Pose pose_from_json(const json& j);

json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const json& j);

void write_manifest(const Manifest& m, const std::filesystem::path& file);
Manifest read_manifest(const std::filesystem::path& file);

/// Binary PPM (P6), 16-bit big-endian samples, maxval 65535.
void write_ppm16(const CameraImage& img, const std::filesystem::path& file);
/// Throws BadDataset on malformed files or a size mismatch with `model`.
CameraImage read_ppm16(const std::filesystem::path& file, const CameraModel& model, const Pose& pose);

/// Grayscale PFM ("Pf"), width = azimuth bins, height = range bins, float32
/// little-endian (scale -1.0). Scanlines are stored in increasing range-bin
/// order.
void write_pfm(const SonarImage& img, const std::filesystem::path& file);
SonarImage read_pfm(const std::filesystem::path& file, const SonarModel& model, const Pose& pose);

/// Loads manifest and every image. Throws BadDataset.
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes images plus a manifest, reusing frame file names.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace aofuse
