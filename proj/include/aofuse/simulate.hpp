// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "aofuse/scene.hpp"
#include "aofuse/sensors.hpp"

// Ground-truth simulators. Nothing in here may depend on the field or render
// modules: measurements are generated by surface tracing, never by the
// volumetric model that is being fitted to them.

namespace aofuse {

struct ReflectionResult {
  double intensity = 0.0;
  bool grazing = false;
};

/// Diffuse plus specular-lobe acoustic reflection:
///   I = C_dl cos a + C_sl G(a) exp(-a^2 / (2 sigma^2)) / cos a,
///   G(a) = min(1, 2 cos^2 a).
/// Incidence at or beyond pi/2 - 1e-6 returns 0 flagged as grazing.
ReflectionResult reflection_intensity(double alpha, const Material& mat);

struct CameraImage {
  CameraModel model;
  Pose pose;
  std::vector<double> rgb;  // [row v][column u][channel], values in [0, 1]

  CameraImage() = default;
  CameraImage(const CameraModel& m, const Pose& p)
      : model(m), pose(p), rgb(static_cast<std::size_t>(m.width) * m.height * 3, 0.0) {}
  std::size_t index(int u, int v, int c) const {
    return (static_cast<std::size_t>(v) * model.width + u) * 3 + c;
  }
  double at(int u, int v, int c) const { return rgb[index(u, v, c)]; }
};

struct SonarImage {
  SonarModel model;
  Pose pose;
  std::vector<double> intensities;  // [range bin][azimuth bin]

  SonarImage() = default;
  SonarImage(const SonarModel& m, const Pose& p)
      : model(m), pose(p), intensities(static_cast<std::size_t>(m.n_range_bins) * m.n_azimuth_bins, 0.0) {}
  std::size_t index(int range_bin, int azimuth_bin) const {
    return static_cast<std::size_t>(range_bin) * model.n_azimuth_bins + azimuth_bin;
  }
  double at(int range_bin, int azimuth_bin) const { return intensities[index(range_bin, azimuth_bin)]; }
  double total() const;
};

/// Headlight Lambertian render: albedo * max(0, n . v) at the first hit,
/// 0 for background.
CameraImage render_camera_gt(const AnalyticScene& scene, const CameraModel& cam, const Pose& pose,
                             int threads = 1);

/// First-return sonar render. For every azimuth bin centre and each of n_phi
/// stratum-midpoint elevations, the beam is sphere traced; a hit at range r
/// with incidence a deposits (E_e / r) * I(a) * dphi into its range bin.
SonarImage render_sonar_gt(const AnalyticScene& scene, const SonarModel& sonar, const Pose& pose, int n_phi,
                           int threads = 1);

/// Camera looks along world +Z; sonar elevation axis along world -X, so its
/// azimuthal plane stays parallel to world YZ.
Mat3 default_camera_rotation();
Mat3 default_sonar_rotation();

struct Trajectory {
  std::vector<Pose> rig;  // world-from-rig, translated along world X only
  double baseline = 0.0;
  double standoff = 0.0;
  Pose camera_from_rig;
  Pose sonar_from_rig;

  Pose camera_pose(std::size_t i) const { return rig[i].compose(camera_from_rig); }
  Pose sonar_pose(std::size_t i) const { return rig[i].compose(sonar_from_rig); }
  /// Point the sensors face: (baseline / 2, 0, standoff).
  Vec3 target() const { return {0.5 * baseline, 0.0, standoff}; }
};

/// n_poses rig positions equally spaced on x in [0, baseline]. Throws BadConfig.
Trajectory make_trajectory(double baseline, int n_poses, double standoff);

struct NoiseConfig {
  double camera_std = 0.0;
  double sonar_std = 0.0;
};

/// Everything needed to synthesize one dataset.
struct DatasetSpec {
  AnalyticScene scene;  // world frame
  CameraModel camera;
  SonarModel sonar;
  double baseline = 0.24;
  int n_poses = 24;
  double standoff = 1.75;
  NoiseConfig noise;
  int n_phi = 256;
  double roi_padding = 0.2;  // fractional padding of the scene bounds
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Region of interest: scene bounds padded by `padding` of their extent on
/// every side.
std::array<Vec3, 2> padded_bounds(const AnalyticScene& scene, double padding);

/// Writes manifest.json, cam/%04d.ppm and son/%04d.pfm under `dir`.
/// Deterministic for a fixed spec. Throws IoError or BadConfig.
void generate_dataset(const DatasetSpec& spec, const std::filesystem::path& dir);

}  // namespace aofuse
