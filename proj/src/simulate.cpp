// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "aofuse/dataset.hpp"
#include "aofuse/parallel.hpp"
#include "aofuse/rng.hpp"

namespace aofuse {

namespace {

constexpr double kCameraFar = 100.0;
constexpr double kGrazingMargin = 1e-6;

std::string frame_name(const char* dir, int i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s/%04d.%s", dir, i, ext);
  return buf;
}

}  // namespace

ReflectionResult reflection_intensity(double alpha, const Material& mat) {
  if (alpha >= 0.5 * kPi - kGrazingMargin) return {0.0, true};
  const double c = std::cos(alpha);
  const double geometric = std::min(1.0, 2.0 * c * c);
  const double lobe = std::exp(-alpha * alpha / (2.0 * mat.sigma_alpha * mat.sigma_alpha));
  return {mat.C_dl * c + mat.C_sl * geometric * lobe / c, false};
}

double SonarImage::total() const { return std::accumulate(intensities.begin(), intensities.end(), 0.0); }

CameraImage render_camera_gt(const AnalyticScene& scene, const CameraModel& cam, const Pose& pose, int threads) {
  CameraImage img(cam, pose);
  if (scene.empty()) return img;
  const auto& albedo = scene.material().optical_albedo;
  parallel_for(static_cast<std::size_t>(cam.height), threads, [&](std::size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < cam.width; ++u) {
      const Ray ray = camera_ray(cam, pose, u + 0.5, v + 0.5);
      const auto hit = scene.trace(ray, kCameraFar);
      if (!hit) continue;
      const auto nr = scene.normal(ray.origin + *hit * ray.dir);
      const double shade = std::max(0.0, -nr.n.dot(ray.dir));
      for (int c = 0; c < 3; ++c) img.rgb[img.index(u, v, c)] = std::clamp(albedo[c] * shade, 0.0, 1.0);
    }
  });
  return img;
}

SonarImage render_sonar_gt(const AnalyticScene& scene, const SonarModel& sonar, const Pose& pose, int n_phi,
                           int threads) {
  SonarImage img(sonar, pose);
  if (scene.empty() || n_phi < 1) return img;
  const double dphi = sonar.elevation_aperture() / n_phi;
  const auto phis = stratified_elevations(sonar.phi_min, sonar.phi_max, n_phi);
  parallel_for(static_cast<std::size_t>(sonar.n_azimuth_bins), threads, [&](std::size_t col) {
    const int j = static_cast<int>(col);
    const double theta = sonar.azimuth_center(j);
    for (double phi : phis) {
      const Ray ray{pose.t, pose.rotate(sonar_direction(theta, phi))};
      const auto hit = scene.trace(ray, sonar.r_max);
      if (!hit) continue;
      const double r = *hit;
      const int bin = sonar.range_bin(r);
      if (bin < 0) continue;
      const auto nr = scene.normal(ray.origin + r * ray.dir);
      const double cos_inc = -nr.n.dot(ray.dir);
      if (!(cos_inc > 0.0)) continue;
      const auto refl = reflection_intensity(std::acos(std::min(1.0, cos_inc)), scene.material());
      img.intensities[img.index(bin, j)] += sonar.E_e / r * refl.intensity * dphi;
    }
  });
  return img;
}

Mat3 default_camera_rotation() { return Mat3::Identity(); }

Mat3 default_sonar_rotation() {
  Mat3 R;
  // columns: sensor x -> world -X, sensor y -> world -Y, sensor z -> world +Z
  R << -1, 0, 0, 0, -1, 0, 0, 0, 1;
  return R;
}

Trajectory make_trajectory(double baseline, int n_poses, double standoff) {
  if (!(baseline > 0) || n_poses < 2 || !(standoff > 0)) {
    throw Error(ErrorCode::BadConfig, "trajectory needs baseline > 0, n_poses >= 2, standoff > 0");
  }
  Trajectory traj;
  traj.baseline = baseline;
  traj.standoff = standoff;
  traj.camera_from_rig.R = default_camera_rotation();
  traj.sonar_from_rig.R = default_sonar_rotation();
  traj.rig.reserve(static_cast<std::size_t>(n_poses));
  for (int i = 0; i < n_poses; ++i) {
    Pose p;
    p.t = Vec3(i == n_poses - 1 ? baseline : baseline * i / (n_poses - 1), 0.0, 0.0);
    traj.rig.push_back(p);
  }
  return traj;
}

std::array<Vec3, 2> padded_bounds(const AnalyticScene& scene, double padding) {
  const auto [lo, hi] = scene.bounds();
  const Vec3 center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo).maxCoeff() * (1.0 + 2.0 * padding);
  return {center - Vec3::Constant(half), center + Vec3::Constant(half)};
}

void generate_dataset(const DatasetSpec& spec, const std::filesystem::path& dir) {
  if (!spec.camera.is_valid() || !spec.sonar.is_valid() || spec.n_phi < 1) {
    throw Error(ErrorCode::BadConfig, "invalid sensor models");
  }
  if (spec.scene.empty()) throw Error(ErrorCode::BadConfig, "scene has no primitives");
  if (spec.noise.camera_std < 0 || spec.noise.sonar_std < 0) throw Error(ErrorCode::BadConfig, "negative noise");
  const Trajectory traj = make_trajectory(spec.baseline, spec.n_poses, spec.standoff);

  std::error_code ec;
  std::filesystem::create_directories(dir / "cam", ec);
  std::filesystem::create_directories(dir / "son", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  Manifest m;
  m.camera = spec.camera;
  m.sonar = spec.sonar;
  m.baseline = spec.baseline;
  m.standoff = spec.standoff;
  m.noise = spec.noise;
  m.seed = spec.seed;
  m.roi = padded_bounds(spec.scene, spec.roi_padding);
  m.scene = spec.scene;

  for (int i = 0; i < spec.n_poses; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    DatasetFrame frame{traj.camera_pose(idx), traj.sonar_pose(idx), frame_name("cam", i, "ppm"),
                       frame_name("son", i, "pfm")};

    CameraImage cam = render_camera_gt(spec.scene, spec.camera, frame.camera_pose, spec.threads);
    if (spec.noise.camera_std > 0) {
      Rng rng(spec.seed, {0xCA, idx});
      for (double& v : cam.rgb) v = std::clamp(v + spec.noise.camera_std * rng.normal(), 0.0, 1.0);
    }
    SonarImage son = render_sonar_gt(spec.scene, spec.sonar, frame.sonar_pose, spec.n_phi, spec.threads);
    if (spec.noise.sonar_std > 0) {
      Rng rng(spec.seed, {0x50, idx});
      for (double& v : son.intensities) v = std::max(0.0, v + spec.noise.sonar_std * rng.normal());
    }
    write_ppm16(cam, dir / frame.camera_image);
    write_pfm(son, dir / frame.sonar_image);
    m.frames.push_back(std::move(frame));
  }
  write_manifest(m, dir / "manifest.json");
}

}  // namespace aofuse
