// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/sensors.hpp"

#include <algorithm>
#include <cmath>

#include "aofuse/rng.hpp"

namespace aofuse {

Pose Pose::from_matrix(const std::array<double, 16>& m) {
  Pose p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.R(r, c) = m[4 * r + c];
    p.t[r] = m[4 * r + 3];
  }
  return p;
}

std::array<double, 16> Pose::to_matrix() const {
  std::array<double, 16> m{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[4 * r + c] = R(r, c);
    m[4 * r + 3] = t[r];
  }
  m[15] = 1.0;
  return m;
}

bool Pose::is_valid(double tol) const {
  if (!R.allFinite() || !t.allFinite()) return false;
  return (R.transpose() * R - Mat3::Identity()).norm() < tol && std::abs(R.determinant() - 1.0) < tol;
}

Mat3 rotation_ypr(double yaw, double pitch, double roll) {
  const double cz = std::cos(yaw), sz = std::sin(yaw);
  const double cy = std::cos(pitch), sy = std::sin(pitch);
  const double cx = std::cos(roll), sx = std::sin(roll);
  Mat3 Rz, Ry, Rx;
  Rz << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
  Ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  Rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
  return Rz * Ry * Rx;
}

int SonarModel::range_bin(double r) const {
  if (!(r >= r_min) || !(r < r_max)) return -1;
  const int bin = static_cast<int>((r - r_min) / range_bin_width());
  return std::min(bin, n_range_bins - 1);
}

std::array<double, 2> camera_project(const CameraModel& cam, const Vec3& p) {
  if (!(p.z() > 1e-9)) throw Error(ErrorCode::BehindCamera, "point depth must be positive");
  return {cam.f * p.x() / p.z(), cam.f * p.y() / p.z()};
}

Ray camera_ray(const CameraModel& cam, const Pose& pose, double u, double v) {
  if (!(u >= 0.0 && u <= cam.width && v >= 0.0 && v <= cam.height)) {
    throw Error(ErrorCode::OutOfBounds, "pixel outside the sensor");
  }
  const auto [xc, yc] = cam.pixel_to_metric(u, v);
  const Vec3 d = Vec3(xc, yc, cam.f).normalized();
  return {pose.t, pose.rotate(d)};
}

SphericalCoords sonar_project(const Vec3& p) {
  const double r = p.norm();
  if (!(r > 1e-9)) throw Error(ErrorCode::Degenerate, "point at the sonar origin");
  return {r, std::atan2(p.y(), p.z()), std::asin(std::clamp(p.x() / r, -1.0, 1.0))};
}

Vec3 sonar_to_cartesian(double r, double theta, double phi) {
  const double c = std::cos(phi);
  return {r * std::sin(phi), r * c * std::sin(theta), r * c * std::cos(theta)};
}

std::vector<double> stratified_elevations(double phi_min, double phi_max, int n, Rng* jitter) {
  std::vector<double> out(static_cast<std::size_t>(n));
  const double step = (phi_max - phi_min) / n;
  for (int k = 0; k < n; ++k) {
    const double u = jitter ? jitter->uniform() : 0.5;
    out[static_cast<std::size_t>(k)] = phi_min + (k + u) * step;
  }
  return out;
}

std::vector<Vec3> arc_points(const SonarModel& sonar, const Pose& pose, double r, double theta, int n,
                             Rng* jitter) {
  if (!(r >= sonar.r_min && r <= sonar.r_max)) throw Error(ErrorCode::RangeOutOfBounds, "arc range outside sonar");
  if (n < 1) throw Error(ErrorCode::BadConfig, "arc needs at least one point");
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (double phi : stratified_elevations(sonar.phi_min, sonar.phi_max, n, jitter)) {
    pts.push_back(pose.apply(sonar_to_cartesian(r, theta, phi)));
  }
  return pts;
}

TwoViewObservation observe_two_view(double f, const Mat3& R, const Vec3& t, const Vec3& P) {
  const Vec3 P2 = R * P + t;
  if (!(P.z() > 1e-9) || !(P2.z() > 1e-9)) throw Error(ErrorCode::BehindCamera, "point behind a view");
  if (!(P.norm() > 1e-9) || !(P2.norm() > 1e-9)) throw Error(ErrorCode::Degenerate, "point at a sensor origin");
  TwoViewObservation o{};
  o.xc1 = f * P.x() / P.z();
  o.yc1 = f * P.y() / P.z();
  o.range1 = P.norm();
  o.theta1 = std::atan2(P.y(), P.z());
  o.xc2 = f * P2.x() / P2.z();
  o.yc2 = f * P2.y() / P2.z();
  o.range2 = std::sqrt(o.range1 * o.range1 + t.squaredNorm() + 2.0 * t.dot(R * P));
  o.theta2 = std::atan2(P2.y(), P2.z());
  return o;
}

}  // namespace aofuse
