// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "aofuse/core.hpp"

namespace aofuse {

class Rng;

/// Rigid transform. In the rendering pipeline a Pose maps sensor coordinates
/// to world coordinates: x_world = R * x_sensor + t.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static Pose identity() { return {}; }
  /// Parses a row-major 4x4 homogeneous matrix.
  static Pose from_matrix(const std::array<double, 16>& m);
  std::array<double, 16> to_matrix() const;

  Vec3 apply(const Vec3& x) const { return R * x + t; }
  Vec3 apply_inverse(const Vec3& y) const { return R.transpose() * (y - t); }
  Vec3 rotate(const Vec3& d) const { return R * d; }
  Pose compose(const Pose& inner) const { return {R * inner.R, R * inner.t + t}; }
  Pose inverse() const { return {R.transpose(), -(R.transpose() * t)}; }

  /// Orthonormality and det(R) = 1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

/// Rotation from yaw (z), pitch (y) and roll (x), applied as Rz * Ry * Rx.
Mat3 rotation_ypr(double yaw, double pitch, double roll);

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
};

/// Pinhole camera with a metric image plane at z = f.
struct CameraModel {
  double f = 0.1;              // m
  int width = 80;              // px
  int height = 60;             // px
  double pixel_pitch = 5e-4;   // m / px
  double cx = 40.0;            // principal point, px
  double cy = 30.0;

  bool is_valid() const { return f > 0 && pixel_pitch > 0 && width > 0 && height > 0; }
  /// Metric image-plane coordinates of a (continuous) pixel position.
  std::array<double, 2> pixel_to_metric(double u, double v) const {
    return {(u - cx) * pixel_pitch, (v - cy) * pixel_pitch};
  }
  std::array<double, 2> metric_to_pixel(double xc, double yc) const {
    return {xc / pixel_pitch + cx, yc / pixel_pitch + cy};
  }
};

/// Forward-looking imaging sonar. The azimuthal plane is the sensor's yz
/// plane; elevation tilts out of it toward +x.
struct SonarModel {
  double r_min = 1.2;           // m
  double r_max = 2.4;           // m
  int n_range_bins = 64;
  double azimuth_fov = deg2rad(28.8);
  int n_azimuth_bins = 48;
  double phi_min = deg2rad(-6.0);
  double phi_max = deg2rad(6.0);
  double E_e = 1.0;

  bool is_valid() const {
    return r_min > 0 && r_min < r_max && phi_min <= phi_max && n_range_bins >= 1 && n_azimuth_bins >= 1 &&
           azimuth_fov > 0 && E_e > 0;
  }
  double range_bin_width() const { return (r_max - r_min) / n_range_bins; }
  /// Range bin holding r, or -1 outside [r_min, r_max).
  int range_bin(double r) const;
  double range_bin_lo(int bin) const { return r_min + bin * range_bin_width(); }
  double range_bin_hi(int bin) const { return r_min + (bin + 1) * range_bin_width(); }
  double azimuth_center(int bin) const { return -0.5 * azimuth_fov + (bin + 0.5) * azimuth_fov / n_azimuth_bins; }
  double elevation_aperture() const { return phi_max - phi_min; }
};

struct SphericalCoords {
  double r;
  double theta;  // azimuth, atan2(y, z)
  double phi;    // elevation, asin(x / r)
};

/// Image-plane projection x_c = f X / Z, y_c = f Y / Z. Throws BehindCamera.
std::array<double, 2> camera_project(const CameraModel& cam, const Vec3& p_sensor);

/// World-frame ray through pixel (u, v). Throws OutOfBounds.
Ray camera_ray(const CameraModel& cam, const Pose& pose, double u, double v);

/// Throws Degenerate for points at the sensor origin.
SphericalCoords sonar_project(const Vec3& p_sensor);
Vec3 sonar_to_cartesian(double r, double theta, double phi);
/// Unit direction of the beam at (theta, phi) in the sonar frame.
inline Vec3 sonar_direction(double theta, double phi) { return sonar_to_cartesian(1.0, theta, phi); }

/// Stratified elevations over [phi_min, phi_max]: stratum midpoints, or
/// jittered within each stratum when `jitter` is given.
std::vector<double> stratified_elevations(double phi_min, double phi_max, int n, Rng* jitter = nullptr);

/// World points of the elevation arc at (r, theta). Throws RangeOutOfBounds.
std::vector<Vec3> arc_points(const SonarModel& sonar, const Pose& pose, double r, double theta, int n,
                             Rng* jitter = nullptr);

/// The eight measurements of one point seen from two sensor positions,
/// where the second frame sees P' = R P + t.
struct TwoViewObservation {
  double xc1, yc1, range1, theta1;
  double xc2, yc2, range2, theta2;
};

/// Throws BehindCamera or Degenerate.
TwoViewObservation observe_two_view(double f, const Mat3& R, const Vec3& t, const Vec3& P);

}  // namespace aofuse
