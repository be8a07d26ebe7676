// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "aofuse/field.hpp"
#include "aofuse/sensors.hpp"

namespace aofuse {

class Rng;

/// Logistic sigmoid with sharpness q: 1 / (1 + exp(-q x)).
double sigmoid(double x, double q = 1.0);

/// Opacity of the interval between two consecutive samples:
///   max((P(s) - P(s_next)) / P(s), 0),  P = sigmoid with sharpness q.
double discrete_opacity(double sdf_s, double sdf_next, double q);

struct OpacityDerivatives {
  double alpha = 0.0;
  double d_sdf = 0.0;       // d alpha / d sdf_s
  double d_sdf_next = 0.0;  // d alpha / d sdf_next
  double d_log_q = 0.0;     // d alpha / d log q
};

/// Opacity and its partials; all partials are zero where the max clamps.
OpacityDerivatives discrete_opacity_derivatives(double sdf_s, double sdf_next, double q);

/// Prefix products T_s = prod_{r < s} (1 - alpha_r), with T_0 = 1.
std::vector<double> transmittance(std::span<const double> alphas);

/// Given e_i = dL/d(T_i alpha_i) and any direct dL/d alpha_i, returns the
/// total dL/d alpha_i through both the weight and every later
/// transmittance. Uses a suffix recursion, so alpha_i = 1 is safe.
std::vector<double> composite_backward(std::span<const double> alphas, std::span<const double> T,
                                       std::span<const double> weight_adjoint,
                                       std::span<const double> alpha_adjoint = {});

/// Entry/exit distances of a ray through the field's box, clipped to t >= 0.
std::optional<std::array<double, 2>> intersect_box(const Ray& ray, const Vec3& lo, const Vec3& hi);

/// Forward state of one march (camera ray or sonar beam) kept for the
/// adjoint pass. Sample i and i+1 bound interval i; intervals carry alpha,
/// transmittance and the appearance sampled at their first point.
struct MarchState {
  std::vector<double> t;              // distance of each sample from the sensor
  std::vector<CellStencil> stencil;
  std::vector<double> sdf;
  std::vector<Vec3> grad;
  std::vector<OpacityDerivatives> opacity;  // per interval
  std::vector<double> T;                    // per interval

  std::size_t samples() const { return t.size(); }
  std::size_t intervals() const { return opacity.size(); }
  double alpha(std::size_t i) const { return opacity[i].alpha; }
  std::vector<double> alphas() const;
  double weight(std::size_t i) const { return T[i] * opacity[i].alpha; }
};

/// Stratified positions in [near, far): stratum midpoints, or jittered.
std::vector<double> stratified_positions(double near, double far, int n, Rng* jitter);

/// Samples the field at `t` along the ray and fills sdf, alpha and T.
void march(const FieldModel& field, const Ray& ray, std::vector<double> t, MarchState& state);

struct CameraTrace {
  MarchState march;
  std::vector<std::array<double, 3>> albedo;  // per interval
  std::array<double, 3> color{};
};

/// Camera pixel colour sum_i T_i alpha_i c_i over stratified samples on
/// [near, far]. Requires near < far and n_samples >= 2.
CameraTrace trace_camera(const FieldModel& field, const Ray& ray, int n_samples, double near, double far,
                         Rng* jitter = nullptr);
std::array<double, 3> render_camera_pixel(const FieldModel& field, const Ray& ray, int n_samples, double near,
                                          double far, Rng* jitter = nullptr);

/// One radial march at fixed (theta, phi) serving every range bin.
/// `bins[b]` holds sum over samples in bin b of (1/r) T alpha a, before the
/// E_e * dphi scale.
struct BeamColumn {
  double theta = 0.0;
  double phi = 0.0;
  MarchState march;
  std::vector<double> acoustic;  // per interval
  std::vector<int> bin;          // per interval, -1 outside the sonar range
  std::vector<double> bins;
};

/// Radial sample ranges for a column: n_radial stratified over [r_min, r_max].
std::vector<double> radial_positions(const SonarModel& sonar, int n_radial, Rng* jitter = nullptr);

BeamColumn render_sonar_column(const FieldModel& field, const SonarModel& sonar, const Pose& pose, double theta,
                               double phi, int n_radial, Rng* jitter = nullptr);

/// Reference per-pixel sonar render: for each stratum-midpoint elevation it
/// marches the column's radial samples through the last sample of the bin and keeps
/// the in-bin terms. Slow; exists to check render_sonar_column.
double render_sonar_pixel(const FieldModel& field, const SonarModel& sonar, const Pose& pose, int range_bin,
                          double theta, int n_phi, int n_radial);

/// Sonar bins of one azimuth beam: E_e * dphi * sum over columns.
std::vector<double> combine_columns(const SonarModel& sonar, std::span<const BeamColumn> columns);

/// Extra per-sample / per-interval adjoints from regularisers.
struct MarchExtraAdjoint {
  std::span<const double> alpha;  // dL/d alpha_i, may be empty
  std::span<const Vec3> grad;     // dL/d grad(x_s), may be empty
};

/// Adjoint of a camera trace for pixel adjoint dL/dcolor.
void camera_backward(const FieldModel& field, const CameraTrace& trace, const std::array<double, 3>& color_adjoint,
                     const MarchExtraAdjoint& extra, GradientSink& sink);

/// Adjoint of a sonar column; `bin_adjoint[b]` is dL/d bins[b] (already
/// including the E_e * dphi factor).
void sonar_backward(const FieldModel& field, const BeamColumn& column, std::span<const double> bin_adjoint,
                    const MarchExtraAdjoint& extra, GradientSink& sink);

}  // namespace aofuse
