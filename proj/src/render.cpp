// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aofuse/rng.hpp"

namespace aofuse {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double log_sigmoid(double x) { return -softplus(-x); }

}  // namespace

double sigmoid(double x, double q) {
  const double z = q * x;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double discrete_opacity(double sdf_s, double sdf_next, double q) {
  return discrete_opacity_derivatives(sdf_s, sdf_next, q).alpha;
}

OpacityDerivatives discrete_opacity_derivatives(double sdf_s, double sdf_next, double q) {
  OpacityDerivatives out;
  // ratio P(b) / P(a) = exp(d); exp(d) >= 1 means no opacity.
  const double d = log_sigmoid(q * sdf_next) - log_sigmoid(q * sdf_s);
  if (!(d < 0.0)) return out;
  out.alpha = -std::expm1(d);
  const double keep = 1.0 - out.alpha;
  const double sa = sigmoid(-sdf_s, q);
  const double sb = sigmoid(-sdf_next, q);
  out.d_sdf = keep * q * sa;
  out.d_sdf_next = -keep * q * sb;
  out.d_log_q = -keep * q * (sdf_next * sb - sdf_s * sa);
  return out;
}

std::vector<double> transmittance(std::span<const double> alphas) {
  std::vector<double> T(alphas.size());
  double acc = 1.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    T[i] = acc;
    acc *= 1.0 - alphas[i];
  }
  return T;
}

std::vector<double> composite_backward(std::span<const double> alphas, std::span<const double> T,
                                       std::span<const double> weight_adjoint,
                                       std::span<const double> alpha_adjoint) {
  const std::size_t m = alphas.size();
  std::vector<double> out(m, 0.0);
  double suffix = 0.0;  // sum_{i>j} e_i alpha_i prod_{j<k<i} (1 - alpha_k)
  for (std::size_t jj = m; jj-- > 0;) {
    out[jj] = T[jj] * (weight_adjoint[jj] - suffix);
    if (!alpha_adjoint.empty()) out[jj] += alpha_adjoint[jj];
    suffix = weight_adjoint[jj] * alphas[jj] + (1.0 - alphas[jj]) * suffix;
  }
  return out;
}

std::optional<std::array<double, 2>> intersect_box(const Ray& ray, const Vec3& lo, const Vec3& hi) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.dir[a];
    if (d == 0.0) {
      if (o < lo[a] || o > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - o) / d;
    double tb = (hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return std::nullopt;
  return std::array<double, 2>{t0, t1};
}

std::vector<double> MarchState::alphas() const {
  std::vector<double> a(opacity.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = opacity[i].alpha;
  return a;
}

std::vector<double> stratified_positions(double near, double far, int n, Rng* jitter) {
  std::vector<double> t(static_cast<std::size_t>(std::max(n, 0)));
  const double step = (far - near) / n;
  for (int i = 0; i < n; ++i) t[i] = near + (i + (jitter ? jitter->uniform() : 0.5)) * step;
  return t;
}

void march(const FieldModel& field, const Ray& ray, std::vector<double> t, MarchState& state) {
  const std::size_t n = t.size();
  state.t = std::move(t);
  state.stencil.resize(n);
  state.sdf.resize(n);
  state.grad.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    state.stencil[s] = locate(field, ray.origin + state.t[s] * ray.dir);
    state.sdf[s] = sample_sdf(field, state.stencil[s], &state.grad[s]);
  }
  const std::size_t m = n > 0 ? n - 1 : 0;
  const double q = field.q();
  state.opacity.resize(m);
  state.T.resize(m);
  double acc = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    state.opacity[i] = discrete_opacity_derivatives(state.sdf[i], state.sdf[i + 1], q);
    state.T[i] = acc;
    acc *= 1.0 - state.opacity[i].alpha;
  }
}

CameraTrace trace_camera(const FieldModel& field, const Ray& ray, int n_samples, double near, double far,
                         Rng* jitter) {
  if (n_samples < 2 || !(near < far)) throw Error(ErrorCode::BadConfig, "camera march needs n >= 2 and near < far");
  CameraTrace tr;
  march(field, ray, stratified_positions(near, far, n_samples, jitter), tr.march);
  const std::size_t m = tr.march.intervals();
  tr.albedo.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& st = tr.march.stencil[i];
    std::array<double, 3> c{};
    for (int k = 0; k < 8; ++k) {
      for (int ch = 0; ch < 3; ++ch) c[ch] += st.w[k] * field.optical[3 * st.node[k] + ch];
    }
    tr.albedo[i] = c;
    const double w = tr.march.weight(i);
    for (int ch = 0; ch < 3; ++ch) tr.color[ch] += w * c[ch];
  }
  return tr;
}

std::array<double, 3> render_camera_pixel(const FieldModel& field, const Ray& ray, int n_samples, double near,
                                          double far, Rng* jitter) {
  return trace_camera(field, ray, n_samples, near, far, jitter).color;
}

std::vector<double> radial_positions(const SonarModel& sonar, int n_radial, Rng* jitter) {
  return stratified_positions(sonar.r_min, sonar.r_max, n_radial, jitter);
}

BeamColumn render_sonar_column(const FieldModel& field, const SonarModel& sonar, const Pose& pose, double theta,
                               double phi, int n_radial, Rng* jitter) {
  if (n_radial < 2) throw Error(ErrorCode::BadConfig, "sonar march needs n_radial >= 2");
  BeamColumn col;
  col.theta = theta;
  col.phi = phi;
  const Ray ray{pose.t, pose.rotate(sonar_direction(theta, phi))};
  march(field, ray, radial_positions(sonar, n_radial, jitter), col.march);
  const std::size_t m = col.march.intervals();
  col.acoustic.resize(m);
  col.bin.resize(m);
  col.bins.assign(static_cast<std::size_t>(sonar.n_range_bins), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& st = col.march.stencil[i];
    double a = 0.0;
    for (int k = 0; k < 8; ++k) a += st.w[k] * field.acoustic[st.node[k]];
    col.acoustic[i] = a;
    const double r = col.march.t[i];
    col.bin[i] = sonar.range_bin(r);
    if (col.bin[i] >= 0) col.bins[col.bin[i]] += col.march.weight(i) * a / r;
  }
  return col;
}

double render_sonar_pixel(const FieldModel& field, const SonarModel& sonar, const Pose& pose, int range_bin,
                          double theta, int n_phi, int n_radial) {
  if (range_bin < 0 || range_bin >= sonar.n_range_bins) throw Error(ErrorCode::RangeOutOfBounds, "bad range bin");
  if (n_phi < 1 || n_radial < 2) throw Error(ErrorCode::BadConfig, "sonar pixel needs n_phi >= 1, n_radial >= 2");
  const double dphi = sonar.elevation_aperture() / n_phi;
  const double q = field.q();
  const auto radii = radial_positions(sonar, n_radial);
  double total = 0.0;
  for (double phi : stratified_elevations(sonar.phi_min, sonar.phi_max, n_phi)) {
    const Vec3 dir = pose.rotate(sonar_direction(theta, phi));
    double T = 1.0;
    double sum = 0.0;
    double s_cur = grid_sample(field, pose.t + radii[0] * dir).sdf;
    for (std::size_t s = 0; s + 1 < radii.size() && sonar.range_bin(radii[s]) <= range_bin; ++s) {
      const FieldSample next = grid_sample(field, pose.t + radii[s + 1] * dir);
      const double alpha = discrete_opacity(s_cur, next.sdf, q);
      if (sonar.range_bin(radii[s]) == range_bin) {
        const double a = grid_sample(field, pose.t + radii[s] * dir).acoustic;
        sum += T * alpha * a / radii[s];
      }
      T *= 1.0 - alpha;
      s_cur = next.sdf;
    }
    total += sum;
  }
  return sonar.E_e * dphi * total;
}

std::vector<double> combine_columns(const SonarModel& sonar, std::span<const BeamColumn> columns) {
  std::vector<double> out(static_cast<std::size_t>(sonar.n_range_bins), 0.0);
  if (columns.empty()) return out;
  const double scale = sonar.E_e * sonar.elevation_aperture() / static_cast<double>(columns.size());
  for (const auto& c : columns) {
    for (std::size_t b = 0; b < out.size(); ++b) out[b] += c.bins[b];
  }
  for (double& v : out) v *= scale;
  return out;
}

namespace {

// Shared tail of both adjoints: weight adjoints e_i and appearance adjoints
// are known per interval; push them through opacity to the grid.
template <class AppearanceFn>
void march_backward(const FieldModel& field, const MarchState& ms, std::span<const double> weight_adjoint,
                    const MarchExtraAdjoint& extra, AppearanceFn&& appearance, GradientSink& sink) {
  const std::size_t n = ms.samples();
  const std::size_t m = ms.intervals();
  const auto alphas = ms.alphas();
  const auto d_alpha = composite_backward(alphas, ms.T, weight_adjoint, extra.alpha);
  std::vector<double> d_sdf(n, 0.0);
  double d_log_q = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (d_alpha[i] == 0.0) continue;
    d_sdf[i] += d_alpha[i] * ms.opacity[i].d_sdf;
    d_sdf[i + 1] += d_alpha[i] * ms.opacity[i].d_sdf_next;
    d_log_q += d_alpha[i] * ms.opacity[i].d_log_q;
  }
  sink.add_log_q(d_log_q);
  for (std::size_t s = 0; s < n; ++s) {
    SampleAdjoint up;
    up.sdf = d_sdf[s];
    if (!extra.grad.empty()) up.grad = extra.grad[s];
    if (s < m) appearance(s, up);
    grid_backprop(field, ms.stencil[s], up, sink);
  }
}

}  // namespace

void camera_backward(const FieldModel& field, const CameraTrace& trace, const std::array<double, 3>& g,
                     const MarchExtraAdjoint& extra, GradientSink& sink) {
  const std::size_t m = trace.march.intervals();
  std::vector<double> e(m);
  for (std::size_t i = 0; i < m; ++i) {
    e[i] = g[0] * trace.albedo[i][0] + g[1] * trace.albedo[i][1] + g[2] * trace.albedo[i][2];
  }
  march_backward(field, trace.march, e, extra,
                 [&](std::size_t i, SampleAdjoint& up) {
                   const double w = trace.march.weight(i);
                   for (int ch = 0; ch < 3; ++ch) up.optical[ch] = g[ch] * w;
                 },
                 sink);
}

void sonar_backward(const FieldModel& field, const BeamColumn& column, std::span<const double> bin_adjoint,
                    const MarchExtraAdjoint& extra, GradientSink& sink) {
  const std::size_t m = column.march.intervals();
  std::vector<double> e(m, 0.0);
  std::vector<double> g(m, 0.0);  // dL/d(w_i a_i / r_i) is g_i
  for (std::size_t i = 0; i < m; ++i) {
    if (column.bin[i] < 0) continue;
    g[i] = bin_adjoint[column.bin[i]] / column.march.t[i];
    e[i] = g[i] * column.acoustic[i];
  }
  march_backward(field, column.march, e, extra,
                 [&](std::size_t i, SampleAdjoint& up) { up.acoustic = g[i] * column.march.weight(i); }, sink);
}

}  // namespace aofuse
