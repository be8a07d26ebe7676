// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "aofuse/analyze.hpp"
#include "aofuse/parallel.hpp"
#include "aofuse/rng.hpp"

namespace aofuse {

const char* to_string(Modality m) {
  switch (m) {
    case Modality::Camera: return "camera";
    case Modality::Sonar: return "sonar";
    case Modality::Multi: return "multi";
  }
  return "?";
}

namespace {

std::span<const int> row_set(Modality m) {
  static constexpr std::array<int, 7> all{0, 1, 2, 3, 4, 5, 6};
  switch (m) {
    case Modality::Camera: return kCameraRows;
    case Modality::Sonar: return kSonarRows;
    case Modality::Multi: break;
  }
  return all;
}

double checked_tan(double theta) {
  if (std::abs(std::abs(theta) - 0.5 * kPi) < 1e-9) throw Error(ErrorCode::Degenerate, "azimuth at +-pi/2");
  return std::tan(theta);
}

}  // namespace

Eigen::MatrixXd ConstraintSystem::rows_A(Modality m) const {
  const auto rows = row_set(m);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = A.row(rows[i]);
  return out;
}

Eigen::VectorXd ConstraintSystem::rows_b(Modality m) const {
  const auto rows = row_set(m);
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = b[rows[i]];
  return out;
}

ConstraintSystem build_constraints(const TwoViewObservation& o, double f, const Mat3& R, const Vec3& t) {
  const double tan1 = checked_tan(o.theta1);
  const double tan2 = checked_tan(o.theta2);
  const Eigen::RowVector3d r1 = R.row(0), r2 = R.row(1), r3 = R.row(2);
  ConstraintSystem s;
  s.A.row(0) << -f, 0.0, o.xc1;
  s.A.row(1) << 0.0, -f, o.yc1;
  s.A.row(2) << 0.0, -1.0, tan1;
  s.A.row(3) = o.xc2 * r3 - f * r1;
  s.A.row(4) = o.yc2 * r3 - f * r2;
  s.A.row(5) = tan2 * r3 - r2;
  s.A.row(6) = t.transpose() * R;
  s.b << 0.0, 0.0, 0.0, f * t.x() - o.xc2 * t.z(), f * t.y() - o.yc2 * t.z(), t.y() - tan2 * t.z(),
      0.5 * (o.range2 * o.range2 - o.range1 * o.range1 - t.squaredNorm());
  s.range1 = o.range1;
  return s;
}

std::vector<double> singular_values(const Eigen::MatrixXd& A) {
  Eigen::MatrixXd U = A;
  const Eigen::Index n = U.cols();
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = U.col(p).squaredNorm();
        const double beta = U.col(q).squaredNorm();
        const double gamma = U.col(p).dot(U.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double tt = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + tt * tt);
        const double s = c * tt;
        const Eigen::VectorXd up = U.col(p);
        U.col(p) = c * up - s * U.col(q);
        U.col(q) = s * up + c * U.col(q);
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) sv[static_cast<std::size_t>(i)] = U.col(i).norm();
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

double condition_number(const Eigen::MatrixXd& A) {
  if (A.cols() != 3 || A.rows() < 3) throw Error(ErrorCode::ShapeMismatch, "condition number needs an m x 3, m >= 3");
  const auto sv = singular_values(A);
  if (!(sv.front() > 0.0) || sv.back() < kRankTolerance * sv.front()) return std::numeric_limits<double>::infinity();
  return sv.front() / sv.back();
}

Vec3 triangulate(const ConstraintSystem& sys, Modality which) {
  const Eigen::MatrixXd A = sys.rows_A(which);
  if (!std::isfinite(condition_number(A))) throw Error(ErrorCode::RankDeficient, "constraint rows are rank deficient");
  return A.householderQr().solve(sys.rows_b(which));
}

CondSample draw_conditioning_sample(std::uint64_t seed, std::uint64_t index, const CondDistribution& d) {
  Rng rng(seed, {index});
  CondSample s;
  for (int a = 0; a < 3; ++a) s.P[a] = d.center[a] + d.cube * (rng.uniform() - 0.5);
  for (int a = 0; a < 3; ++a) s.t[a] = rng.uniform(0.0, d.t_max);
  const double yaw = rng.uniform(-d.angle_max, d.angle_max);
  const double pitch = rng.uniform(-d.angle_max, d.angle_max);
  const double roll = rng.uniform(-d.angle_max, d.angle_max);
  s.R = rotation_ypr(yaw, pitch, roll);
  s.f = d.f;

  const double k = 1.0 / d.length_unit;
  const Vec3 P = k * s.P;
  const Vec3 t = k * s.t;
  const double f = k * s.f;
  const auto obs = observe_two_view(f, s.R, t, P);
  const auto sys = build_constraints(obs, f, s.R, t);
  s.kappa_cam = condition_number(sys.rows_A(Modality::Camera));
  s.kappa_son = condition_number(sys.rows_A(Modality::Sonar));
  s.kappa_multi = condition_number(sys.rows_A(Modality::Multi));
  return s;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

std::array<double, 3> kappas(const CondSample& s) { return {s.kappa_cam, s.kappa_son, s.kappa_multi}; }

}  // namespace

CondSummary monte_carlo_conditioning(std::size_t n, std::uint64_t seed, const CondDistribution& dist, int threads) {
  CondSummary out;
  out.samples.resize(n);
  parallel_for(n, threads, [&](std::size_t i) { out.samples[i] = draw_conditioning_sample(seed, i, dist); });
  for (int m = 0; m < 3; ++m) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = kappas(out.samples[i])[m];
      if (!std::isfinite(v[i])) ++out.degenerate[m];
    }
    out.median[m] = median_of(std::move(v));
  }
  return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  return out;
}

}  // namespace

void write_kappa_histogram(const CondSummary& s, const std::filesystem::path& file, double log10_max,
                           int bins_per_decade) {
  const int n_bins = std::max(1, static_cast<int>(std::lround(log10_max * bins_per_decade)));
  std::vector<std::array<std::size_t, 3>> counts(static_cast<std::size_t>(n_bins), {0, 0, 0});
  for (const auto& smp : s.samples) {
    const auto k = kappas(smp);
    for (int m = 0; m < 3; ++m) {
      if (!std::isfinite(k[m])) continue;
      const int b = std::clamp(static_cast<int>(std::floor(std::log10(k[m]) * bins_per_decade)), 0, n_bins - 1);
      ++counts[static_cast<std::size_t>(b)][m];
    }
  }
  auto out = open_out(file);
  out << "bin_lo,bin_hi,count_cam,count_son,count_multi\n";
  char buf[160];
  for (int b = 0; b < n_bins; ++b) {
    const auto& c = counts[static_cast<std::size_t>(b)];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%zu,%zu,%zu\n", std::pow(10.0, double(b) / bins_per_decade),
                  std::pow(10.0, double(b + 1) / bins_per_decade), c[0], c[1], c[2]);
    out << buf;
  }
}

void write_kappa_medians(const CondSummary& s, const std::filesystem::path& file) {
  auto out = open_out(file);
  out << "modality,median,degenerate,n\n";
  const char* names[3] = {"camera", "sonar", "multi"};
  char buf[160];
  for (int m = 0; m < 3; ++m) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%zu,%zu\n", names[m], s.median[m], s.degenerate[m], s.samples.size());
    out << buf;
  }
}

void write_kappa_samples(const CondSummary& s, const std::filesystem::path& file) {
  auto out = open_out(file);
  out << "index,kappa_cam,kappa_son,kappa_multi\n";
  char buf[160];
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    const auto& c = s.samples[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", i, c.kappa_cam, c.kappa_son, c.kappa_multi);
    out << buf;
  }
}

}  // namespace aofuse
