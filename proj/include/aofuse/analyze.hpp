// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "aofuse/field.hpp"
#include "aofuse/scene.hpp"
#include "aofuse/sensors.hpp"

namespace aofuse {

// ---------------------------------------------------------------------------
// Two-view conditioning.
//
// Convention: the second sensor frame sees P' = R P + t, with P in the first
// frame. Rows of A (r_i is the i-th row of R):
//   1  (-f, 0, x_c)                 b = 0
//   2  (0, -f, y_c)                 b = 0
//   3  (0, -1, tan th1)             b = 0
//   4  x_c' r_3 - f r_1             b = f t_x - x_c' t_z
//   5  y_c' r_3 - f r_2             b = f t_y - y_c' t_z
//   6  tan th2 r_3 - r_2            b = t_y - tan th2 t_z
//   7  t^T R                        b = (R2^2 - R1^2 - |t|^2) / 2
// Row 4 uses r_1: it is what x_c' = f (r_1 P + t_x) / (r_3 P + t_z) gives.
// Camera rows are {1, 2, 4, 5}; sonar rows {3, 6, 7}.

enum class Modality { Camera, Sonar, Multi };
const char* to_string(Modality m);

struct ConstraintSystem {
  Eigen::Matrix<double, 7, 3> A;
  Eigen::Matrix<double, 7, 1> b;
  double range1 = 0.0;  // |P| = R1, the non-linear constraint

  Eigen::MatrixXd rows_A(Modality m) const;
  Eigen::VectorXd rows_b(Modality m) const;
};

inline constexpr std::array<int, 4> kCameraRows{0, 1, 3, 4};
inline constexpr std::array<int, 3> kSonarRows{2, 5, 6};

/// Throws Degenerate when either azimuth is within 1e-9 of +-pi/2.
ConstraintSystem build_constraints(const TwoViewObservation& obs, double f, const Mat3& R, const Vec3& t);

/// Singular values, descending, by one-sided Jacobi on the columns of A.
std::vector<double> singular_values(const Eigen::MatrixXd& A);

inline constexpr double kRankTolerance = 1e-14;

/// sigma_max / sigma_min, or +infinity when sigma_min < 1e-14 sigma_max.
/// Throws ShapeMismatch for fewer than 3 rows or not exactly 3 columns.
double condition_number(const Eigen::MatrixXd& A);

/// Least-squares point from the selected rows, solved by Householder QR.
/// Throws RankDeficient.
Vec3 triangulate(const ConstraintSystem& sys, Modality which);

struct CondDistribution {
  Vec3 center = Vec3(0.0, 0.0, 1.5);  // m
  double cube = 1.0;                  // edge length, m
  double f = 0.1;                     // m
  double t_max = 0.1;                 // each translation component in [0, t_max], m
  double angle_max = deg2rad(5.0);    // yaw, pitch, roll in [-angle_max, angle_max]
  double length_unit = 1e-3;          // lengths are expressed in this unit (m) before building A
};

struct CondSample {
  Vec3 P;
  Mat3 R;
  Vec3 t;
  double f;
  double kappa_cam, kappa_son, kappa_multi;
};

/// Draw i uses the stream (seed, i).
CondSample draw_conditioning_sample(std::uint64_t seed, std::uint64_t index, const CondDistribution& dist);

struct CondSummary {
  std::vector<CondSample> samples;
  std::array<double, 3> median{};        // cam, son, multi; +inf entries sort last
  std::array<std::size_t, 3> degenerate{};
};

CondSummary monte_carlo_conditioning(std::size_t n, std::uint64_t seed, const CondDistribution& dist = {},
                                     int threads = 1);

/// bin_lo,bin_hi,count_cam,count_son,count_multi over log10-spaced bins;
/// degenerate draws are left out and values past the last bin land in it.
void write_kappa_histogram(const CondSummary& s, const std::filesystem::path& file, double log10_max = 8.0,
                           int bins_per_decade = 10);
/// modality,median,degenerate,n
void write_kappa_medians(const CondSummary& s, const std::filesystem::path& file);
/// index,kappa_cam,kappa_son,kappa_multi
void write_kappa_samples(const CondSummary& s, const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Meshes.

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  bool empty() const { return faces.empty(); }
  double area() const;
  /// Area-weighted uniform samples. Throws EmptySurface.
  std::vector<Vec3> sample_surface(std::size_t n, Rng& rng) const;
};

/// Marching cubes over node values laid out like GridShape::index, with
/// linear edge interpolation. Vertices on shared edges are shared.
Mesh marching_cubes(std::span<const double> values, const GridShape& shape, const Vec3& origin,
                    const Vec3& spacing, double iso = 0.0);
/// Throws EmptyMesh when the SDF grid has no crossing.
Mesh marching_cubes(const FieldModel& field, double iso = 0.0);

void write_ply(const Mesh& mesh, const std::filesystem::path& file);
/// ASCII PLY with float vertices and triangle faces. Throws IoError.
Mesh read_ply(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Metrics.

/// Static 3-d tree over a point set for exact nearest-neighbour queries.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points);
  /// Index and distance of the closest point. Ties go to the lower index.
  std::pair<std::size_t, double> nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

 private:
  struct Node {
    std::uint32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };
  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& q, std::size_t& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Reference all-pairs scan with the same tie rule as KdTree::nearest.
std::pair<std::size_t, double> nearest_brute_force(std::span<const Vec3> points, const Vec3& q);

struct ReconMetrics {
  double chamfer_l1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double recon_to_gt = 0.0;  // mean distance
  double gt_to_recon = 0.0;
  std::size_t n_samples = 0;
};

inline constexpr double kDefaultTau = 0.05;

/// Symmetric-mean Chamfer and precision / recall at tau between point sets.
/// Throws EmptySurface.
ReconMetrics point_metrics(std::span<const Vec3> recon, std::span<const Vec3> gt, double tau);

/// Mesh against an analytic scene; recon-to-gt distances are |sdf|.
ReconMetrics chamfer_precision_recall(const Mesh& recon, const AnalyticScene& gt, double tau, std::size_t n_samples,
                                      std::uint64_t seed);
ReconMetrics chamfer_precision_recall(const Mesh& recon, const Mesh& gt, double tau, std::size_t n_samples,
                                      std::uint64_t seed);

struct AxisHistograms {
  double bin_width = 0.005;
  std::array<std::vector<std::size_t>, 3> counts;  // X, Y, Z; last bin takes the overflow

  void write_csv(const std::filesystem::path& file) const;
};

/// Histograms of |dx|, |dy|, |dz| between each recon sample and its closest
/// ground-truth point. Throws EmptySurface.
AxisHistograms per_axis_errors(const Mesh& recon, const AnalyticScene& gt, std::size_t n_samples, std::uint64_t seed,
                               double bin_width = 0.005, int n_bins = 40);
AxisHistograms per_axis_errors(std::span<const Vec3> recon, std::span<const Vec3> gt_closest,
                               double bin_width = 0.005, int n_bins = 40);

}  // namespace aofuse
