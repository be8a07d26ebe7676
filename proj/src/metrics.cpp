// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "aofuse/analyze.hpp"
#include "aofuse/rng.hpp"

namespace aofuse {

namespace {

constexpr std::uint32_t kLeafSize = 8;

}  // namespace

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(std::int32_t id, const Vec3& q, std::size_t& best, double& best_d2) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.left < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const std::uint32_t p = order_[i];
      const double d2 = (points_[p] - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && p < best)) {
        best_d2 = d2;
        best = p;
      }
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q[n.axis] - n.split;
  const std::int32_t near = diff < 0.0 ? n.left : n.right;
  const std::int32_t far = diff < 0.0 ? n.right : n.left;
  search(near, q, best, best_d2);
  if (diff * diff <= best_d2) search(far, q, best, best_d2);
}

std::pair<std::size_t, double> KdTree::nearest(const Vec3& q) const {
  if (points_.empty()) throw Error(ErrorCode::EmptySurface, "nearest neighbour in an empty set");
  std::size_t best = points_.size();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(0, q, best, best_d2);
  return {best, std::sqrt(best_d2)};
}

std::pair<std::size_t, double> nearest_brute_force(std::span<const Vec3> points, const Vec3& q) {
  if (points.empty()) throw Error(ErrorCode::EmptySurface, "nearest neighbour in an empty set");
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d2 = (points[i] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {best, std::sqrt(best_d2)};
}

namespace {

struct Side {
  double mean = 0.0;
  double within = 0.0;  // fraction <= tau
};

Side summarize(std::span<const double> d, double tau) {
  Side s;
  std::size_t ok = 0;
  for (double x : d) {
    s.mean += x;
    if (x <= tau) ++ok;
  }
  s.mean /= static_cast<double>(d.size());
  s.within = static_cast<double>(ok) / static_cast<double>(d.size());
  return s;
}

std::vector<double> nn_distances(const KdTree& tree, std::span<const Vec3> queries) {
  std::vector<double> d(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) d[i] = tree.nearest(queries[i]).second;
  return d;
}

ReconMetrics combine(std::span<const double> recon_to_gt, std::span<const double> gt_to_recon, double tau) {
  const Side a = summarize(recon_to_gt, tau);
  const Side b = summarize(gt_to_recon, tau);
  ReconMetrics m;
  m.recon_to_gt = a.mean;
  m.gt_to_recon = b.mean;
  m.chamfer_l1 = 0.5 * (a.mean + b.mean);
  m.precision = a.within;
  m.recall = b.within;
  m.n_samples = recon_to_gt.size();
  return m;
}

}  // namespace

ReconMetrics point_metrics(std::span<const Vec3> recon, std::span<const Vec3> gt, double tau) {
  if (recon.empty() || gt.empty()) throw Error(ErrorCode::EmptySurface, "metrics need two nonempty surfaces");
  const KdTree gt_tree({gt.begin(), gt.end()});
  const KdTree recon_tree({recon.begin(), recon.end()});
  const auto a = nn_distances(gt_tree, recon);
  const auto b = nn_distances(recon_tree, gt);
  return combine(a, b, tau);
}

ReconMetrics chamfer_precision_recall(const Mesh& recon, const AnalyticScene& gt, double tau, std::size_t n_samples,
                                      std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorCode::BadConfig, "n_samples must be >= 1");
  if (gt.empty()) throw Error(ErrorCode::EmptySurface, "ground-truth scene is empty");
  Rng r1(seed, {1}), r2(seed, {2});
  const auto rs = recon.sample_surface(n_samples, r1);
  const auto gs = gt.sample_surface(n_samples, r2);
  std::vector<double> a(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) a[i] = std::abs(gt.sdf(rs[i]));
  const KdTree recon_tree(rs);
  const auto b = nn_distances(recon_tree, gs);
  return combine(a, b, tau);
}

ReconMetrics chamfer_precision_recall(const Mesh& recon, const Mesh& gt, double tau, std::size_t n_samples,
                                      std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorCode::BadConfig, "n_samples must be >= 1");
  Rng r1(seed, {1}), r2(seed, {2});
  const auto rs = recon.sample_surface(n_samples, r1);
  const auto gs = gt.sample_surface(n_samples, r2);
  return point_metrics(rs, gs, tau);
}

AxisHistograms per_axis_errors(std::span<const Vec3> recon, std::span<const Vec3> gt_closest, double bin_width,
                               int n_bins) {
  if (recon.empty()) throw Error(ErrorCode::EmptySurface, "no reconstruction samples");
  if (recon.size() != gt_closest.size()) throw Error(ErrorCode::LengthMismatch, "sample and match counts differ");
  if (!(bin_width > 0.0) || n_bins < 1) throw Error(ErrorCode::BadConfig, "bad histogram bins");
  AxisHistograms h;
  h.bin_width = bin_width;
  for (auto& c : h.counts) c.assign(static_cast<std::size_t>(n_bins), 0);
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const Vec3 d = (recon[i] - gt_closest[i]).cwiseAbs();
    for (int a = 0; a < 3; ++a) {
      const double bin = std::floor(d[a] / bin_width);
      const auto b = static_cast<std::size_t>(std::min<double>(bin, n_bins - 1));
      ++h.counts[a][b];
    }
  }
  return h;
}

AxisHistograms per_axis_errors(const Mesh& recon, const AnalyticScene& gt, std::size_t n_samples, std::uint64_t seed,
                               double bin_width, int n_bins) {
  if (gt.empty()) throw Error(ErrorCode::EmptySurface, "ground-truth scene is empty");
  Rng rng(seed, {3});
  const auto rs = recon.sample_surface(n_samples, rng);
  std::vector<Vec3> closest(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) closest[i] = gt.closest_point(rs[i]);
  return per_axis_errors(rs, closest, bin_width, n_bins);
}

void AxisHistograms::write_csv(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << "bin_lo,bin_hi,count_x,count_y,count_z\n";
  char buf[160];
  for (std::size_t b = 0; b < counts[0].size(); ++b) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%zu,%zu,%zu\n", b * bin_width, (b + 1) * bin_width, counts[0][b],
                  counts[1][b], counts[2][b]);
    out << buf;
  }
}

}  // namespace aofuse
