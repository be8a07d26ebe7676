// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aofuse/rng.hpp"

namespace aofuse {

const char* to_string(Shape s) {
  switch (s) {
    case Shape::Sphere: return "sphere";
    case Shape::Box: return "box";
    case Shape::Torus: return "torus";
    case Shape::Capsule: return "capsule";
  }
  return "unknown";
}

std::optional<Shape> parse_shape(const std::string& name) {
  if (name == "sphere") return Shape::Sphere;
  if (name == "box") return Shape::Box;
  if (name == "torus") return Shape::Torus;
  if (name == "capsule") return Shape::Capsule;
  return std::nullopt;
}

namespace {

Vec3 unit_vector(Rng& rng) {
  for (;;) {
    const Vec3 g(rng.normal(), rng.normal(), rng.normal());
    const double n = g.norm();
    if (n > 1e-12) return g / n;
  }
}

Vec3 local_half_extent(const Primitive& p) {
  const Vec3& d = p.dims;
  switch (p.shape) {
    case Shape::Sphere: return Vec3::Constant(d[0]);
    case Shape::Box: return d;
    case Shape::Torus: return {d[0] + d[1], d[0] + d[1], d[1]};
    case Shape::Capsule: return {d[0], d[0], d[1] + d[0]};
  }
  return Vec3::Zero();
}

}  // namespace

double Primitive::sdf(const Vec3& x_world) const {
  const Vec3 p = pose.apply_inverse(x_world);
  switch (shape) {
    case Shape::Sphere:
      return p.norm() - dims[0];
    case Shape::Box: {
      const Vec3 q = p.cwiseAbs() - dims;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    case Shape::Torus: {
      const double ring = std::hypot(p.x(), p.y()) - dims[0];
      return std::hypot(ring, p.z()) - dims[1];
    }
    case Shape::Capsule: {
      const double z = std::clamp(p.z(), -dims[1], dims[1]);
      return (p - Vec3(0.0, 0.0, z)).norm() - dims[0];
    }
  }
  return std::numeric_limits<double>::infinity();
}

double Primitive::area() const {
  const Vec3& d = dims;
  switch (shape) {
    case Shape::Sphere: return 4.0 * kPi * d[0] * d[0];
    case Shape::Box: return 8.0 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[0]);
    case Shape::Torus: return 4.0 * kPi * kPi * d[0] * d[1];
    case Shape::Capsule: return 4.0 * kPi * d[0] * d[0] + 4.0 * kPi * d[0] * d[1];
  }
  return 0.0;
}

Vec3 Primitive::sample_surface(Rng& rng) const {
  const Vec3& d = dims;
  Vec3 local;
  switch (shape) {
    case Shape::Sphere:
      local = d[0] * unit_vector(rng);
      break;
    case Shape::Box: {
      const double ax = d[1] * d[2], ay = d[2] * d[0], az = d[0] * d[1];
      const double pick = rng.uniform() * (ax + ay + az);
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
      if (pick < ax) {
        local = {sign * d[0], a * d[1], b * d[2]};
      } else if (pick < ax + ay) {
        local = {a * d[0], sign * d[1], b * d[2]};
      } else {
        local = {a * d[0], b * d[1], sign * d[2]};
      }
      break;
    }
    case Shape::Torus: {
      const double u = rng.uniform(0.0, 2.0 * kPi);
      double v = 0.0;
      // area element is proportional to (R + r cos v)
      do {
        v = rng.uniform(0.0, 2.0 * kPi);
      } while (rng.uniform() * (d[0] + d[1]) > d[0] + d[1] * std::cos(v));
      const double ring = d[0] + d[1] * std::cos(v);
      local = {ring * std::cos(u), ring * std::sin(u), d[1] * std::sin(v)};
      break;
    }
    case Shape::Capsule: {
      const double cyl = 4.0 * kPi * d[0] * d[1];
      const double caps = 4.0 * kPi * d[0] * d[0];
      if (rng.uniform() * (cyl + caps) < cyl) {
        const double a = rng.uniform(0.0, 2.0 * kPi);
        local = {d[0] * std::cos(a), d[0] * std::sin(a), rng.uniform(-d[1], d[1])};
      } else {
        const Vec3 s = d[0] * unit_vector(rng);
        local = s + Vec3(0.0, 0.0, s.z() >= 0.0 ? d[1] : -d[1]);
      }
      break;
    }
  }
  return pose.apply(local);
}

std::array<Vec3, 2> Primitive::bounds() const {
  const Vec3 h = local_half_extent(*this);
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner((c & 1) ? h.x() : -h.x(), (c & 2) ? h.y() : -h.y(), (c & 4) ? h.z() : -h.z());
    const Vec3 w = pose.apply(corner);
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
  return {lo, hi};
}

bool Primitive::is_valid() const {
  if (!pose.is_valid(1e-6) || !dims.allFinite()) return false;
  switch (shape) {
    case Shape::Sphere: return dims[0] > 0;
    case Shape::Box: return (dims.array() > 0).all();
    case Shape::Torus: return dims[0] > 0 && dims[1] > 0 && dims[1] < dims[0];
    case Shape::Capsule: return dims[0] > 0 && dims[1] >= 0;
  }
  return false;
}

bool Material::is_valid() const {
  if (!(C_dl >= 0) || !(C_sl >= 0) || !(sigma_alpha > 0)) return false;
  return std::all_of(optical_albedo.begin(), optical_albedo.end(), [](double c) { return c >= 0 && c <= 1; });
}

AnalyticScene::AnalyticScene(std::vector<Primitive> primitives, Material material)
    : primitives_(std::move(primitives)), material_(material) {}

double AnalyticScene::sdf(const Vec3& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : primitives_) d = std::min(d, p.sdf(x));
  return d;
}

NormalResult AnalyticScene::normal(const Vec3& x) const {
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = kNormalStep;
    g[a] = (sdf(x + e) - sdf(x - e)) / (2.0 * kNormalStep);
  }
  const double n = g.norm();
  if (!(n >= 1e-12)) return {Vec3::UnitZ(), true};
  return {g / n, false};
}

std::optional<double> AnalyticScene::trace(const Ray& ray, double t_max, double t_min) const {
  double t = t_min;
  for (int step = 0; step < kTraceMaxSteps && t <= t_max; ++step) {
    const double d = sdf(ray.origin + t * ray.dir);
    if (std::abs(d) < kTraceEpsilon) return t;
    t += d;
    if (t < t_min) return std::nullopt;  // started inside a solid
  }
  return std::nullopt;
}

Vec3 AnalyticScene::closest_point(const Vec3& x) const { return x - sdf(x) * normal(x).n; }

std::array<Vec3, 2> AnalyticScene::bounds() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : primitives_) {
    const auto [a, b] = p.bounds();
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(b);
  }
  return {lo, hi};
}

std::vector<Vec3> AnalyticScene::sample_surface(std::size_t n, Rng& rng) const {
  if (primitives_.empty()) throw Error(ErrorCode::EmptySurface, "scene has no primitives");
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& p : primitives_) cumulative.push_back(total += p.area());
  std::vector<Vec3> out;
  out.reserve(n);
  const std::size_t max_attempts = 1000 * n + 1000;
  for (std::size_t attempt = 0; out.size() < n && attempt < max_attempts; ++attempt) {
    const double pick = rng.uniform() * total;
    const auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) -
                                              cumulative.begin());
    const Vec3 s = primitives_[std::min(idx, primitives_.size() - 1)].sample_surface(rng);
    if (sdf(s) > -1e-9) out.push_back(s);
  }
  if (out.size() < n) throw Error(ErrorCode::EmptySurface, "union surface too small to sample");
  return out;
}

}  // namespace aofuse
