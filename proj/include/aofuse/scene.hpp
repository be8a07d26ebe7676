// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "aofuse/core.hpp"
#include "aofuse/sensors.hpp"

namespace aofuse {

class Rng;

enum class Shape { Sphere, Box, Torus, Capsule };

const char* to_string(Shape s);
std::optional<Shape> parse_shape(const std::string& name);

/// One analytic solid. `pose` maps primitive-local coordinates to world.
///
/// dims, in metres:
///   sphere  (radius, -, -)
///   box     (half extents x, y, z)
///   torus   (major radius, minor radius, -), ring in the local xy plane
///   capsule (radius, half segment length along local z, -)
struct Primitive {
  Shape shape = Shape::Sphere;
  Pose pose;
  Vec3 dims = Vec3(1.0, 0.0, 0.0);

  double sdf(const Vec3& x_world) const;
  double area() const;
  /// Area-uniform sample on the primitive's own surface.
  Vec3 sample_surface(Rng& rng) const;
  /// Conservative world-frame bounds.
  std::array<Vec3, 2> bounds() const;
  bool is_valid() const;
};

/// Acoustic reflection parameters plus the optical albedo.
struct Material {
  double C_dl = 1.0;
  double C_sl = 0.0;
  double sigma_alpha = 0.5;  // rad
  std::array<double, 3> optical_albedo{0.8, 0.8, 0.8};

  bool is_valid() const;
};

struct NormalResult {
  Vec3 n;
  bool degenerate = false;
};

/// Union of primitives sharing one material. Immutable once built, so it is
/// safe to query from any number of threads.
class AnalyticScene {
 public:
  AnalyticScene() = default;
  AnalyticScene(std::vector<Primitive> primitives, Material material);

  const std::vector<Primitive>& primitives() const { return primitives_; }
  const Material& material() const { return material_; }
  bool empty() const { return primitives_.empty(); }

  /// Minimum over member SDFs; +infinity for an empty scene.
  double sdf(const Vec3& x) const;
  /// Central-difference gradient (h = 1e-5 m), normalized.
  NormalResult normal(const Vec3& x) const;
  /// First surface hit along the ray in (t_min, t_max], by sphere tracing
  /// (|sdf| < 1e-6, at most 256 steps).
  std::optional<double> trace(const Ray& ray, double t_max, double t_min = 0.0) const;
  /// Closest surface point, x - sdf(x) * normal(x).
  Vec3 closest_point(const Vec3& x) const;
  std::array<Vec3, 2> bounds() const;
  /// n area-uniform samples on the union's boundary. Points on one member
  /// that lie inside another member are rejected.
  std::vector<Vec3> sample_surface(std::size_t n, Rng& rng) const;

 private:
  std::vector<Primitive> primitives_;
  Material material_;
};

inline constexpr double kNormalStep = 1e-5;
inline constexpr double kTraceEpsilon = 1e-6;
inline constexpr int kTraceMaxSteps = 256;

}  // namespace aofuse
