#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "aofuse/field.hpp"
#include "aofuse/rng.hpp"
#include "aofuse/scene.hpp"

namespace aofuse::test {

inline Primitive sphere(const Vec3& c, double r) {
  Primitive p;
  p.shape = Shape::Sphere;
  p.pose.t = c;
  p.dims = Vec3(r, 0.0, 0.0);
  return p;
}

inline Primitive box(const Vec3& c, const Vec3& half, const Mat3& R = Mat3::Identity()) {
  Primitive p;
  p.shape = Shape::Box;
  p.pose.R = R;
  p.pose.t = c;
  p.dims = half;
  return p;
}

inline Vec3 random_vec(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

inline Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 g(rng.normal(), rng.normal(), rng.normal());
    if (g.norm() > 1e-9) return g.normalized();
  }
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("aofuse_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Field over [lo, hi] with every grid filled by a function of node position.
template <class Sdf>
FieldModel field_from(const Vec3& lo, const Vec3& hi, GridShape shape, Sdf&& sdf, double acoustic = 0.5,
                      double optical = 0.5, double q = 20.0) {
  FieldModel f(lo, hi, shape);
  for (int k = 0; k < shape.nz; ++k)
    for (int j = 0; j < shape.ny; ++j)
      for (int i = 0; i < shape.nx; ++i) {
        const auto n = shape.index(i, j, k);
        f.sdf[n] = sdf(f.node_position(i, j, k));
        f.acoustic[n] = acoustic;
        for (int c = 0; c < 3; ++c) f.optical[3 * n + c] = optical;
      }
  f.log_q = std::log(q);
  return f;
}

}  // namespace aofuse::test
