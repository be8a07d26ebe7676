// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aofuse/analyze.hpp"
#include "aofuse/rng.hpp"

namespace aofuse {

namespace {

#include "mc_tables.inc"

// Bourke numbering: corner offsets (x, y, z) and the corner pair of each edge.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

double Mesh::area() const {
  double a = 0.0;
  for (const auto& f : faces) {
    a += 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
  }
  return a;
}

std::vector<Vec3> Mesh::sample_surface(std::size_t n, Rng& rng) const {
  std::vector<double> cdf(faces.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const auto& f = faces[i];
    acc += 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw Error(ErrorCode::EmptySurface, "mesh has no area");
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    const auto& f = faces[static_cast<std::size_t>(it - cdf.begin())];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    out.push_back((1.0 - r1) * vertices[f[0]] + r1 * (1.0 - r2) * vertices[f[1]] + r1 * r2 * vertices[f[2]]);
  }
  return out;
}

Mesh marching_cubes(std::span<const double> values, const GridShape& shape, const Vec3& origin, const Vec3& spacing,
                    double iso) {
  if (values.size() != shape.count()) throw Error(ErrorCode::ShapeMismatch, "grid values do not match the shape");
  Mesh mesh;
  // One vertex per crossed grid edge, keyed by (lower node, axis).
  std::vector<std::int32_t> edge_vertex(shape.count() * 3, -1);

  auto vertex_on = [&](int i, int j, int k, int e) -> std::uint32_t {
    const int* a = kCorner[kEdge[e][0]];
    const int* b = kCorner[kEdge[e][1]];
    int lo[3], axis = 0;
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(a[d], b[d]);
      if (a[d] != b[d]) axis = d;
    }
    const int ni = i + lo[0], nj = j + lo[1], nk = k + lo[2];
    const std::size_t key = static_cast<std::size_t>(shape.index(ni, nj, nk)) * 3 + axis;
    if (edge_vertex[key] >= 0) return static_cast<std::uint32_t>(edge_vertex[key]);
    int hi[3] = {ni, nj, nk};
    ++hi[axis];
    const double va = values[shape.index(ni, nj, nk)];
    const double vb = values[shape.index(hi[0], hi[1], hi[2])];
    const double t = (iso - va) / (vb - va);
    Vec3 p = origin + spacing.cwiseProduct(Vec3(ni, nj, nk));
    p[axis] += t * spacing[axis];
    edge_vertex[key] = static_cast<std::int32_t>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    return static_cast<std::uint32_t>(mesh.vertices.size() - 1);
  };

  for (int k = 0; k + 1 < shape.nz; ++k) {
    for (int j = 0; j + 1 < shape.ny; ++j) {
      for (int i = 0; i + 1 < shape.nx; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          if (values[shape.index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])] < iso) cube |= 1 << c;
        }
        const auto& row = kTriTable[cube];
        for (int n = 0; n + 2 < 16 && row[n] >= 0; n += 3) {
          mesh.faces.push_back({vertex_on(i, j, k, row[n]), vertex_on(i, j, k, row[n + 1]),
                                vertex_on(i, j, k, row[n + 2])});
        }
      }
    }
  }
  return mesh;
}

Mesh marching_cubes(const FieldModel& field, double iso) {
  Mesh m = marching_cubes(field.sdf, field.shape, field.lo, field.spacing(), iso);
  if (m.empty()) throw Error(ErrorCode::EmptyMesh, "no zero crossing in the SDF grid");
  return m;
}

void write_ply(const Mesh& mesh, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << "ply\nformat ascii 1.0\ncomment aofuse mesh\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "element face " << mesh.faces.size() << "\n";
  out << "property list uchar uint vertex_indices\nend_header\n";
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + file.string());
}

Mesh read_ply(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + file.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw Error(ErrorCode::IoError, file.string() + " is not a PLY file");
  std::size_t nv = 0, nf = 0;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string kind;
      ss >> kind;
      ascii = kind == "ascii";
    } else if (tok == "element") {
      std::string what;
      std::size_t n = 0;
      ss >> what >> n;
      if (what == "vertex") nv = n;
      if (what == "face") nf = n;
    } else if (tok == "end_header") {
      break;
    }
  }
  if (!ascii) throw Error(ErrorCode::IoError, "only ASCII PLY is supported");
  Mesh m;
  m.vertices.resize(nv);
  for (auto& v : m.vertices) {
    if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "truncated PLY vertex list");
    std::istringstream ss(line);
    ss >> v.x() >> v.y() >> v.z();
    if (!ss) throw Error(ErrorCode::IoError, "bad PLY vertex: " + line);
  }
  m.faces.reserve(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "truncated PLY face list");
    std::istringstream ss(line);
    std::size_t count = 0;
    ss >> count;
    std::vector<std::uint32_t> idx(count);
    for (auto& x : idx) ss >> x;
    if (!ss || count < 3) throw Error(ErrorCode::IoError, "bad PLY face: " + line);
    for (auto x : idx) {
      if (x >= nv) throw Error(ErrorCode::IoError, "PLY face index out of range");
    }
    for (std::size_t k = 1; k + 1 < count; ++k) m.faces.push_back({idx[0], idx[k], idx[k + 1]});
  }
  return m;
}

}  // namespace aofuse
