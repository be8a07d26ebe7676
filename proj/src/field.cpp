// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace aofuse {

namespace fs = std::filesystem;

FieldModel::FieldModel(const Vec3& lo_, const Vec3& hi_, GridShape shape_) : lo(lo_), hi(hi_), shape(shape_) {
  if (shape.nx < 2 || shape.ny < 2 || shape.nz < 2) throw Error(ErrorCode::BadConfig, "grid resolution must be >= 2");
  if (!((hi - lo).array() > 0).all()) throw Error(ErrorCode::BadConfig, "field box must have positive extent");
  sdf.assign(shape.count(), 0.0);
  acoustic.assign(shape.count(), 0.0);
  optical.assign(3 * shape.count(), 0.0);
}

FieldModel FieldModel::initialized(const Vec3& lo, const Vec3& hi, GridShape shape, const FieldInit& init) {
  FieldModel f(lo, hi, shape);
  const Vec3 center = 0.5 * (lo + hi);
  const double radius = init.radius_fraction * 0.5 * (hi - lo).minCoeff();
  for (int k = 0; k < shape.nz; ++k) {
    for (int j = 0; j < shape.ny; ++j) {
      for (int i = 0; i < shape.nx; ++i) {
        f.sdf[shape.index(i, j, k)] = (f.node_position(i, j, k) - center).norm() - radius;
      }
    }
  }
  std::fill(f.acoustic.begin(), f.acoustic.end(), init.acoustic);
  std::fill(f.optical.begin(), f.optical.end(), init.optical);
  f.log_q = std::log(init.q);
  return f;
}

double FieldModel::q() const { return std::exp(log_q); }

Vec3 FieldModel::spacing() const {
  return (hi - lo).cwiseQuotient(Vec3(shape.nx - 1, shape.ny - 1, shape.nz - 1));
}

Vec3 FieldModel::node_position(int i, int j, int k) const {
  return lo + spacing().cwiseProduct(Vec3(i, j, k));
}

void FieldModel::clamp_appearance() {
  for (double& a : acoustic) a = std::max(a, 0.0);
  for (double& c : optical) c = std::clamp(c, 0.0, 1.0);
}

CellStencil locate(const FieldModel& field, const Vec3& x) {
  CellStencil st;
  const Vec3 p = x.cwiseMax(field.lo).cwiseMin(field.hi);
  st.outside_offset = x - p;
  st.outside_distance = st.outside_offset.norm();
  st.out_of_box = st.outside_distance > 0.0;

  const Vec3 h = field.spacing();
  const int n[3] = {field.shape.nx, field.shape.ny, field.shape.nz};
  int idx[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double u = (p[a] - field.lo[a]) / h[a];
    idx[a] = std::clamp(static_cast<int>(std::floor(u)), 0, n[a] - 2);
    frac[a] = std::clamp(u - idx[a], 0.0, 1.0);
  }
  for (int c = 0; c < 8; ++c) {
    const int bx = c & 1, by = (c >> 1) & 1, bz = (c >> 2) & 1;
    const double wx = bx ? frac[0] : 1.0 - frac[0];
    const double wy = by ? frac[1] : 1.0 - frac[1];
    const double wz = bz ? frac[2] : 1.0 - frac[2];
    st.node[c] = field.shape.index(idx[0] + bx, idx[1] + by, idx[2] + bz);
    st.w[c] = wx * wy * wz;
    Vec3 d((bx ? 1.0 : -1.0) / h[0] * wy * wz, (by ? 1.0 : -1.0) / h[1] * wx * wz,
           (bz ? 1.0 : -1.0) / h[2] * wx * wy);
    // Along a clamped axis the interior value no longer moves with x.
    for (int a = 0; a < 3; ++a) {
      if (st.outside_offset[a] != 0.0) d[a] = 0.0;
    }
    st.dw[c] = d;
  }
  return st;
}

double sample_sdf(const FieldModel& field, const CellStencil& st, Vec3* grad) {
  double s = st.outside_distance;
  Vec3 g = st.out_of_box ? Vec3(st.outside_offset / st.outside_distance) : Vec3::Zero();
  for (int c = 0; c < 8; ++c) {
    const double v = field.sdf[st.node[c]];
    s += st.w[c] * v;
    g += st.dw[c] * v;
  }
  if (grad) *grad = g;
  return s;
}

FieldSample grid_sample(const FieldModel& field, const CellStencil& st) {
  FieldSample out;
  out.sdf = sample_sdf(field, st, &out.grad);
  out.out_of_box = st.out_of_box;
  for (int c = 0; c < 8; ++c) {
    const auto n = st.node[c];
    out.acoustic += st.w[c] * field.acoustic[n];
    for (int ch = 0; ch < 3; ++ch) out.optical[ch] += st.w[c] * field.optical[3 * n + ch];
  }
  return out;
}

void GradientBuffer::resize(const FieldModel& field) {
  sdf.assign(field.sdf.size(), 0.0);
  acoustic.assign(field.acoustic.size(), 0.0);
  optical.assign(field.optical.size(), 0.0);
  log_q = 0.0;
}

void GradientBuffer::zero() {
  std::fill(sdf.begin(), sdf.end(), 0.0);
  std::fill(acoustic.begin(), acoustic.end(), 0.0);
  std::fill(optical.begin(), optical.end(), 0.0);
  log_q = 0.0;
}

bool GradientBuffer::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(sdf) && finite(acoustic) && finite(optical) && std::isfinite(log_q);
}

void grid_backprop(const FieldModel&, const CellStencil& st, const SampleAdjoint& up, GradientSink& sink) {
  const bool has_sdf = up.sdf != 0.0 || !up.grad.isZero(0.0);
  const bool has_opt = up.optical[0] != 0.0 || up.optical[1] != 0.0 || up.optical[2] != 0.0;
  for (int c = 0; c < 8; ++c) {
    const auto n = st.node[c];
    if (has_sdf) sink.add(Channel::Sdf, n, up.sdf * st.w[c] + up.grad.dot(st.dw[c]));
    if (up.acoustic != 0.0) sink.add(Channel::Acoustic, n, up.acoustic * st.w[c]);
    if (has_opt) {
      for (int ch = 0; ch < 3; ++ch) sink.add(Channel::Optical, 3 * n + ch, up.optical[ch] * st.w[c]);
    }
  }
}

namespace {

constexpr char kMagic[8] = {'A', 'O', 'F', 'U', 'S', 'E', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void put_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  in.read(reinterpret_cast<char*>(b), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(ErrorCode::BadCheckpoint, "checkpoint is truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const FieldModel& field, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.shape.nx));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.shape.ny));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.shape.nz));
  for (int a = 0; a < 3; ++a) put_le<double>(out, field.lo[a]);
  for (int a = 0; a < 3; ++a) put_le<double>(out, field.hi[a]);
  put_le<double>(out, field.log_q);
  for (double v : field.sdf) put_le<double>(out, v);
  for (double v : field.acoustic) put_le<double>(out, v);
  for (double v : field.optical) put_le<double>(out, v);
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + file.string());
}

FieldModel load_checkpoint(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::BadCheckpoint, "cannot open " + file.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error(ErrorCode::BadCheckpoint, file.string() + " is not an aofuse checkpoint");
  }
  if (get_le<std::uint32_t>(in) != kCheckpointVersion) throw Error(ErrorCode::BadCheckpoint, "unsupported version");
  GridShape shape;
  shape.nx = static_cast<int>(get_le<std::uint32_t>(in));
  shape.ny = static_cast<int>(get_le<std::uint32_t>(in));
  shape.nz = static_cast<int>(get_le<std::uint32_t>(in));
  if (shape.nx < 2 || shape.ny < 2 || shape.nz < 2 || shape.count() > (std::size_t{1} << 28)) {
    throw Error(ErrorCode::BadCheckpoint, "implausible grid resolution");
  }
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) lo[a] = get_le<double>(in);
  for (int a = 0; a < 3; ++a) hi[a] = get_le<double>(in);
  FieldModel f;
  try {
    f = FieldModel(lo, hi, shape);
  } catch (const Error& e) {
    throw Error(ErrorCode::BadCheckpoint, e.what());
  }
  f.log_q = get_le<double>(in);
  for (double& v : f.sdf) v = get_le<double>(in);
  for (double& v : f.acoustic) v = get_le<double>(in);
  for (double& v : f.optical) v = get_le<double>(in);
  return f;
}

}  // namespace aofuse
