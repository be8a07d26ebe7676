// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "aofuse/core.hpp"

namespace aofuse {

struct GridShape {
  int nx = 2, ny = 2, nz = 2;

  std::size_t count() const { return static_cast<std::size_t>(nx) * ny * nz; }
  std::uint32_t index(int i, int j, int k) const {
    return static_cast<std::uint32_t>((static_cast<std::size_t>(k) * ny + j) * nx + i);
  }
  bool operator==(const GridShape&) const = default;
};

struct FieldInit {
  double radius_fraction = 0.4;  // of the smallest bbox half extent
  double acoustic = 0.5;
  double optical = 0.5;
  double q = 20.0;
};

/// Trainable scene: node-based SDF grid, acoustic albedo grid, RGB optical
/// albedo grid and the log of the sigmoid sharpness q. Grids share one
/// resolution; node (i, j, k) sits at lo + (i, j, k) * spacing.
struct FieldModel {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();
  GridShape shape;
  std::vector<double> sdf;
  std::vector<double> acoustic;
  std::vector<double> optical;  // 3 per node, interleaved
  double log_q = 0.0;

  FieldModel() = default;
  /// Zero-filled grids. Throws BadConfig for resolutions below 2 or an empty box.
  FieldModel(const Vec3& lo, const Vec3& hi, GridShape shape);
  /// Sphere SDF at the box centre plus constant appearance.
  static FieldModel initialized(const Vec3& lo, const Vec3& hi, GridShape shape, const FieldInit& init = {});

  double q() const;
  Vec3 spacing() const;
  Vec3 node_position(int i, int j, int k) const;
  /// Clamp acoustic albedo to >= 0 and optical albedo to [0, 1].
  void clamp_appearance();
};

enum class Channel : std::uint8_t { Sdf = 0, Acoustic = 1, Optical = 2 };

/// Interpolation stencil of one query point.
struct CellStencil {
  std::array<std::uint32_t, 8> node{};  // corner c has offsets (c & 1, (c >> 1) & 1, (c >> 2) & 1)
  std::array<double, 8> w{};            // trilinear weights at the (clamped) point
  std::array<Vec3, 8> dw{};             // d(sdf)/dx per corner value, world units
  Vec3 outside_offset = Vec3::Zero();   // x - clamp(x); zero inside the box
  double outside_distance = 0.0;
  bool out_of_box = false;
};

struct FieldSample {
  double sdf = 0.0;
  Vec3 grad = Vec3::Zero();
  double acoustic = 0.0;
  std::array<double, 3> optical{};
  bool out_of_box = false;
};

/// Locates x. Outside the box the stencil is taken at the clamped point and
/// the SDF becomes distance-to-box plus the interior value.
CellStencil locate(const FieldModel& field, const Vec3& x);

/// Trilinear sample with the exact gradient of the interpolant.
FieldSample grid_sample(const FieldModel& field, const CellStencil& st);
inline FieldSample grid_sample(const FieldModel& field, const Vec3& x) { return grid_sample(field, locate(field, x)); }
/// SDF value and gradient only.
double sample_sdf(const FieldModel& field, const CellStencil& st, Vec3* grad = nullptr);

/// Dense parameter gradient with the same layout as FieldModel.
struct GradientBuffer {
  std::vector<double> sdf;
  std::vector<double> acoustic;
  std::vector<double> optical;
  double log_q = 0.0;

  GradientBuffer() = default;
  explicit GradientBuffer(const FieldModel& field) { resize(field); }
  void resize(const FieldModel& field);
  void zero();
  bool all_finite() const;
  void add(Channel ch, std::uint32_t slot, double v) {
    switch (ch) {
      case Channel::Sdf: sdf[slot] += v; break;
      case Channel::Acoustic: acoustic[slot] += v; break;
      case Channel::Optical: optical[slot] += v; break;
    }
  }
};

/// Ordered record of gradient contributions from one work chunk. Replaying
/// chunk logs in chunk order gives the same floating-point sums as
/// accumulating directly in that order, whatever the worker count.
struct GradientLog {
  struct Entry {
    std::uint32_t slot;
    Channel channel;
    double value;
  };
  std::vector<Entry> entries;

  void clear() { entries.clear(); }
  void replay(GradientBuffer& buf) const {
    for (const auto& e : entries) buf.add(e.channel, e.slot, e.value);
  }
};

/// Destination for adjoints: either a buffer (direct) or a log.
/// log_q contributions are summed locally and flushed per chunk.
class GradientSink {
 public:
  explicit GradientSink(GradientBuffer& buf) : buf_(&buf) {}
  explicit GradientSink(GradientLog& log) : log_(&log) {}

  void add(Channel ch, std::uint32_t slot, double v) {
    if (v == 0.0) return;
    if (buf_) {
      buf_->add(ch, slot, v);
    } else {
      log_->entries.push_back({slot, ch, v});
    }
  }
  void add_log_q(double v) { log_q_ += v; }
  double log_q() const { return log_q_; }

 private:
  GradientBuffer* buf_ = nullptr;
  GradientLog* log_ = nullptr;
  double log_q_ = 0.0;
};

/// Adjoints of the grid_sample outputs.
struct SampleAdjoint {
  double sdf = 0.0;
  Vec3 grad = Vec3::Zero();
  double acoustic = 0.0;
  std::array<double, 3> optical{};
};

/// Adds upstream . d(output)/d(corner values) at the 8 stencil nodes.
void grid_backprop(const FieldModel& field, const CellStencil& st, const SampleAdjoint& upstream,
                   GradientSink& sink);

/// Binary checkpoint; layout documented in FORMAT.md. Throws IoError /
/// BadCheckpoint.
void save_checkpoint(const FieldModel& field, const std::filesystem::path& file);
FieldModel load_checkpoint(const std::filesystem::path& file);

}  // namespace aofuse
