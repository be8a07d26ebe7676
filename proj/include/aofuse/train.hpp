// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aofuse/dataset.hpp"
#include "aofuse/field.hpp"

namespace aofuse {

enum class Mode { Fused, Camera, Sonar };
const char* to_string(Mode m);
Mode parse_mode(const std::string& s);  // throws BadConfig

enum class ScheduleMode { Constant, Linear, Step };
const char* to_string(ScheduleMode m);
ScheduleMode parse_schedule_mode(const std::string& s);  // throws BadConfig

struct Schedule {
  ScheduleMode mode = ScheduleMode::Step;
  double alpha_start = 1.0;
  double alpha_end = 0.3;
  int E_t = 2000;
  int E_e = 5000;
};

struct LossConfig {
  double lambda_eik = 0.1;
  double lambda_reg = 0.0;
  Schedule schedule;
};

/// Sonar loss weight at iteration t. Throws BadConfig for t outside [0, E_e]
/// or an inconsistent schedule.
double schedule_alpha(int t, const LossConfig& cfg);

/// Mean absolute error. Throws LengthMismatch, or Empty for no elements.
double intensity_loss(std::span<const double> pred, std::span<const double> meas);
/// Mean of (|g| - 1)^2. Throws Empty.
double eikonal_loss(std::span<const Vec3> grads);
/// Mean opacity. Throws Empty.
double opacity_reg(std::span<const double> alphas);

struct LossTerms {
  double sonar = 0.0;
  double camera = 0.0;
  double eikonal = 0.0;
  double reg = 0.0;
  double total = 0.0;
  double alpha = 0.0;  // schedule value used for the sonar weight
};

/// Per-modality weights (sonar, camera) for a mode at iteration t.
std::array<double, 2> modality_weights(Mode mode, int t, const LossConfig& cfg);

struct LossBatch {
  std::span<const double> sonar_pred, sonar_meas;
  std::span<const double> camera_pred, camera_meas;  // flattened RGB
  std::span<const Vec3> grads;                       // eikonal sample set
  std::span<const double> alphas;                    // every rendered interval
};

/// alpha(t) L_son + (1 - alpha(t)) L_cam + lambda_eik L_eik + lambda_reg L_reg,
/// with the schedule replaced by 1 / 0 in single-modality modes. Throws
/// EmptyBatch when a modality with nonzero weight has no data.
LossTerms total_loss(const LossBatch& batch, Mode mode, int t, const LossConfig& cfg);

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::vector<double> m, v;
  long step = 0;
};

/// One bias-corrected Adam update. Moments are allocated on first use.
/// Throws ShapeMismatch or NonFiniteGradient; params are untouched on throw.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

/// Adam over every trainable array of a field, followed by the appearance
/// clamps. The SDF grid gets its own step size since its values are lengths.
struct FieldOptimizer {
  AdamState sdf, acoustic, optical, log_q;

  explicit FieldOptimizer(const AdamConfig& cfg = {}, double sdf_lr = 0.0);
  void step(FieldModel& field, const GradientBuffer& grad);
};

struct SamplingConfig {
  int camera_rays = 512;
  int sonar_bins = 512;  // rounded to whole beams of n_range_bins
  int camera_samples = 64;
  int sonar_elevations = 24;
  int sonar_radial = 96;
  int eikonal_uniform = 1024;
};

struct TrainConfig {
  LossConfig loss;
  AdamConfig adam;
  double sdf_lr = 2e-3;  // metres per step, roughly a quarter cell at 64^3
  SamplingConfig sampling;
  GridShape resolution{64, 64, 64};
  FieldInit init;
  int iterations = -1;         // < 0: run schedule.E_e iterations
  int checkpoint_every = 100;  // divergence fallback snapshot interval
  int threads = 0;
};

struct TrainReport {
  struct Row {
    int iteration;
    LossTerms loss;
    double q;
  };
  std::vector<Row> rows;
  bool diverged = false;
  std::string divergence;
  double wall_seconds = 0.0;

  /// iteration,sonar,camera,eikonal,reg,total,alpha,q. Wall time is kept
  /// out so that the file is reproducible.
  void write_csv(const std::filesystem::path& file) const;
};

struct TrainResult {
  FieldModel field;
  TrainReport report;
};

/// Loss of training iteration t and, when `grad` is non-null, its exact
/// gradient added into `grad`. The rays, beams and jitter depend only on
/// (seed, t) and the box, so this is a fixed function of the field
/// parameters. Does not validate its inputs.
LossTerms loss_and_gradient(const FieldModel& field, const Dataset& data, Mode mode, const TrainConfig& cfg,
                            std::uint64_t seed, int t, GradientBuffer* grad, int threads = 1);

using ProgressFn = std::function<void(const TrainReport::Row&)>;

/// Fits a field to a dataset. Deterministic for a fixed seed whatever the
/// thread count. On a non-finite loss or gradient the run stops and the last
/// snapshot is returned with report.diverged set. Throws BadDataset.
TrainResult reconstruct(const Dataset& data, Mode mode, const TrainConfig& cfg, std::uint64_t seed,
                        const ProgressFn& progress = {});

}  // namespace aofuse
