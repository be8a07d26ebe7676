// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aofuse/analyze.hpp"
#include "aofuse/config.hpp"
#include "aofuse/train.hpp"

namespace aofuse {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2 };

/// Runs one subcommand; `args` excludes the program name. Progress goes to
/// stderr, results only to files.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, const char* const* argv);

// Pipeline steps behind the subcommands, usable from code.

/// Writes the dataset plus the resolved config (config.json) to `out`.
void simulate_to(const RunConfig& cfg, const std::filesystem::path& out);

/// Trains on the dataset in `dataset_dir` and writes field.ckpt, train.csv,
/// mesh.ply (when a surface exists), run.json and timing.json to `out`.
TrainResult reconstruct_to(const std::filesystem::path& dataset_dir, Mode mode, const RunConfig& cfg,
                           std::uint64_t seed, const std::filesystem::path& out, bool quiet = false);

struct Evaluation {
  ReconMetrics metrics;
  AxisHistograms axes;
};

/// Extracts the zero level set of a checkpoint and scores it against `gt`.
/// Throws EmptyMesh when the field has no surface.
Evaluation evaluate_field(const FieldModel& field, const AnalyticScene& gt, const EvalConfig& eval,
                          std::uint64_t seed);

/// Header and one row of the metrics CSV.
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& dataset, const std::string& mode, std::uint64_t seed, double tau,
                            const ReconMetrics& m);

/// Predicted images of a field at every pose of a dataset, midpoint sampled.
Dataset render_dataset(const FieldModel& field, const Manifest& manifest, const SamplingConfig& sampling,
                       int threads);

}  // namespace aofuse
