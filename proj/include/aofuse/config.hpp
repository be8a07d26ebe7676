// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aofuse/dataset.hpp"
#include "aofuse/simulate.hpp"
#include "aofuse/train.hpp"

namespace aofuse {

struct EvalConfig {
  double tau = 0.05;
  std::size_t n_samples = 20000;
  double bin_width = 0.005;
  int n_bins = 40;
};

/// Sonar source level used by run configs unless overridden. It puts peak
/// bin intensities near 1, on the same scale as camera pixels.
inline constexpr double kRunSonarEnergy = 20.0;

/// Everything one pipeline run needs, fully defaulted. The scene is stored
/// in world coordinates.
struct RunConfig {
  DatasetSpec dataset;
  TrainConfig train;
  EvalConfig eval;
  std::uint64_t seed = 0;
};

struct ConfigViolation {
  std::string pointer;  // JSON pointer, "" for the document root
  std::string message;
};

struct ConfigResult {
  std::optional<RunConfig> config;
  std::vector<ConfigViolation> violations;

  bool ok() const { return config.has_value(); }
};

/// Parses and validates a config document. Every violation is reported, not
/// just the first; an empty object yields the defaults.
ConfigResult validate_config(std::string_view text);
ConfigResult validate_config_doc(const json& doc);

/// The default scene: a sphere and a box around the trajectory target.
json default_scene_json();

/// Fully resolved form of a config (scene primitives in world coordinates).
/// Feeding it back through validate_config reproduces the same RunConfig.
json config_to_json(const RunConfig& cfg);

/// Reads and validates a config file; throws BadConfig listing every
/// violation, or IoError.
RunConfig load_config(const std::filesystem::path& file);

}  // namespace aofuse
