// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#pragma once

#include <Eigen/Dense>

#include <numbers>
#include <stdexcept>
#include <string>

namespace aofuse {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

enum class ErrorCode {
  BehindCamera,
  OutOfBounds,
  RangeOutOfBounds,
  Degenerate,
  BadConfig,
  IoError,
  LengthMismatch,
  Empty,
  EmptyBatch,
  RankDeficient,
  EmptyMesh,
  EmptySurface,
  ShapeMismatch,
  NonFiniteGradient,
  BadDataset,
  BadCheckpoint,
  Diverged,
};

const char* to_string(ErrorCode code);

/// Every recoverable failure in the library surfaces as this exception.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline double deg2rad(double deg) { return deg * kPi / 180.0; }

}  // namespace aofuse
