// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aofuse Authors

#include "aofuse/core.hpp"

#include <cstdlib>
#include <string>

#include "aofuse/parallel.hpp"

namespace aofuse {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::RangeOutOfBounds: return "RangeOutOfBounds";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::EmptySurface: return "EmptySurface";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::BadDataset: return "BadDataset";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::Diverged: return "Diverged";
  }
  return "Unknown";
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("AOFUSE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace aofuse
