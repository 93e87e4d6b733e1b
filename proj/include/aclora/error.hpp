// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aclora {

enum class ErrorCode {
  kEmptyInput,
  kDimensionMismatch,
  kFormatVersionMismatch,
  kCorruptFile,
  kDuplicateId,
  kShapeMismatch,
  kUnknownId,
  kLayerNotAdapted,
  kInvalidPlan,
  kEmptyPrediction,
  kUnknownEmbedderDim,
  kInvalidArgument,
  kIo,
  kRemote,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kCorruptFile: return "CorruptFile";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kLayerNotAdapted: return "LayerNotAdapted";
    case ErrorCode::kInvalidPlan: return "InvalidPlan";
    case ErrorCode::kEmptyPrediction: return "EmptyPrediction";
    case ErrorCode::kUnknownEmbedderDim: return "UnknownEmbedderDim";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kRemote: return "Remote";
  }
  return "Unknown";
}

/// Every failure raised by the library. The code identifies the contract
/// violation; what() carries a human-readable detail string.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aclora
