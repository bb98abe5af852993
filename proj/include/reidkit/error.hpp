// Copyright 2026 The reidkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reidkit {

enum class ErrorCode {
  // dataset
  MalformedRow,
  DuplicateImageId,
  EmptySplit,
  BadMagic,
  CountMismatch,
  NonFiniteValue,
  TruncatedFile,
  // ranking
  DimMismatch,
  ZeroNormRow,
  UnknownImageId,
  // metrics
  NoTargets,
  EmptySubGallery,
  AllQueriesInvalid,
  // relation kernels
  NonAscendingRadii,
  EmptyMask,
  ShapeMismatch,
  // synthetic
  StepOutOfRange,
  // general
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateImageId: return "DuplicateImageId";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ZeroNormRow: return "ZeroNormRow";
    case ErrorCode::UnknownImageId: return "UnknownImageId";
    case ErrorCode::NoTargets: return "NoTargets";
    case ErrorCode::EmptySubGallery: return "EmptySubGallery";
    case ErrorCode::AllQueriesInvalid: return "AllQueriesInvalid";
    case ErrorCode::NonAscendingRadii: return "NonAscendingRadii";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// Every failure raised by the library. The message is prefixed with the
// code name so command-line users see e.g. "DimMismatch: ...".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace reidkit
