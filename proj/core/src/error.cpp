// Copyright 2026 The BLOB Authors.
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

#include "blob/error.hpp"

namespace blob {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kNonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::kNonPositivePhi: return "NonPositivePhi";
    case ErrorCode::kSingularPrecision: return "SingularPrecision";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kItemIdOutOfRange: return "ItemIdOutOfRange";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kMissingPropensity: return "MissingPropensity";
    case ErrorCode::kCalibrationFailed: return "CalibrationFailed";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kMissingInput: return "MissingInput";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kFormatMismatch: return "FormatMismatch";
    case ErrorCode::kTrainingDiverged: return "TrainingDiverged";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace blob
