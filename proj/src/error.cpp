/*
 * Copyright 2026 The odflow Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "odflow/error.hpp"

namespace odflow {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateOrigin: return "degenerate_origin";
    case ErrorCode::kCoverage: return "coverage";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kRow: return "row";
    case ErrorCode::kWindow: return "window";
    case ErrorCode::kEmptyDataset: return "empty_dataset";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kInsufficientData: return "insufficient_data";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kCandidate: return "candidate";
    case ErrorCode::kUndefinedRange: return "undefined_range";
    case ErrorCode::kUndefinedOverlap: return "undefined_overlap";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kScope: return "scope";
    case ErrorCode::kGrid: return "grid";
    case ErrorCode::kPairing: return "pairing";
    case ErrorCode::kGeneration: return "generation";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
  }
  return "unknown";
}

void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace odflow
