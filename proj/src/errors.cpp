/*
 * Copyright 2026 The faasmesh Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "faasmesh/errors.hpp"

namespace faasmesh {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::DuplicateRoute: return "DuplicateRoute";
    case ErrorCode::UnknownEnvironment: return "UnknownEnvironment";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::EnvironmentInUse: return "EnvironmentInUse";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::RouteConflict: return "RouteConflict";
    case ErrorCode::SpawnFailure: return "SpawnFailure";
    case ErrorCode::CapacityExhausted: return "CapacityExhausted";
    case ErrorCode::RuntimeCrashed: return "RuntimeCrashed";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NoFeasibleNode: return "NoFeasibleNode";
    case ErrorCode::InvalidTopology: return "InvalidTopology";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::StepFailed: return "StepFailed";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool Error::is_environmental() const noexcept {
  switch (code_) {
    case ErrorCode::IoError:
    case ErrorCode::SpawnFailure:
    case ErrorCode::RuntimeCrashed:
    case ErrorCode::Timeout:
      return true;
    default:
      return false;
  }
}

}  // namespace faasmesh
