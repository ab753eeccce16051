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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace faasmesh {

enum class ErrorCode {
  // catalog
  InvalidSpec,
  DuplicateName,
  DuplicateRoute,
  UnknownEnvironment,
  NotFound,
  EnvironmentInUse,
  SchemaMismatch,
  // gateway
  RouteConflict,
  // executor
  SpawnFailure,
  CapacityExhausted,
  RuntimeCrashed,
  Timeout,
  // planner
  Infeasible,
  NoFeasibleNode,
  InvalidTopology,
  // workflow
  ValidationError,
  StepFailed,
  // shared
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Domain error carrying a machine-readable code. The message is meant for
/// humans and names the offending field or object where there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for failures caused by the environment (files, processes) rather
  /// than by invalid input.
  bool is_environmental() const noexcept;

 private:
  ErrorCode code_;
};

}  // namespace faasmesh
