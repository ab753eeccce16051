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

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "faasmesh/catalog.hpp"
#include "faasmesh/invocation.hpp"

namespace faasmesh {

/// String parameter values may contain `${input.<key>}`, `${prev.output}`
/// and `${steps.<name>.output}`.
struct WorkflowStep {
  std::string step_name;
  std::string function_name;
  nlohmann::json parameters = nlohmann::json::object();
};

struct WorkflowSpec {
  std::string name;
  std::vector<WorkflowStep> steps;
};

struct StepRecord {
  std::string step_name;
  std::string function_name;
  nlohmann::json dispatched_parameters;
  InvocationResult result;
};

enum class WorkflowStatus { Completed, Aborted };

struct WorkflowResult {
  std::string workflow_name;
  WorkflowStatus status = WorkflowStatus::Completed;
  // Completed steps only; the failing step lives in `failure`.
  std::vector<StepRecord> steps;
  std::string final_output;
  std::string aborted_at;
  std::optional<StepRecord> failure;

  bool completed() const { return status == WorkflowStatus::Completed; }
};

/// Workflow input keys referenced through `${input.<key>}`.
std::set<std::string> required_inputs(const WorkflowSpec& spec);

/// Checks step names, placeholder grammar and ordering. With a catalog,
/// also checks that every function exists. Throws Error(ValidationError).
void validate_workflow(const WorkflowSpec& spec, const Catalog* catalog = nullptr);

WorkflowSpec parse_workflow_text(std::string_view text, const Catalog* catalog = nullptr,
                                 std::string_view source = "<memory>");
WorkflowSpec parse_workflow(const std::filesystem::path& path, const Catalog* catalog = nullptr);

/// Resolved values for the placeholders available to one step.
struct SubstitutionScope {
  const nlohmann::json& inputs;
  const std::string* prev_output = nullptr;
  const std::vector<StepRecord>* completed = nullptr;
};

nlohmann::json substitute_placeholders(const nlohmann::json& parameters,
                                       const SubstitutionScope& scope);

/// Runs the steps strictly in order, feeding outputs forward. Stops at the
/// first non-ok step. Throws Error(ValidationError) if `inputs` is not an
/// object or lacks a referenced key.
WorkflowResult run_workflow(const WorkflowSpec& spec, const nlohmann::json& inputs, Invoker& invoker);

}  // namespace faasmesh
