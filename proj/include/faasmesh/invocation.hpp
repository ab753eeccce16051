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

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "faasmesh/util.hpp"

namespace faasmesh {

struct InvocationRequest {
  std::string request_id;
  std::string function_name;
  nlohmann::json parameters = nlohmann::json::object();
  std::vector<std::string> data_refs;
  Timestamp received_at{};
};

enum class InvocationStatus { Ok, HandlerError, PlatformError };

std::string_view to_string(InvocationStatus status);

/// Outcome of one execution. `output` holds the handler's payload on success
/// and the error text otherwise; `content_type` tells text paths apart from
/// binary payloads.
struct InvocationResult {
  std::string request_id;
  InvocationStatus status = InvocationStatus::PlatformError;
  std::string output;
  std::string content_type = "text/plain; charset=utf-8";
  std::string node_id;
  bool cold_start = false;
  double duration_ms = 0.0;

  bool ok() const { return status == InvocationStatus::Ok; }
  bool is_text() const { return content_type.rfind("text/", 0) == 0; }
};

}  // namespace faasmesh

namespace faasmesh {

/// Runs a catalog function by name through the normal placement path.
/// Failures come back as non-ok results rather than exceptions.
class Invoker {
 public:
  virtual ~Invoker() = default;
  virtual InvocationResult invoke(const std::string& function_name,
                                  const nlohmann::json& parameters) = 0;
};

}  // namespace faasmesh
