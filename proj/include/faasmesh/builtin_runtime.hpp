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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace faasmesh::runtime {

/// Per-host mutable state. Lives exactly as long as the host, so it resets
/// whenever the executor recycles a runtime.
struct HostState {
  long counter = 0;
};

struct HandlerContext {
  std::string_view raw_body;
  const nlohmann::json& params;
  const std::filesystem::path& data_root;
  HostState& state;
};

struct HandlerOutput {
  std::string body;
  std::string content_type = "text/plain; charset=utf-8";
};

/// Any exception escaping a handler becomes a 500 carrying `what()`.
using Handler = std::function<HandlerOutput(HandlerContext&)>;

/// Names of the native handlers: echo, sleep-ms, counter, fail, mock-flag,
/// mock-calibrate, mock-tclean, mock-wsclean, mock-blur.
std::vector<std::string> builtin_handler_names();
const Handler* find_builtin_handler(std::string_view name);

/// Maps a function's code_ref to a native handler name. Accepts the bare
/// name, a `builtin:` prefix, or a file path whose stem names the handler
/// with or without the `mock-` prefix (`tclean.py` -> `mock-tclean`).
std::optional<std::string> resolve_builtin_handler(std::string_view code_ref);

/// Resolves a `/data/`-style or bare relative reference under the data root.
/// Rejects absolute paths and `..` components.
std::filesystem::path resolve_data_path(const std::filesystem::path& data_root,
                                        std::string_view ref);

/// In-process runtime host speaking the same specialize/invoke HTTP protocol
/// as external hosts:
///   POST /specialize  {"code_path": "...", "entry": "main"}  -> 200 | 500
///   POST /            <parameters JSON>                      -> 200 | 500
/// `X-Faas-Request-Id` is echoed on every response.
class BuiltinRuntimeHost {
 public:
  explicit BuiltinRuntimeHost(std::filesystem::path workdir);
  ~BuiltinRuntimeHost();

  BuiltinRuntimeHost(const BuiltinRuntimeHost&) = delete;
  BuiltinRuntimeHost& operator=(const BuiltinRuntimeHost&) = delete;

  int port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace faasmesh::runtime
