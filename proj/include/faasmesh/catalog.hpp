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

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "faasmesh/util.hpp"

namespace faasmesh {

enum class RuntimeKind { BuiltinTest, ExternalProcess };
enum class HttpMethod { Get, Post };

std::string_view to_string(RuntimeKind kind);
std::string_view to_string(HttpMethod method);
RuntimeKind parse_runtime_kind(std::string_view text);
HttpMethod parse_http_method(std::string_view text);

struct EnvironmentSpec {
  std::string name;
  std::string image_ref;
  RuntimeKind runtime_kind = RuntimeKind::BuiltinTest;
  // Template tokens for the host process; `{port}` and `{workdir}` are
  // substituted at spawn time.
  std::vector<std::string> launch_command;
  Timestamp created_at{};

  bool operator==(const EnvironmentSpec&) const = default;
};

struct FunctionSpec {
  std::string name;
  std::string env_name;
  std::string code_ref;
  HttpMethod http_method = HttpMethod::Post;
  std::string url_route;
  int min_warm = 0;
  int max_pool = 4;
  double idle_timeout_s = 60.0;
  double timeout_s = 300.0;
  Timestamp created_at{};

  bool operator==(const FunctionSpec&) const = default;
};

inline constexpr int kCatalogSchemaVersion = 1;

struct CatalogSnapshot {
  std::vector<EnvironmentSpec> environments;
  std::vector<FunctionSpec> functions;
  int schema_version = kCatalogSchemaVersion;

  bool operator==(const CatalogSnapshot&) const = default;
};

void to_json(nlohmann::json& j, const EnvironmentSpec& env);
void from_json(const nlohmann::json& j, EnvironmentSpec& env);
void to_json(nlohmann::json& j, const FunctionSpec& fn);
void from_json(const nlohmann::json& j, FunctionSpec& fn);
void to_json(nlohmann::json& j, const CatalogSnapshot& snap);

/// `[a-z0-9][a-z0-9.-]*`
bool is_valid_identifier(std::string_view name);

/// Field-level checks that do not need the rest of the catalog. Throws
/// Error(InvalidSpec) naming the failing field.
void validate(const EnvironmentSpec& env);
void validate(const FunctionSpec& fn);

CatalogSnapshot parse_snapshot(std::string_view text, std::string_view source = "<memory>");
CatalogSnapshot load_snapshot(const std::filesystem::path& path);
void save_snapshot(const std::filesystem::path& path, const CatalogSnapshot& snapshot);

/// Registry of environments and functions. Readers share a lock, writers are
/// exclusive; when bound to a file every mutation is persisted before the
/// call returns.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::filesystem::path path);

  Catalog(const Catalog&) = delete;
  Catalog& operator=(const Catalog&) = delete;

  EnvironmentSpec create_environment(EnvironmentSpec spec);
  EnvironmentSpec get_environment(std::string_view name) const;
  std::vector<EnvironmentSpec> list_environments() const;
  void delete_environment(std::string_view name);

  FunctionSpec create_function(FunctionSpec spec);
  FunctionSpec get_function(std::string_view name) const;
  std::optional<FunctionSpec> find_function(std::string_view name) const;
  std::vector<FunctionSpec> list_functions() const;
  void delete_function(std::string_view name);

  CatalogSnapshot snapshot() const;
  void save(const std::filesystem::path& path) const;

  /// Reloads from the backing file if another process changed it. Returns
  /// true when the in-memory state was replaced.
  bool refresh();

  /// Bumped on every change, including reloads.
  std::uint64_t generation() const;

  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  void adopt(CatalogSnapshot snap);
  void persist_locked();
  std::optional<std::filesystem::file_time_type> stat_file() const;

  mutable std::shared_mutex mu_;
  std::mutex io_mu_;
  std::optional<std::filesystem::path> path_;
  std::optional<std::filesystem::file_time_type> seen_mtime_;
  std::map<std::string, EnvironmentSpec, std::less<>> envs_;
  std::map<std::string, FunctionSpec, std::less<>> fns_;
  std::uint64_t generation_ = 0;
};

}  // namespace faasmesh
