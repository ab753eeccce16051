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

#include "faasmesh/catalog.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "faasmesh/errors.hpp"

namespace faasmesh {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(RuntimeKind kind) {
  return kind == RuntimeKind::BuiltinTest ? "builtin-test" : "external-process";
}

std::string_view to_string(HttpMethod method) {
  return method == HttpMethod::Get ? "GET" : "POST";
}

RuntimeKind parse_runtime_kind(std::string_view text) {
  if (text == "builtin-test") return RuntimeKind::BuiltinTest;
  if (text == "external-process") return RuntimeKind::ExternalProcess;
  throw Error(ErrorCode::InvalidSpec,
              fmt::format("runtime_kind: expected builtin-test or external-process, got '{}'", text));
}

HttpMethod parse_http_method(std::string_view text) {
  if (text == "GET") return HttpMethod::Get;
  if (text == "POST") return HttpMethod::Post;
  throw Error(ErrorCode::InvalidSpec,
              fmt::format("http_method: expected GET or POST, got '{}'", text));
}

void to_json(json& j, const EnvironmentSpec& env) {
  j = json{{"name", env.name},
           {"image_ref", env.image_ref},
           {"runtime_kind", to_string(env.runtime_kind)},
           {"launch_command", env.launch_command},
           {"created_at", format_timestamp(env.created_at)}};
}

void from_json(const json& j, EnvironmentSpec& env) {
  env.name = j.at("name").get<std::string>();
  env.image_ref = j.value("image_ref", std::string{});
  env.runtime_kind = parse_runtime_kind(j.value("runtime_kind", std::string{"builtin-test"}));
  env.launch_command = j.value("launch_command", std::vector<std::string>{});
  env.created_at = j.contains("created_at")
                       ? parse_timestamp(j.at("created_at").get<std::string>())
                       : Timestamp{};
}

void to_json(json& j, const FunctionSpec& fn) {
  j = json{{"name", fn.name},
           {"env_name", fn.env_name},
           {"code_ref", fn.code_ref},
           {"http_method", to_string(fn.http_method)},
           {"url_route", fn.url_route},
           {"min_warm", fn.min_warm},
           {"max_pool", fn.max_pool},
           {"idle_timeout", fn.idle_timeout_s},
           {"timeout", fn.timeout_s},
           {"created_at", format_timestamp(fn.created_at)}};
}

void from_json(const json& j, FunctionSpec& fn) {
  FunctionSpec defaults;
  fn.name = j.at("name").get<std::string>();
  fn.env_name = j.at("env_name").get<std::string>();
  fn.code_ref = j.value("code_ref", std::string{});
  fn.http_method = parse_http_method(j.value("http_method", std::string{"POST"}));
  fn.url_route = j.at("url_route").get<std::string>();
  fn.min_warm = j.value("min_warm", defaults.min_warm);
  fn.max_pool = j.value("max_pool", defaults.max_pool);
  fn.idle_timeout_s = j.value("idle_timeout", defaults.idle_timeout_s);
  fn.timeout_s = j.value("timeout", defaults.timeout_s);
  fn.created_at = j.contains("created_at")
                      ? parse_timestamp(j.at("created_at").get<std::string>())
                      : Timestamp{};
}

void to_json(json& j, const CatalogSnapshot& snap) {
  j = json{{"schema_version", snap.schema_version},
           {"environments", snap.environments},
           {"functions", snap.functions}};
}

bool is_valid_identifier(std::string_view name) {
  if (name.empty()) return false;
  auto lower_or_digit = [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); };
  if (!lower_or_digit(name.front())) return false;
  return std::all_of(name.begin() + 1, name.end(),
                     [&](char c) { return lower_or_digit(c) || c == '.' || c == '-'; });
}

void validate(const EnvironmentSpec& env) {
  if (!is_valid_identifier(env.name)) {
    throw Error(ErrorCode::InvalidSpec,
                fmt::format("name: '{}' must match [a-z0-9][a-z0-9.-]*", env.name));
  }
  if (env.runtime_kind == RuntimeKind::ExternalProcess) {
    if (env.launch_command.empty()) {
      throw Error(ErrorCode::InvalidSpec,
                  "launch_command: external-process environments need a command");
    }
    const bool has_port = std::any_of(env.launch_command.begin(), env.launch_command.end(),
                                      [](const std::string& t) { return t.find("{port}") != std::string::npos; });
    if (!has_port) {
      throw Error(ErrorCode::InvalidSpec, "launch_command: missing the {port} placeholder");
    }
  }
}

void validate(const FunctionSpec& fn) {
  if (!is_valid_identifier(fn.name)) {
    throw Error(ErrorCode::InvalidSpec,
                fmt::format("name: '{}' must match [a-z0-9][a-z0-9.-]*", fn.name));
  }
  if (!is_valid_identifier(fn.env_name)) {
    throw Error(ErrorCode::InvalidSpec,
                fmt::format("env_name: '{}' is not a valid environment name", fn.env_name));
  }
  const auto& route = fn.url_route;
  const bool slashed = route.size() >= 2 && route.front() == '/' && route.back() == '/';
  const bool clean = route.find_first_of(" \t\r\n?#") == std::string::npos;
  if (!slashed || !clean) {
    std::string core = route;
    core.erase(0, core.find_first_not_of('/'));
    while (!core.empty() && core.back() == '/') core.pop_back();
    throw Error(ErrorCode::InvalidSpec,
                fmt::format("url_route: '{}' must begin and end with '/' (try \"/{}/\")", route,
                            core.empty() ? fn.name : core));
  }
  if (fn.max_pool < 1) {
    throw Error(ErrorCode::InvalidSpec, "max_pool: must be at least 1");
  }
  if (fn.min_warm < 0 || fn.min_warm > fn.max_pool) {
    throw Error(ErrorCode::InvalidSpec,
                fmt::format("min_warm: {} must be within [0, max_pool={}]", fn.min_warm, fn.max_pool));
  }
  if (!(fn.idle_timeout_s >= 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "idle_timeout: must be non-negative");
  }
  if (!(fn.timeout_s > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "timeout: must be positive");
  }
}

CatalogSnapshot parse_snapshot(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::IoError,
                fmt::format("{}: corrupted catalog at byte {}: {}", source, e.byte, e.what()));
  }
  CatalogSnapshot snap;
  try {
    if (!doc.is_object()) {
      throw Error(ErrorCode::IoError, fmt::format("{}: catalog must be a JSON object", source));
    }
    snap.schema_version = doc.at("schema_version").get<int>();
    if (snap.schema_version != kCatalogSchemaVersion) {
      throw Error(ErrorCode::SchemaMismatch,
                  fmt::format("{}: unsupported schema_version {} (expected {})", source,
                              snap.schema_version, kCatalogSchemaVersion));
    }
    snap.environments = doc.at("environments").get<std::vector<EnvironmentSpec>>();
    snap.functions = doc.at("functions").get<std::vector<FunctionSpec>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, fmt::format("{}: malformed catalog: {}", source, e.what()));
  }
  std::set<std::string, std::less<>> env_names;
  for (const auto& env : snap.environments) env_names.insert(env.name);
  for (const auto& fn : snap.functions) {
    if (!env_names.contains(fn.env_name)) {
      throw Error(ErrorCode::UnknownEnvironment,
                  fmt::format("{}: function '{}' references missing environment '{}'", source,
                              fn.name, fn.env_name));
    }
  }
  return snap;
}

CatalogSnapshot load_snapshot(const fs::path& path) {
  return parse_snapshot(read_file(path), path.string());
}

void save_snapshot(const fs::path& path, const CatalogSnapshot& snapshot) {
  write_file_atomic(path, json(snapshot).dump(2) + "\n");
}

Catalog::Catalog(fs::path path) : path_(std::move(path)) {
  std::error_code ec;
  if (fs::exists(*path_, ec)) {
    adopt(load_snapshot(*path_));
    seen_mtime_ = stat_file();
  }
}

void Catalog::adopt(CatalogSnapshot snap) {
  std::map<std::string, EnvironmentSpec, std::less<>> envs;
  std::map<std::string, FunctionSpec, std::less<>> fns;
  std::set<std::string, std::less<>> routes;
  for (auto& env : snap.environments) {
    validate(env);
    const auto name = env.name;
    if (!envs.emplace(name, std::move(env)).second) {
      throw Error(ErrorCode::DuplicateName, fmt::format("duplicate environment '{}'", name));
    }
  }
  for (auto& fn : snap.functions) {
    validate(fn);
    if (!routes.insert(fn.url_route).second) {
      throw Error(ErrorCode::DuplicateRoute, fmt::format("duplicate route '{}'", fn.url_route));
    }
    const auto name = fn.name;
    if (!fns.emplace(name, std::move(fn)).second) {
      throw Error(ErrorCode::DuplicateName, fmt::format("duplicate function '{}'", name));
    }
  }
  envs_ = std::move(envs);
  fns_ = std::move(fns);
  ++generation_;
}

std::optional<fs::file_time_type> Catalog::stat_file() const {
  std::error_code ec;
  auto t = fs::last_write_time(*path_, ec);
  if (ec) return std::nullopt;
  return t;
}

void Catalog::persist_locked() {
  ++generation_;
  if (!path_) return;
  std::lock_guard io(io_mu_);
  CatalogSnapshot snap;
  for (const auto& [_, env] : envs_) snap.environments.push_back(env);
  for (const auto& [_, fn] : fns_) snap.functions.push_back(fn);
  save_snapshot(*path_, snap);
  seen_mtime_ = stat_file();
}

EnvironmentSpec Catalog::create_environment(EnvironmentSpec spec) {
  validate(spec);
  std::unique_lock lock(mu_);
  if (envs_.contains(spec.name)) {
    throw Error(ErrorCode::DuplicateName, fmt::format("duplicate environment '{}'", spec.name));
  }
  spec.created_at = utc_now();
  auto [it, _] = envs_.emplace(spec.name, spec);
  try {
    persist_locked();
  } catch (...) {
    envs_.erase(it);
    throw;
  }
  spdlog::info("catalog: created environment {}", spec.name);
  return spec;
}

EnvironmentSpec Catalog::get_environment(std::string_view name) const {
  std::shared_lock lock(mu_);
  auto it = envs_.find(name);
  if (it == envs_.end()) {
    throw Error(ErrorCode::NotFound, fmt::format("environment '{}' not found", name));
  }
  return it->second;
}

std::vector<EnvironmentSpec> Catalog::list_environments() const {
  std::shared_lock lock(mu_);
  std::vector<EnvironmentSpec> out;
  for (const auto& [_, env] : envs_) out.push_back(env);
  return out;
}

void Catalog::delete_environment(std::string_view name) {
  std::unique_lock lock(mu_);
  auto it = envs_.find(name);
  if (it == envs_.end()) {
    throw Error(ErrorCode::NotFound, fmt::format("environment '{}' not found", name));
  }
  for (const auto& [fn_name, fn] : fns_) {
    if (fn.env_name == name) {
      throw Error(ErrorCode::EnvironmentInUse,
                  fmt::format("environment '{}' is used by function '{}'", name, fn_name));
    }
  }
  auto saved = it->second;
  envs_.erase(it);
  try {
    persist_locked();
  } catch (...) {
    envs_.emplace(saved.name, saved);
    throw;
  }
}

FunctionSpec Catalog::create_function(FunctionSpec spec) {
  validate(spec);
  std::unique_lock lock(mu_);
  if (!envs_.contains(spec.env_name)) {
    throw Error(ErrorCode::UnknownEnvironment,
                fmt::format("environment '{}' does not exist", spec.env_name));
  }
  if (fns_.contains(spec.name)) {
    throw Error(ErrorCode::DuplicateName, fmt::format("duplicate function '{}'", spec.name));
  }
  for (const auto& [other, fn] : fns_) {
    if (fn.url_route == spec.url_route) {
      throw Error(ErrorCode::DuplicateRoute,
                  fmt::format("route '{}' is already used by '{}'", spec.url_route, other));
    }
  }
  spec.created_at = utc_now();
  auto [it, _] = fns_.emplace(spec.name, spec);
  try {
    persist_locked();
  } catch (...) {
    fns_.erase(it);
    throw;
  }
  spdlog::info("catalog: created function {} at {} {}", spec.name, to_string(spec.http_method),
               spec.url_route);
  return spec;
}

FunctionSpec Catalog::get_function(std::string_view name) const {
  if (auto fn = find_function(name)) return *fn;
  throw Error(ErrorCode::NotFound, fmt::format("function '{}' not found", name));
}

std::optional<FunctionSpec> Catalog::find_function(std::string_view name) const {
  std::shared_lock lock(mu_);
  auto it = fns_.find(name);
  if (it == fns_.end()) return std::nullopt;
  return it->second;
}

std::vector<FunctionSpec> Catalog::list_functions() const {
  std::shared_lock lock(mu_);
  std::vector<FunctionSpec> out;
  for (const auto& [_, fn] : fns_) out.push_back(fn);
  return out;
}

void Catalog::delete_function(std::string_view name) {
  std::unique_lock lock(mu_);
  auto it = fns_.find(name);
  if (it == fns_.end()) {
    throw Error(ErrorCode::NotFound, fmt::format("function '{}' not found", name));
  }
  auto saved = it->second;
  fns_.erase(it);
  try {
    persist_locked();
  } catch (...) {
    fns_.emplace(saved.name, saved);
    throw;
  }
}

CatalogSnapshot Catalog::snapshot() const {
  std::shared_lock lock(mu_);
  CatalogSnapshot snap;
  for (const auto& [_, env] : envs_) snap.environments.push_back(env);
  for (const auto& [_, fn] : fns_) snap.functions.push_back(fn);
  return snap;
}

void Catalog::save(const fs::path& path) const {
  save_snapshot(path, snapshot());
}

bool Catalog::refresh() {
  if (!path_) return false;
  const auto mtime = stat_file();
  {
    std::shared_lock lock(mu_);
    if (mtime == seen_mtime_) return false;
  }
  std::unique_lock lock(mu_);
  if (!mtime) {
    envs_.clear();
    fns_.clear();
    seen_mtime_.reset();
    ++generation_;
    return true;
  }
  adopt(load_snapshot(*path_));
  seen_mtime_ = mtime;
  spdlog::info("catalog: reloaded {}", path_->string());
  return true;
}

std::uint64_t Catalog::generation() const {
  std::shared_lock lock(mu_);
  return generation_;
}

}  // namespace faasmesh
