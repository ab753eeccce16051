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

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "faasmesh/catalog.hpp"
#include "faasmesh/executor.hpp"
#include "faasmesh/invocation.hpp"
#include "faasmesh/planner.hpp"

namespace faasmesh {

struct GatewayConfig {
  // A parameter names a data item when its key ends with one of the
  // suffixes or equals one of the names.
  std::vector<std::string> data_key_suffixes{"-MS"};
  std::vector<std::string> data_key_names{"file"};
  // Re-read the catalog file before routing when it changed on disk.
  bool reload_catalog = true;
};

/// Values of data-bearing keys, with any `/data/` prefix stripped. Only
/// string values count.
std::vector<std::string> extract_data_refs(const nlohmann::json& parameters,
                                           const GatewayConfig& config = {});

using RouteTable = std::map<std::string, FunctionSpec, std::less<>>;

/// Throws Error(RouteConflict) when two functions claim the same route.
RouteTable build_route_table(const CatalogSnapshot& snapshot);

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "text/plain; charset=utf-8";
  std::vector<std::pair<std::string, std::string>> headers;

  std::string header(std::string_view name) const;
};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

/// HTTP front door. Every catalog function is served at its url_route; the
/// management endpoints are `GET /healthz` and `GET /catalog`.
class Gateway final : public Invoker {
 public:
  Gateway(Catalog& catalog, Planner& planner, Executor& executor, GatewayConfig config = {});
  ~Gateway() override;

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Rebuilds the route table from the catalog.
  void register_routes();

  /// Spawns min_warm runtimes for every routed function.
  void prewarm();

  HttpResponse handle_request(std::string_view method, std::string_view path,
                              const HeaderList& headers, std::string_view body);

  /// Plans, executes and records one invocation. Throws Error for failures
  /// that happen before a runtime is reached (CapacityExhausted,
  /// NoFeasibleNode, SpawnFailure).
  InvocationResult dispatch(const FunctionSpec& fn, const nlohmann::json& parameters,
                            std::string request_id = {});

  InvocationResult invoke(const std::string& function_name,
                          const nlohmann::json& parameters) override;

  std::vector<std::string> routes() const;

  /// Binds and serves on a background thread; port 0 picks a free one.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  void stop();

  std::string next_request_id();

 private:
  void refresh_routes();

  Catalog& catalog_;
  Planner& planner_;
  Executor& executor_;
  GatewayConfig config_;

  mutable std::shared_mutex routes_mu_;
  RouteTable routes_;
  std::uint64_t routes_generation_ = 0;

  std::string id_prefix_;
  std::atomic<std::uint64_t> id_counter_{0};

  struct Server;
  std::unique_ptr<Server> server_;
};

}  // namespace faasmesh
