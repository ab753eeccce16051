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

#include "faasmesh/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "faasmesh/errors.hpp"
#include "faasmesh/util.hpp"

namespace faasmesh {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kText = "text/plain; charset=utf-8";

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::string find_header(const HeaderList& headers, std::string_view name) {
  for (const auto& [k, v] : headers) {
    if (iequals(k, name)) return v;
  }
  return {};
}

HttpResponse text_response(int status, std::string body) {
  HttpResponse r;
  r.status = status;
  r.body = std::move(body);
  r.content_type = std::string(kText);
  return r;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::vector<std::string> extract_data_refs(const json& parameters, const GatewayConfig& config) {
  std::vector<std::string> refs;
  if (!parameters.is_object()) return refs;
  for (const auto& [key, value] : parameters.items()) {
    if (!value.is_string()) continue;
    const bool by_name = std::find(config.data_key_names.begin(), config.data_key_names.end(),
                                   key) != config.data_key_names.end();
    const bool by_suffix = std::any_of(config.data_key_suffixes.begin(), config.data_key_suffixes.end(),
                                       [&](const std::string& s) { return ends_with(key, s); });
    if (by_name || by_suffix) refs.push_back(strip_data_prefix(value.get<std::string>()));
  }
  return refs;
}

RouteTable build_route_table(const CatalogSnapshot& snapshot) {
  RouteTable table;
  for (const auto& fn : snapshot.functions) {
    auto [it, inserted] = table.emplace(fn.url_route, fn);
    if (!inserted) {
      throw Error(ErrorCode::RouteConflict,
                  fmt::format("route '{}' claimed by both '{}' and '{}'", fn.url_route,
                              it->second.name, fn.name));
    }
  }
  return table;
}

std::string HttpResponse::header(std::string_view name) const {
  return find_header(headers, name);
}

struct Gateway::Server {
  httplib::Server http;
  std::thread thread;
};

Gateway::Gateway(Catalog& catalog, Planner& planner, Executor& executor, GatewayConfig config)
    : catalog_(catalog), planner_(planner), executor_(executor), config_(std::move(config)) {
  std::random_device rd;
  id_prefix_ = fmt::format("{:08x}", rd());
  register_routes();
}

Gateway::~Gateway() { stop(); }

void Gateway::register_routes() {
  const auto generation = catalog_.generation();
  auto table = build_route_table(catalog_.snapshot());
  std::unique_lock lk(routes_mu_);
  routes_ = std::move(table);
  routes_generation_ = generation;
  for (const auto& [route, fn] : routes_) {
    spdlog::debug("gateway: {} {} -> {}", to_string(fn.http_method), route, fn.name);
  }
}

void Gateway::refresh_routes() {
  if (config_.reload_catalog) {
    try {
      catalog_.refresh();
    } catch (const std::exception& e) {
      spdlog::warn("gateway: keeping previous catalog, reload failed: {}", e.what());
    }
  }
  {
    std::shared_lock lk(routes_mu_);
    if (routes_generation_ == catalog_.generation()) return;
  }
  register_routes();
}

void Gateway::prewarm() {
  std::vector<FunctionSpec> fns;
  {
    std::shared_lock lk(routes_mu_);
    for (const auto& [_, fn] : routes_) {
      if (fn.min_warm > 0) fns.push_back(fn);
    }
  }
  for (const auto& fn : fns) {
    try {
      executor_.ensure_warm(fn);
    } catch (const std::exception& e) {
      spdlog::warn("gateway: prewarm of {} failed: {}", fn.name, e.what());
    }
  }
}

std::vector<std::string> Gateway::routes() const {
  std::shared_lock lk(routes_mu_);
  std::vector<std::string> out;
  for (const auto& [route, _] : routes_) out.push_back(route);
  return out;
}

std::string Gateway::next_request_id() {
  return fmt::format("{}-{:06d}", id_prefix_, ++id_counter_);
}

InvocationResult Gateway::dispatch(const FunctionSpec& fn, const json& parameters,
                                   std::string request_id) {
  InvocationRequest req;
  req.request_id = request_id.empty() ? next_request_id() : std::move(request_id);
  req.function_name = fn.name;
  req.parameters = parameters;
  req.data_refs = extract_data_refs(parameters, config_);
  req.received_at = utc_now();

  std::vector<std::string> outputs;
  for (const auto& ref : req.data_refs) {
    if (!planner_.knows(ref)) outputs.push_back(ref);
  }

  const auto decision = planner_.plan(req.data_refs);
  struct LoadSlot {
    Planner& planner;
    const std::string& node;
    ~LoadSlot() {
      try {
        planner.update_load(node, -1);
      } catch (const std::exception& e) {
        spdlog::error("gateway: load accounting: {}", e.what());
      }
    }
  } slot{planner_, decision.node_id};

  spdlog::info("gateway: [{}] {} -> node {} (cost {:.6g})", req.request_id, fn.name,
               decision.node_id, decision.total_cost);

  auto lease = executor_.acquire(fn);
  auto result = executor_.invoke(lease, req);
  executor_.release(lease);
  result.node_id = decision.node_id;

  if (result.ok()) {
    if (result.is_text() && result.output.rfind("/data/", 0) == 0) {
      outputs.push_back(strip_data_prefix(result.output));
    }
    std::set<std::string> seen;
    for (const auto& id : outputs) {
      if (id.empty() || !seen.insert(id).second) continue;
      std::error_code ec;
      const auto size = fs::file_size(executor_.data_root() / id, ec);
      planner_.add_replica(id, decision.node_id, ec ? 0 : size);
    }
  }
  spdlog::info("gateway: [{}] {} {} cold={} {:.1f}ms", req.request_id, fn.name,
               to_string(result.status), result.cold_start, result.duration_ms);
  return result;
}

InvocationResult Gateway::invoke(const std::string& function_name, const json& parameters) {
  InvocationResult result;
  result.request_id = next_request_id();
  try {
    return dispatch(catalog_.get_function(function_name), parameters, result.request_id);
  } catch (const Error& e) {
    result.status = InvocationStatus::PlatformError;
    result.output = fmt::format("{}: {}", to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    result.status = InvocationStatus::PlatformError;
    result.output = e.what();
  }
  return result;
}

HttpResponse Gateway::handle_request(std::string_view method, std::string_view path,
                                     const HeaderList& headers, std::string_view body) {
  refresh_routes();

  if (path == "/healthz" || path == "/catalog") {
    if (method != "GET") {
      auto r = text_response(405, "method not allowed");
      r.headers.emplace_back("Allow", "GET");
      return r;
    }
    if (path == "/healthz") return text_response(200, "ok");
    HttpResponse r;
    r.body = json(catalog_.snapshot()).dump(2);
    r.content_type = "application/json";
    return r;
  }

  FunctionSpec fn;
  {
    std::shared_lock lk(routes_mu_);
    auto it = routes_.find(path);
    if (it == routes_.end()) return text_response(404, fmt::format("no function at {}", path));
    fn = it->second;
  }
  if (method != to_string(fn.http_method)) {
    auto r = text_response(405, fmt::format("{} expects {}", fn.url_route, to_string(fn.http_method)));
    r.headers.emplace_back("Allow", std::string(to_string(fn.http_method)));
    return r;
  }

  const std::string request_id = next_request_id();
  json params = json::object();
  const auto content_type = find_header(headers, "Content-Type");
  const bool json_declared = content_type.rfind("application/json", 0) == 0;
  if (json_declared || !body.empty()) {
    try {
      params = json::parse(body);
    } catch (const json::parse_error& e) {
      auto r = text_response(400, fmt::format("malformed JSON body: {}", e.what()));
      r.headers.emplace_back("X-Faas-Request-Id", request_id);
      return r;
    }
    if (!params.is_object()) {
      auto r = text_response(400, "request body must be a JSON object");
      r.headers.emplace_back("X-Faas-Request-Id", request_id);
      return r;
    }
  }

  HttpResponse r;
  r.headers.emplace_back("X-Faas-Request-Id", request_id);
  InvocationResult result;
  try {
    result = dispatch(fn, params, request_id);
  } catch (const Error& e) {
    const bool saturated =
        e.code() == ErrorCode::CapacityExhausted || e.code() == ErrorCode::NoFeasibleNode;
    r.status = saturated ? 503 : 500;
    r.body = fmt::format("{}: {}", to_string(e.code()), e.what());
    r.content_type = std::string(kText);
    spdlog::warn("gateway: [{}] {} failed: {}", request_id, fn.name, r.body);
    return r;
  } catch (const std::exception& e) {
    r.status = 500;
    r.body = e.what();
    r.content_type = std::string(kText);
    return r;
  }

  switch (result.status) {
    case InvocationStatus::Ok:
      r.status = 200;
      r.content_type = result.content_type;
      break;
    case InvocationStatus::HandlerError:
      r.status = 502;
      r.content_type = std::string(kText);
      break;
    case InvocationStatus::PlatformError:
      r.status = 500;
      r.content_type = std::string(kText);
      break;
  }
  r.body = std::move(result.output);
  r.headers.emplace_back("X-Faas-Node", result.node_id);
  r.headers.emplace_back("X-Faas-Cold-Start", result.cold_start ? "true" : "false");
  r.headers.emplace_back("X-Faas-Duration-Ms", fmt::format("{:.3f}", result.duration_ms));
  return r;
}

int Gateway::start(const std::string& host, int port) {
  stop();
  server_ = std::make_unique<Server>();
  auto& http = server_->http;
  http.new_task_queue = [] { return new httplib::ThreadPool(64); };
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    HeaderList headers(req.headers.begin(), req.headers.end());
    auto out = handle_request(req.method, req.path, headers, req.body);
    res.status = out.status;
    for (const auto& [k, v] : out.headers) res.set_header(k, v);
    res.set_content(std::move(out.body), out.content_type);
  };
  http.Get(".*", handler);
  http.Post(".*", handler);
  http.Put(".*", handler);
  http.Delete(".*", handler);
  http.Patch(".*", handler);

  const int bound = port == 0 ? http.bind_to_any_port(host) : (http.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) {
    server_.reset();
    throw Error(ErrorCode::IoError, fmt::format("cannot listen on {}:{}", host, port));
  }
  server_->thread = std::thread([this] { server_->http.listen_after_bind(); });
  http.wait_until_ready();
  spdlog::info("gateway: listening on {}:{}", host, bound);
  return bound;
}

void Gateway::stop() {
  if (!server_) return;
  server_->http.stop();
  if (server_->thread.joinable()) server_->thread.join();
  server_.reset();
}

}  // namespace faasmesh
