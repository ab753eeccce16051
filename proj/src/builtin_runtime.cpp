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

#include "faasmesh/builtin_runtime.hpp"

#include <chrono>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "faasmesh/errors.hpp"
#include "faasmesh/grid.hpp"
#include "faasmesh/util.hpp"

namespace faasmesh::runtime {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kTextType = "text/plain; charset=utf-8";

std::string require_string(const json& params, const char* key) {
  if (!params.contains(key)) {
    throw std::runtime_error(fmt::format("MissingParameter: {}", key));
  }
  const auto& v = params.at(key);
  if (!v.is_string()) {
    throw std::runtime_error(fmt::format("InvalidParameter: {} must be a string", key));
  }
  return v.get<std::string>();
}

double number_param(const json& params, const char* key, std::optional<double> fallback) {
  if (!params.contains(key)) {
    if (fallback) return *fallback;
    throw std::runtime_error(fmt::format("MissingParameter: {}", key));
  }
  const auto& v = params.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    std::size_t used = 0;
    try {
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  throw std::runtime_error(fmt::format("InvalidParameter: {} must be a number", key));
}

// `obs1.ms` -> `obs1`, `/data/sub/x.ms` -> `sub/x`
std::string data_stem(std::string_view ref) {
  fs::path p(strip_data_prefix(ref));
  return (p.parent_path() / p.stem()).generic_string();
}

grid::GridImage read_input(HandlerContext& ctx, const std::string& ref) {
  try {
    return grid::read(resolve_data_path(ctx.data_root, ref));
  } catch (const Error& e) {
    throw std::runtime_error(e.what());
  }
}

HandlerOutput write_output(HandlerContext& ctx, const std::string& rel,
                           const grid::GridImage& img) {
  grid::write(resolve_data_path(ctx.data_root, rel), img);
  return {"/data/" + rel, std::string(kTextType)};
}

HandlerOutput echo(HandlerContext& ctx) {
  return {std::string(ctx.raw_body), "application/json"};
}

HandlerOutput sleep_ms(HandlerContext& ctx) {
  const double ms = number_param(ctx.params, "ms", 100.0);
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
  return {fmt::format("slept {}ms", ms), std::string(kTextType)};
}

HandlerOutput counter(HandlerContext& ctx) {
  return {std::to_string(++ctx.state.counter), std::string(kTextType)};
}

HandlerOutput fail(HandlerContext& ctx) {
  throw std::runtime_error(ctx.params.value("message", std::string("handler failure")));
}

HandlerOutput mock_flag(HandlerContext& ctx) {
  const auto input = require_string(ctx.params, "Input-MS");
  const double threshold = number_param(ctx.params, "threshold", std::nullopt);
  auto img = grid::flag(read_input(ctx, input), threshold);
  return write_output(ctx, data_stem(input) + "-flagged", img);
}

HandlerOutput mock_calibrate(HandlerContext& ctx) {
  const auto input = require_string(ctx.params, "Input-MS");
  const double gain = number_param(ctx.params, "gain", std::nullopt);
  auto img = grid::calibrate(read_input(ctx, input), gain);
  return write_output(ctx, data_stem(input) + "-cal", img);
}

// Extra keys are accepted and ignored, as the real task takes arbitrary
// passthrough options.
HandlerOutput mock_tclean(HandlerContext& ctx) {
  const auto input = require_string(ctx.params, "Input-MS");
  const auto output = strip_data_prefix(require_string(ctx.params, "Output-MS"));
  auto img = grid::gaussian_blur(read_input(ctx, input));
  return write_output(ctx, output, img);
}

HandlerOutput mock_wsclean(HandlerContext& ctx) {
  const auto input = require_string(ctx.params, "Input-MS");
  const auto rel = data_stem(input) + "-image.fits";
  write_file_atomic(resolve_data_path(ctx.data_root, rel),
                    fmt::format("mock-wsclean image of /data/{}\n", strip_data_prefix(input)));
  return {"/data/" + rel, std::string(kTextType)};
}

HandlerOutput mock_blur(HandlerContext& ctx) {
  const auto file = require_string(ctx.params, "file");
  auto img = grid::gaussian_blur(read_input(ctx, file));
  const std::string out_rel = data_stem(file) + "-blur";
  grid::write(resolve_data_path(ctx.data_root, out_rel), img);
  return {grid::format(img), std::string(grid::kContentType)};
}

const std::map<std::string, Handler, std::less<>>& registry() {
  static const std::map<std::string, Handler, std::less<>> handlers = {
      {"echo", echo},
      {"sleep-ms", sleep_ms},
      {"counter", counter},
      {"fail", fail},
      {"mock-flag", mock_flag},
      {"mock-calibrate", mock_calibrate},
      {"mock-tclean", mock_tclean},
      {"mock-wsclean", mock_wsclean},
      {"mock-blur", mock_blur},
  };
  return handlers;
}

}  // namespace

std::vector<std::string> builtin_handler_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : registry()) names.push_back(name);
  return names;
}

const Handler* find_builtin_handler(std::string_view name) {
  auto it = registry().find(name);
  return it == registry().end() ? nullptr : &it->second;
}

std::optional<std::string> resolve_builtin_handler(std::string_view code_ref) {
  constexpr std::string_view kPrefix = "builtin:";
  if (code_ref.substr(0, kPrefix.size()) == kPrefix) code_ref.remove_prefix(kPrefix.size());
  const fs::path p(code_ref);
  const std::string file = p.filename().string();
  const std::string stem = p.stem().string();
  for (const auto& candidate : {file, stem, "mock-" + stem}) {
    if (find_builtin_handler(candidate)) return candidate;
  }
  return std::nullopt;
}

fs::path resolve_data_path(const fs::path& data_root, std::string_view ref) {
  const fs::path rel(strip_data_prefix(ref));
  if (rel.empty() || rel.is_absolute()) {
    throw std::runtime_error(fmt::format("InvalidParameter: '{}' is not a data path", ref));
  }
  for (const auto& part : rel) {
    if (part == "..") {
      throw std::runtime_error(fmt::format("InvalidParameter: '{}' escapes the data root", ref));
    }
  }
  return data_root / rel;
}

struct BuiltinRuntimeHost::Impl {
  fs::path workdir;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  std::mutex mu;
  std::optional<std::string> code_path;
  const Handler* handler = nullptr;
  HostState state;

  void specialize(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      res.status = 500;
      res.set_content(fmt::format("bad specialize request: {}", e.what()), kTextType.data());
      return;
    }
    const auto path = body.value("code_path", std::string{});
    std::lock_guard lock(mu);
    if (code_path) {
      if (*code_path == path) {
        res.status = 200;
        res.set_content("specialized", kTextType.data());
      } else {
        res.status = 500;
        res.set_content(fmt::format("already specialized with {}", *code_path), kTextType.data());
      }
      return;
    }
    const auto name = resolve_builtin_handler(path);
    if (!name) {
      res.status = 500;
      res.set_content(fmt::format("no builtin handler for '{}'", path), kTextType.data());
      return;
    }
    code_path = path;
    handler = find_builtin_handler(*name);
    res.status = 200;
    res.set_content("specialized", kTextType.data());
  }

  void invoke(const httplib::Request& req, httplib::Response& res) {
    const Handler* h = nullptr;
    {
      std::lock_guard lock(mu);
      h = handler;
    }
    if (!h) {
      res.status = 500;
      res.set_content("not specialized", kTextType.data());
      return;
    }
    try {
      const json params = req.body.empty() ? json::object() : json::parse(req.body);
      HandlerContext ctx{req.body, params, workdir, state};
      auto out = (*h)(ctx);
      res.status = 200;
      res.set_content(std::move(out.body), out.content_type);
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(e.what(), kTextType.data());
    }
  }
};

BuiltinRuntimeHost::BuiltinRuntimeHost(fs::path workdir) : impl_(std::make_unique<Impl>()) {
  impl_->workdir = std::move(workdir);
  auto& svr = impl_->server;
  svr.new_task_queue = [] { return new httplib::ThreadPool(2); };
  svr.set_post_routing_handler([](const httplib::Request& req, httplib::Response& res) {
    if (req.has_header("X-Faas-Request-Id")) {
      res.set_header("X-Faas-Request-Id", req.get_header_value("X-Faas-Request-Id"));
    }
  });
  svr.Post("/specialize", [this](const httplib::Request& req, httplib::Response& res) {
    impl_->specialize(req, res);
  });
  svr.Post("/", [this](const httplib::Request& req, httplib::Response& res) {
    impl_->invoke(req, res);
  });
  impl_->port = svr.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) {
    throw Error(ErrorCode::SpawnFailure, "builtin runtime could not bind a loopback port");
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

BuiltinRuntimeHost::~BuiltinRuntimeHost() { stop(); }

int BuiltinRuntimeHost::port() const { return impl_->port; }

void BuiltinRuntimeHost::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace faasmesh::runtime
