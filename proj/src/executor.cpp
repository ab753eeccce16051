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

#include "faasmesh/executor.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "faasmesh/builtin_runtime.hpp"
#include "faasmesh/errors.hpp"

extern char** environ;

namespace faasmesh {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace std::chrono_literals;

std::string_view to_string(HandleState state) {
  switch (state) {
    case HandleState::Starting: return "starting";
    case HandleState::Specialized: return "specialized";
    case HandleState::Busy: return "busy";
    case HandleState::Idle: return "idle";
    case HandleState::Terminated: return "terminated";
  }
  return "unknown";
}

std::string_view to_string(InvocationStatus status) {
  switch (status) {
    case InvocationStatus::Ok: return "ok";
    case InvocationStatus::HandlerError: return "handler_error";
    case InvocationStatus::PlatformError: return "platform_error";
  }
  return "unknown";
}

namespace {

class BuiltinProcess final : public RuntimeProcess {
 public:
  explicit BuiltinProcess(const fs::path& workdir) : host_(workdir) {}
  int port() const override { return host_.port(); }
  bool exited() override { return false; }
  void terminate() override { host_.stop(); }

 private:
  runtime::BuiltinRuntimeHost host_;
};

class ChildProcess final : public RuntimeProcess {
 public:
  ChildProcess(pid_t pid, int port) : pid_(pid), port_(port) {}
  ~ChildProcess() override { terminate(); }

  int port() const override { return port_; }

  bool exited() override {
    if (reaped_) return true;
    int status = 0;
    if (::waitpid(pid_, &status, WNOHANG) == pid_) {
      reaped_ = true;
      exit_status_ = status;
    }
    return reaped_;
  }

  void terminate() override {
    if (exited()) return;
    ::kill(-pid_, SIGTERM);
    for (int i = 0; i < 100 && !exited(); ++i) std::this_thread::sleep_for(20ms);
    if (!exited()) {
      ::kill(-pid_, SIGKILL);
      int status = 0;
      ::waitpid(pid_, &status, 0);
      reaped_ = true;
    }
  }

 private:
  pid_t pid_;
  int port_;
  bool reaped_ = false;
  int exit_status_ = 0;
};

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

}  // namespace

std::vector<std::string> substitute_launch_command(const std::vector<std::string>& command_template,
                                                   int port, const fs::path& workdir) {
  std::vector<std::string> argv;
  argv.reserve(command_template.size());
  for (const auto& token : command_template) {
    argv.push_back(
        replace_all(replace_all(token, "{port}", std::to_string(port)), "{workdir}", workdir.string()));
  }
  return argv;
}

std::unique_ptr<RuntimeProcess> spawn_external_host(const std::vector<std::string>& command_template,
                                                    int port, const fs::path& workdir) {
  const auto args = substitute_launch_command(command_template, port, workdir);
  if (args.empty()) throw Error(ErrorCode::SpawnFailure, "empty launch command");

  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  std::vector<std::string> env_store;
  for (char** e = environ; *e; ++e) {
    if (std::strncmp(*e, "FAAS_RUNTIME_PORT=", 18) != 0) env_store.emplace_back(*e);
  }
  env_store.push_back(fmt::format("FAAS_RUNTIME_PORT={}", port));
  std::vector<char*> envp;
  for (auto& e : env_store) envp.push_back(e.data());
  envp.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addchdir_np(&actions, workdir.c_str());
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, argv[0], &actions, &attr, argv.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    throw Error(ErrorCode::SpawnFailure,
                fmt::format("cannot start '{}': {}", args.front(), std::strerror(rc)));
  }
  spdlog::debug("executor: spawned pid {} on port {}", pid, port);
  return std::make_unique<ChildProcess>(pid, port);
}

struct Executor::Handle {
  std::string id;
  std::string function_name;
  std::string env_name;
  std::string code_ref;
  std::unique_ptr<RuntimeProcess> process;
  HandleState state = HandleState::Starting;
  bool leased = false;
  Clock::time_point last_used{};
  std::uint64_t invocations = 0;
  std::atomic<int> inflight{0};

  RuntimeHandle view() const {
    return RuntimeHandle{id,    function_name, env_name,   fmt::format("127.0.0.1:{}", process->port()),
                         state, last_used,     invocations};
  }
};

struct Executor::Pool {
  std::vector<std::shared_ptr<Handle>> handles;
  std::size_t starting = 0;
  std::size_t peak_live = 0;
  std::uint64_t spawned_total = 0;
  FunctionSpec spec;
  std::condition_variable cv;

  std::size_t live() const { return handles.size() + starting; }
};

Executor::Lease::Lease(Lease&& other) noexcept
    : owner_(std::exchange(other.owner_, nullptr)),
      handle_(std::move(other.handle_)),
      cold_(other.cold_) {}

Executor::Lease& Executor::Lease::operator=(Lease&& other) noexcept {
  if (this != &other) {
    if (owner_ && handle_) owner_->release(*this);
    owner_ = std::exchange(other.owner_, nullptr);
    handle_ = std::move(other.handle_);
    cold_ = other.cold_;
  }
  return *this;
}

Executor::Lease::~Lease() {
  if (owner_ && handle_) owner_->release(*this);
}

RuntimeHandle Executor::Lease::handle() const {
  return handle_ ? handle_->view() : RuntimeHandle{};
}

Executor::Executor(const Catalog& catalog, ExecutorConfig config)
    : catalog_(catalog), config_(std::move(config)) {
  clock_ = config_.clock ? config_.clock : &steady_;
  std::error_code ec;
  fs::create_directories(config_.data_root, ec);
  config_.data_root = fs::absolute(config_.data_root).lexically_normal();
  if (config_.reap_interval.count() > 0) {
    reaper_ = std::thread([this] { reaper_loop(); });
  }
}

Executor::~Executor() { shutdown(); }

void Executor::shutdown() {
  {
    std::lock_guard lk(reaper_mu_);
    stopping_ = true;
  }
  reaper_cv_.notify_all();
  if (reaper_.joinable()) reaper_.join();

  std::vector<std::shared_ptr<Handle>> doomed;
  {
    std::lock_guard lk(mu_);
    for (auto& [_, pool] : pools_) {
      for (auto& h : pool->handles) {
        if (!h->leased) {
          h->state = HandleState::Terminated;
          doomed.push_back(h);
        }
      }
      std::erase_if(pool->handles, [](const auto& h) { return !h->leased; });
    }
  }
  for (auto& h : doomed) h->process->terminate();
}

void Executor::reaper_loop() {
  std::unique_lock lk(reaper_mu_);
  while (!stopping_) {
    reaper_cv_.wait_for(lk, config_.reap_interval, [this] { return stopping_; });
    if (stopping_) break;
    lk.unlock();
    try {
      if (auto n = reap_idle(clock_->now()); n > 0) {
        spdlog::info("executor: reaped {} idle runtime(s)", n);
      }
    } catch (const std::exception& e) {
      spdlog::warn("executor: reap failed: {}", e.what());
    }
    lk.lock();
  }
}

Executor::Pool& Executor::pool_locked(const std::string& name) {
  auto it = pools_.find(name);
  if (it == pools_.end()) it = pools_.emplace(name, std::make_unique<Pool>()).first;
  return *it->second;
}

void Executor::remove_locked(Pool& pool, const std::shared_ptr<Handle>& handle) {
  handle->state = HandleState::Terminated;
  std::erase(pool.handles, handle);
  pool.cv.notify_one();
}

std::shared_ptr<Executor::Handle> Executor::spawn_specialized(const FunctionSpec& fn,
                                                              const EnvironmentSpec& env) {
  auto handle = std::make_shared<Handle>();
  handle->function_name = fn.name;
  handle->env_name = env.name;
  handle->code_ref = fn.code_ref;

  if (env.runtime_kind == RuntimeKind::BuiltinTest) {
    handle->process = std::make_unique<BuiltinProcess>(config_.data_root);
  } else {
    handle->process = spawn_external_host(env.launch_command, pick_free_port(), config_.data_root);
  }

  std::string code_path = fn.code_ref;
  std::error_code ec;
  if (env.runtime_kind == RuntimeKind::ExternalProcess && fs::exists(code_path, ec)) {
    code_path = fs::absolute(code_path).string();
  }
  const std::string body = json{{"code_path", code_path}, {"entry", "main"}}.dump();

  const auto deadline = std::chrono::steady_clock::now() + config_.spawn_timeout;
  httplib::Client client("127.0.0.1", handle->process->port());
  client.set_connection_timeout(1s);
  client.set_read_timeout(config_.spawn_timeout);
  for (;;) {
    auto res = client.Post("/specialize", body, "application/json");
    if (res) {
      if (res->status == 200) break;
      handle->process->terminate();
      throw Error(ErrorCode::SpawnFailure,
                  fmt::format("specialize of '{}' failed ({}): {}", fn.name, res->status, res->body));
    }
    if (handle->process->exited()) {
      throw Error(ErrorCode::SpawnFailure,
                  fmt::format("runtime host for '{}' exited during startup", fn.name));
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      handle->process->terminate();
      throw Error(ErrorCode::SpawnFailure,
                  fmt::format("runtime host for '{}' not ready within {} ms", fn.name,
                              config_.spawn_timeout.count()));
    }
    std::this_thread::sleep_for(20ms);
  }
  handle->state = HandleState::Specialized;
  return handle;
}

Executor::Lease Executor::acquire(const FunctionSpec& fn) {
  const EnvironmentSpec env = catalog_.get_environment(fn.env_name);
  const auto deadline = std::chrono::steady_clock::now() + config_.queue_timeout;
  std::vector<std::shared_ptr<Handle>> stale;

  std::unique_lock lk(mu_);
  Pool& pool = pool_locked(fn.name);
  pool.spec = fn;
  for (;;) {
    // Runtimes specialized with an older definition of the function go away.
    for (auto& h : pool.handles) {
      if (!h->leased && (h->code_ref != fn.code_ref || h->env_name != fn.env_name)) {
        h->state = HandleState::Terminated;
        stale.push_back(h);
      }
    }
    std::erase_if(pool.handles, [](const auto& h) { return h->state == HandleState::Terminated; });

    std::shared_ptr<Handle> best;
    for (auto& h : pool.handles) {
      if (!h->leased && (!best || h->last_used > best->last_used)) best = h;
    }
    if (best) {
      best->leased = true;
      lk.unlock();
      for (auto& h : stale) h->process->terminate();
      return Lease(this, best, false);
    }
    if (pool.live() < static_cast<std::size_t>(fn.max_pool)) break;
    if (pool.cv.wait_until(lk, deadline) == std::cv_status::timeout) {
      bool idle_available = std::any_of(pool.handles.begin(), pool.handles.end(),
                                        [](const auto& h) { return !h->leased; });
      if (!idle_available && pool.live() >= static_cast<std::size_t>(fn.max_pool)) {
        lk.unlock();
        for (auto& h : stale) h->process->terminate();
        throw Error(ErrorCode::CapacityExhausted,
                    fmt::format("all {} runtime(s) of '{}' busy for {} ms", fn.max_pool, fn.name,
                                config_.queue_timeout.count()));
      }
    }
  }

  ++pool.starting;
  pool.peak_live = std::max(pool.peak_live, pool.live());
  lk.unlock();
  for (auto& h : stale) h->process->terminate();

  std::shared_ptr<Handle> handle;
  try {
    handle = spawn_specialized(fn, env);
  } catch (...) {
    std::lock_guard relock(mu_);
    --pool.starting;
    pool.cv.notify_one();
    throw;
  }

  lk.lock();
  --pool.starting;
  handle->id = fmt::format("{}-{}", fn.name, ++next_handle_);
  handle->leased = true;
  handle->last_used = clock_->now();
  pool.handles.push_back(handle);
  ++pool.spawned_total;
  spdlog::info("executor: cold start {} on port {}", handle->id, handle->process->port());
  return Lease(this, handle, true);
}

InvocationResult Executor::invoke(Lease& lease, const InvocationRequest& request) {
  InvocationResult result;
  result.request_id = request.request_id;
  result.cold_start = lease.cold_;
  auto handle = lease.handle_;
  if (!handle) {
    result.status = InvocationStatus::PlatformError;
    result.output = "invalid lease";
    return result;
  }
  FunctionSpec fn;
  {
    std::lock_guard lk(mu_);
    if (handle->state == HandleState::Terminated) {
      result.status = InvocationStatus::PlatformError;
      result.output = "runtime terminated";
      return result;
    }
    handle->state = HandleState::Busy;
    fn = pool_locked(handle->function_name).spec;
  }

  const int concurrent = handle->inflight.fetch_add(1) + 1;
  for (int seen = max_concurrent_.load(); concurrent > seen;) {
    if (max_concurrent_.compare_exchange_weak(seen, concurrent)) break;
  }

  const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::duration<double>(fn.timeout_s));
  httplib::Client client("127.0.0.1", handle->process->port());
  client.set_connection_timeout(5s);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers{{"X-Faas-Request-Id", request.request_id}};

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post("/", headers, request.parameters.dump(), "application/json");
  const auto elapsed = std::chrono::steady_clock::now() - started;
  result.duration_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  handle->inflight.fetch_sub(1);

  bool kill = false;
  if (!res) {
    kill = true;
    result.status = InvocationStatus::PlatformError;
    if (elapsed + 50ms >= timeout) {
      result.output = fmt::format("Timeout: '{}' exceeded {} ms", handle->function_name, timeout.count());
    } else {
      result.output = fmt::format("RuntimeCrashed: lost connection to {} ({})", handle->id,
                                  httplib::to_string(res.error()));
    }
  } else if (res->status == 200) {
    result.status = InvocationStatus::Ok;
    result.output = std::move(res->body);
    result.content_type = res->get_header_value("Content-Type");
    if (result.content_type.empty()) result.content_type = "application/octet-stream";
  } else if (res->status == 500) {
    result.status = InvocationStatus::HandlerError;
    result.output = std::move(res->body);
  } else {
    kill = true;
    result.status = InvocationStatus::PlatformError;
    result.output = fmt::format("runtime {} answered with unexpected status {}", handle->id, res->status);
  }

  {
    std::lock_guard lk(mu_);
    ++handle->invocations;
    if (kill) {
      remove_locked(pool_locked(handle->function_name), handle);
    } else {
      handle->state = HandleState::Idle;
    }
  }
  if (kill) {
    spdlog::warn("executor: terminating {}: {}", handle->id, result.output);
    handle->process->terminate();
  }
  return result;
}

void Executor::release(Lease& lease) {
  auto handle = std::move(lease.handle_);
  lease.owner_ = nullptr;
  if (!handle) return;
  bool stale = false;
  {
    std::lock_guard lk(mu_);
    Pool& pool = pool_locked(handle->function_name);
    handle->leased = false;
    if (handle->state == HandleState::Terminated) {
      pool.cv.notify_one();
      return;
    }
    handle->state = HandleState::Idle;
    handle->last_used = clock_->now();
    if (handle->code_ref != pool.spec.code_ref || handle->env_name != pool.spec.env_name) {
      stale = true;
      remove_locked(pool, handle);
    } else {
      pool.cv.notify_one();
    }
  }
  if (stale) handle->process->terminate();
}

std::size_t Executor::reap_idle(Clock::time_point now) {
  std::vector<std::shared_ptr<Handle>> doomed;
  {
    std::lock_guard lk(mu_);
    for (auto& [_, pool] : pools_) {
      const auto idle_timeout = std::chrono::duration_cast<Clock::time_point::duration>(
          std::chrono::duration<double>(pool->spec.idle_timeout_s));
      std::vector<std::shared_ptr<Handle>> idle;
      for (auto& h : pool->handles) {
        if (!h->leased) idle.push_back(h);
      }
      std::sort(idle.begin(), idle.end(),
                [](const auto& a, const auto& b) { return a->last_used < b->last_used; });
      std::size_t live = pool->handles.size();
      for (auto& h : idle) {
        if (live <= static_cast<std::size_t>(pool->spec.min_warm)) break;
        if (now - h->last_used > idle_timeout) {
          h->state = HandleState::Terminated;
          doomed.push_back(h);
          --live;
        }
      }
      std::erase_if(pool->handles, [](const auto& h) { return h->state == HandleState::Terminated; });
      if (!doomed.empty()) pool->cv.notify_all();
    }
  }
  for (auto& h : doomed) h->process->terminate();
  return doomed.size();
}

void Executor::ensure_warm(const FunctionSpec& fn) {
  const EnvironmentSpec env = catalog_.get_environment(fn.env_name);
  for (;;) {
    {
      std::lock_guard lk(mu_);
      Pool& pool = pool_locked(fn.name);
      pool.spec = fn;
      if (pool.live() >= static_cast<std::size_t>(fn.min_warm)) return;
      ++pool.starting;
      pool.peak_live = std::max(pool.peak_live, pool.live());
    }
    std::shared_ptr<Handle> handle;
    try {
      handle = spawn_specialized(fn, env);
    } catch (...) {
      std::lock_guard lk(mu_);
      Pool& pool = pool_locked(fn.name);
      --pool.starting;
      pool.cv.notify_one();
      throw;
    }
    std::lock_guard lk(mu_);
    Pool& pool = pool_locked(fn.name);
    --pool.starting;
    handle->id = fmt::format("{}-{}", fn.name, ++next_handle_);
    handle->state = HandleState::Idle;
    handle->last_used = clock_->now();
    pool.handles.push_back(handle);
    ++pool.spawned_total;
    pool.cv.notify_one();
  }
}

std::size_t Executor::recycle(const std::string& function_name) {
  std::vector<std::shared_ptr<Handle>> doomed;
  {
    std::lock_guard lk(mu_);
    auto it = pools_.find(function_name);
    if (it == pools_.end()) return 0;
    for (auto& h : it->second->handles) {
      if (!h->leased) {
        h->state = HandleState::Terminated;
        doomed.push_back(h);
      }
    }
    std::erase_if(it->second->handles,
                  [](const auto& h) { return h->state == HandleState::Terminated; });
  }
  for (auto& h : doomed) h->process->terminate();
  return doomed.size();
}

PoolStats Executor::stats(const std::string& function_name) const {
  std::lock_guard lk(mu_);
  auto it = pools_.find(function_name);
  if (it == pools_.end()) return {};
  const Pool& pool = *it->second;
  PoolStats s;
  s.live = pool.live();
  for (const auto& h : pool.handles) (h->leased ? s.leased : s.idle)++;
  s.peak_live = pool.peak_live;
  s.spawned_total = pool.spawned_total;
  return s;
}

std::vector<RuntimeHandle> Executor::handles(const std::string& function_name) const {
  std::lock_guard lk(mu_);
  std::vector<RuntimeHandle> out;
  auto it = pools_.find(function_name);
  if (it == pools_.end()) return out;
  for (const auto& h : it->second->handles) out.push_back(h->view());
  return out;
}

int Executor::max_concurrent_per_handle() const { return max_concurrent_.load(); }

}  // namespace faasmesh
