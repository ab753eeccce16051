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
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "faasmesh/catalog.hpp"
#include "faasmesh/invocation.hpp"
#include "faasmesh/util.hpp"

namespace faasmesh {

enum class HandleState { Starting, Specialized, Busy, Idle, Terminated };

std::string_view to_string(HandleState state);

/// Read-only view of one runtime host owned by a pool.
struct RuntimeHandle {
  std::string handle_id;
  std::string function_name;
  std::string env_name;
  std::string endpoint;
  HandleState state = HandleState::Starting;
  Clock::time_point last_used_at{};
  std::uint64_t invocation_count = 0;
};

struct PoolStats {
  std::size_t live = 0;
  std::size_t idle = 0;
  std::size_t leased = 0;
  std::size_t peak_live = 0;
  std::uint64_t spawned_total = 0;
};

struct ExecutorConfig {
  std::filesystem::path data_root = "./data";
  std::chrono::milliseconds queue_timeout{10'000};
  std::chrono::milliseconds spawn_timeout{15'000};
  // Zero disables the background reaper; reap_idle() can still be called.
  std::chrono::milliseconds reap_interval{1'000};
  // Not owned. Null means the real steady clock.
  const Clock* clock = nullptr;
};

/// Something that hosts a runtime server on a loopback port.
class RuntimeProcess {
 public:
  virtual ~RuntimeProcess() = default;
  virtual int port() const = 0;
  virtual bool exited() = 0;
  virtual void terminate() = 0;
};

/// Per-function runtime pools with a cold/warm lifecycle.
///
/// acquire() hands out an idle specialized runtime when one exists and
/// otherwise spawns and specializes a new host, never letting a function's
/// live hosts exceed max_pool. A caller that finds the pool saturated waits
/// up to queue_timeout. Handles are single-occupancy: between acquire and
/// release nobody else can see them.
class Executor {
 public:
  struct Handle;

  /// Exclusive claim on one runtime. Releases itself if dropped.
  class Lease {
   public:
    Lease() = default;
    Lease(Lease&& other) noexcept;
    Lease& operator=(Lease&& other) noexcept;
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    ~Lease();

    bool cold() const { return cold_; }
    explicit operator bool() const { return handle_ != nullptr; }
    RuntimeHandle handle() const;

   private:
    friend class Executor;
    Lease(Executor* owner, std::shared_ptr<Handle> handle, bool cold)
        : owner_(owner), handle_(std::move(handle)), cold_(cold) {}

    Executor* owner_ = nullptr;
    std::shared_ptr<Handle> handle_;
    bool cold_ = false;
  };

  Executor(const Catalog& catalog, ExecutorConfig config);
  ~Executor();

  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  /// Throws Error(SpawnFailure) or Error(CapacityExhausted).
  Lease acquire(const FunctionSpec& fn);

  /// Runs one request on the leased runtime. Never throws for runtime
  /// failures; those come back as HandlerError / PlatformError results. A
  /// crashed or timed-out runtime is terminated.
  InvocationResult invoke(Lease& lease, const InvocationRequest& request);

  void release(Lease& lease);

  /// Terminates idle runtimes whose idle age exceeds the function's
  /// idle_timeout, keeping at least min_warm live runtimes per function.
  std::size_t reap_idle(Clock::time_point now);

  /// Spawns idle runtimes until the function has min_warm live ones.
  void ensure_warm(const FunctionSpec& fn);

  /// Terminates every idle runtime of the function.
  std::size_t recycle(const std::string& function_name);

  void shutdown();

  PoolStats stats(const std::string& function_name) const;
  std::vector<RuntimeHandle> handles(const std::string& function_name) const;

  /// Highest number of simultaneous invocations seen on any single handle.
  int max_concurrent_per_handle() const;

  const std::filesystem::path& data_root() const { return config_.data_root; }

 private:
  struct Pool;

  Pool& pool_locked(const std::string& name);
  std::shared_ptr<Handle> spawn_specialized(const FunctionSpec& fn, const EnvironmentSpec& env);
  void remove_locked(Pool& pool, const std::shared_ptr<Handle>& handle);
  void reaper_loop();

  const Catalog& catalog_;
  ExecutorConfig config_;
  SteadyClock steady_;
  const Clock* clock_;

  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Pool>, std::less<>> pools_;
  std::uint64_t next_handle_ = 0;
  std::atomic<int> max_concurrent_{0};

  std::mutex reaper_mu_;
  std::condition_variable reaper_cv_;
  bool stopping_ = false;
  std::thread reaper_;
};

/// Launches an external runtime host with `{port}`/`{workdir}` substituted
/// into the command template and FAAS_RUNTIME_PORT exported.
std::unique_ptr<RuntimeProcess> spawn_external_host(const std::vector<std::string>& command_template,
                                                    int port,
                                                    const std::filesystem::path& workdir);

std::vector<std::string> substitute_launch_command(const std::vector<std::string>& command_template,
                                                   int port, const std::filesystem::path& workdir);

}  // namespace faasmesh
