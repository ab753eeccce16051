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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace faasmesh {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

Timestamp utc_now();

/// ISO-8601 UTC with millisecond precision, e.g. `2026-10-16T09:30:00.125Z`.
std::string format_timestamp(Timestamp ts);
Timestamp parse_timestamp(std::string_view text);

/// Monotonic time source for pool bookkeeping. Tests swap in ManualClock to
/// drive idle expiry deterministically.
class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() const = 0;
};

class SteadyClock final : public Clock {
 public:
  time_point now() const override { return std::chrono::steady_clock::now(); }
};

class ManualClock final : public Clock {
 public:
  ManualClock() : ticks_(std::chrono::steady_clock::now().time_since_epoch().count()) {}
  time_point now() const override {
    return time_point(std::chrono::steady_clock::duration(ticks_.load()));
  }
  void advance(std::chrono::steady_clock::duration d) { ticks_ += d.count(); }

 private:
  std::atomic<std::chrono::steady_clock::rep> ticks_;
};

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename(2) so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Asks the kernel for an unused loopback TCP port.
int pick_free_port();

/// `/data/obs1.ms` -> `obs1.ms`; anything else is returned unchanged.
std::string strip_data_prefix(std::string_view value);

std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace faasmesh
