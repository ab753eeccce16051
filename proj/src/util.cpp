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

#include "faasmesh/util.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "faasmesh/errors.hpp"

namespace faasmesh {

namespace fs = std::filesystem;

Timestamp utc_now() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
}

std::string format_timestamp(Timestamp ts) {
  const auto secs = std::chrono::floor<std::chrono::seconds>(ts);
  const auto millis = (ts - secs).count();
  const std::time_t tt = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", tm, millis);
}

Timestamp parse_timestamp(std::string_view text) {
  std::tm tm{};
  int millis = 0;
  int consumed = 0;
  const std::string buf(text);
  const int n = std::sscanf(buf.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ%n", &tm.tm_year,
                            &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec,
                            &millis, &consumed);
  if (n != 7 || consumed != static_cast<int>(buf.size())) {
    throw Error(ErrorCode::InvalidSpec, fmt::format("malformed timestamp '{}'", text));
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::time_t tt = timegm(&tm);
  return std::chrono::time_point_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::from_time_t(tt)) +
         std::chrono::milliseconds(millis);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError,
                fmt::format("cannot open '{}': {}", path.string(), std::strerror(errno)));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) {
    throw Error(ErrorCode::IoError, fmt::format("read failed on '{}'", path.string()));
  }
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  const fs::path tmp = path.string() + fmt::format(".tmp{:x}", rng());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::IoError,
                  fmt::format("cannot write '{}': {}", tmp.string(), std::strerror(errno)));
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      throw Error(ErrorCode::IoError, fmt::format("write failed on '{}'", tmp.string()));
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoError,
                fmt::format("cannot replace '{}': {}", path.string(), ec.message()));
  }
}

int pick_free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) {
    throw Error(ErrorCode::SpawnFailure, "socket() failed while picking a port");
  }
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof(addr);
  int port = -1;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0 &&
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0) {
    port = ntohs(addr.sin_port);
  }
  ::close(fd);
  if (port <= 0) {
    throw Error(ErrorCode::SpawnFailure, "no free loopback port");
  }
  return port;
}

std::string strip_data_prefix(std::string_view value) {
  constexpr std::string_view kPrefix = "/data/";
  if (value.substr(0, kPrefix.size()) == kPrefix) {
    value.remove_prefix(kPrefix.size());
  }
  return std::string(value);
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

}  // namespace faasmesh
