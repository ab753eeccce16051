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
#include <iosfwd>
#include <string>
#include <vector>

namespace faasmesh::cli {

enum class OutputFormat { Text, Json };

struct CliConfig {
  std::filesystem::path catalog_path = "catalog.json";
  std::filesystem::path topology_path = "topology.json";
  std::filesystem::path data_root = "data";
  std::string listen = "127.0.0.1:8888";
  OutputFormat output = OutputFormat::Text;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitIoError = 2;

/// Entry point shared by the faasctl binary and the tests. `args` excludes
/// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace faasmesh::cli
