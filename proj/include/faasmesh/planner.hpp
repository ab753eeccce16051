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
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace faasmesh {

struct NodeSpec {
  std::string node_id;
  std::string site_name;
  double compute_cost_per_invocation = 0.0;
  int capacity = 1;

  bool operator==(const NodeSpec&) const = default;
};

struct NetworkLink {
  std::string from_node;
  std::string to_node;
  double latency_ms = 0.0;
  double cost_per_gib = 0.0;
  double bandwidth_gibps = 1.0;

  bool operator==(const NetworkLink&) const = default;
};

struct DataItem {
  std::string data_id;
  std::uint64_t size_bytes = 0;
  std::set<std::string> replica_nodes;

  bool operator==(const DataItem&) const = default;
};

struct CostWeights {
  double alpha = 1.0;    // transfer
  double beta = 0.001;   // latency, per ms
  double gamma = 1.0;    // compute

  bool operator==(const CostWeights&) const = default;
};

/// Simulated federated cluster. Ordered pairs absent from `links` are
/// disconnected unless `default_link` is set, in which case it stands in for
/// them. Self-transfers are always free.
struct ClusterState {
  std::map<std::string, NodeSpec> nodes;
  std::map<std::pair<std::string, std::string>, NetworkLink> links;
  std::map<std::string, DataItem> data_items;
  std::map<std::string, int> current_load;
  std::optional<NetworkLink> default_link;
  CostWeights weights;

  /// Link used for moving data from `from` to `to`, or nullopt if
  /// disconnected.
  std::optional<NetworkLink> link(const std::string& from, const std::string& to) const;
  int load(const std::string& node_id) const;

  /// Throws Error(InvalidTopology) naming the violated invariant.
  void validate() const;

  /// One node `local`, zero costs, unbounded capacity.
  static ClusterState single_local_node();
};

struct CostBreakdown {
  double transfer_cost = 0.0;
  double latency_cost = 0.0;
  double compute_cost = 0.0;

  double total() const { return transfer_cost + latency_cost + compute_cost; }
};

struct Transfer {
  std::string data_id;
  std::string source_node;
  std::uint64_t bytes = 0;
};

struct CostEstimate {
  std::string node_id;
  bool feasible = true;
  std::string infeasible_reason;
  CostBreakdown breakdown;
  std::vector<Transfer> transfers;
};

struct PlacementDecision {
  std::string node_id;
  double total_cost = 0.0;
  CostBreakdown breakdown;
  std::vector<Transfer> transfers;
};

/// Cost of running on `node_id` an invocation that touches `data_refs`.
/// Each known input is fetched from its cheapest replica by transfer cost
/// (ties go to the smaller node id); ids not in the cluster are outputs and
/// cost nothing. Never throws for infeasibility; see `feasible`.
CostEstimate try_estimate_cost(const std::string& node_id, const std::vector<std::string>& data_refs,
                               const ClusterState& cluster, const CostWeights& weights);

/// Throwing form: Error(Infeasible) when the node is saturated or some input
/// cannot reach it.
CostBreakdown estimate_cost(const std::string& node_id, const std::vector<std::string>& data_refs,
                            const ClusterState& cluster, const CostWeights& weights);

/// Relative tolerance under which two total costs count as a tie.
inline constexpr double kCostTieTolerance = 1e-9;

/// Cheapest feasible node; ties go to the lexicographically smallest id.
/// Throws Error(NoFeasibleNode). Pure.
PlacementDecision choose_node(const std::vector<std::string>& data_refs, const ClusterState& cluster,
                              const CostWeights& weights);

/// Per-node estimates in node id order, for explaining a decision.
std::vector<CostEstimate> explain(const std::vector<std::string>& data_refs,
                                  const ClusterState& cluster, const CostWeights& weights);

ClusterState parse_topology(std::string_view text, std::string_view source = "<memory>");
ClusterState load_topology(const std::filesystem::path& path);
nlohmann::json topology_to_json(const ClusterState& cluster);
void save_topology(const std::filesystem::path& path, const ClusterState& cluster);

/// Thread-safe owner of the live cluster state. plan() picks a node and
/// counts the invocation against it in one atomic step; callers hand the
/// slot back with update_load(node, -1).
class Planner {
 public:
  explicit Planner(ClusterState cluster = ClusterState::single_local_node());

  PlacementDecision plan(const std::vector<std::string>& data_refs);
  PlacementDecision plan(const std::vector<std::string>& data_refs, const CostWeights& weights);

  /// Throws Error(InvalidTopology) for unknown nodes or when the load would
  /// go negative.
  void update_load(const std::string& node_id, int delta);

  /// Adds or replaces an item; every replica node must exist.
  void register_data(DataItem item);

  /// Marks `node_id` as holding a replica of `data_id`, creating the item
  /// with `size_bytes` if it is new.
  void add_replica(const std::string& data_id, const std::string& node_id, std::uint64_t size_bytes);

  bool knows(const std::string& data_id) const;
  ClusterState snapshot() const;
  CostWeights weights() const;

 private:
  mutable std::mutex mu_;
  ClusterState cluster_;
};

}  // namespace faasmesh
