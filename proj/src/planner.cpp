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

#include "faasmesh/planner.hpp"

#include <algorithm>
#include <climits>
#include <cmath>

#include <fmt/format.h>

#include "faasmesh/errors.hpp"
#include "faasmesh/util.hpp"

namespace faasmesh {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kBytesPerGiB = 1024.0 * 1024.0 * 1024.0;

[[noreturn]] void invalid(const std::string& why) {
  throw Error(ErrorCode::InvalidTopology, why);
}

std::vector<std::string> unique_refs(const std::vector<std::string>& refs) {
  std::vector<std::string> out;
  for (const auto& r : refs) {
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
  }
  return out;
}

void check_link_values(const NetworkLink& l) {
  if (!(l.latency_ms >= 0.0) || !(l.cost_per_gib >= 0.0) || !(l.bandwidth_gibps > 0.0) ||
      !std::isfinite(l.latency_ms) || !std::isfinite(l.cost_per_gib)) {
    invalid(fmt::format("link {}->{}: latency and cost must be non-negative, bandwidth positive",
                        l.from_node, l.to_node));
  }
}

}  // namespace

std::optional<NetworkLink> ClusterState::link(const std::string& from, const std::string& to) const {
  if (from == to) return NetworkLink{from, to, 0.0, 0.0, 1.0};
  if (auto it = links.find({from, to}); it != links.end()) return it->second;
  if (default_link) {
    NetworkLink l = *default_link;
    l.from_node = from;
    l.to_node = to;
    return l;
  }
  return std::nullopt;
}

int ClusterState::load(const std::string& node_id) const {
  auto it = current_load.find(node_id);
  return it == current_load.end() ? 0 : it->second;
}

void ClusterState::validate() const {
  if (nodes.empty()) invalid("topology has no nodes");
  for (const auto& [id, node] : nodes) {
    if (id.empty() || id != node.node_id) invalid("node_id must be non-empty and unique");
    if (node.capacity < 1) invalid(fmt::format("node {}: capacity must be positive", id));
    if (!(node.compute_cost_per_invocation >= 0.0)) {
      invalid(fmt::format("node {}: compute_cost_per_invocation must be non-negative", id));
    }
  }
  for (const auto& [key, l] : links) {
    if (!nodes.contains(l.from_node) || !nodes.contains(l.to_node)) {
      invalid(fmt::format("link {}->{} references an unknown node", l.from_node, l.to_node));
    }
    check_link_values(l);
    if (l.from_node == l.to_node && (l.latency_ms != 0.0 || l.cost_per_gib != 0.0)) {
      invalid(fmt::format("self-link on {} must have zero latency and cost", l.from_node));
    }
  }
  if (default_link) check_link_values(*default_link);
  for (const auto& [id, item] : data_items) {
    if (item.replica_nodes.empty()) invalid(fmt::format("data item {} has no replicas", id));
    for (const auto& n : item.replica_nodes) {
      if (!nodes.contains(n)) {
        invalid(fmt::format("data item {} lists unknown replica node {}", id, n));
      }
    }
  }
  for (const auto& [id, load] : current_load) {
    if (!nodes.contains(id)) invalid(fmt::format("load recorded for unknown node {}", id));
    if (load < 0) invalid(fmt::format("node {}: negative load", id));
  }
  if (!(weights.alpha >= 0.0) || !(weights.beta >= 0.0) || !(weights.gamma >= 0.0)) {
    invalid("weights must be non-negative");
  }
}

ClusterState ClusterState::single_local_node() {
  ClusterState c;
  c.nodes.emplace("local", NodeSpec{"local", "local", 0.0, INT_MAX});
  c.links.emplace(std::pair{std::string("local"), std::string("local")},
                  NetworkLink{"local", "local", 0.0, 0.0, 1.0});
  return c;
}

CostEstimate try_estimate_cost(const std::string& node_id, const std::vector<std::string>& data_refs,
                               const ClusterState& cluster, const CostWeights& weights) {
  CostEstimate est;
  est.node_id = node_id;
  auto node_it = cluster.nodes.find(node_id);
  if (node_it == cluster.nodes.end()) {
    est.feasible = false;
    est.infeasible_reason = fmt::format("unknown node {}", node_id);
    return est;
  }
  if (cluster.load(node_id) >= node_it->second.capacity) {
    est.feasible = false;
    est.infeasible_reason = fmt::format("node {} at capacity ({})", node_id, node_it->second.capacity);
    return est;
  }

  double transfer = 0.0;
  double worst_latency = 0.0;
  for (const auto& ref : unique_refs(data_refs)) {
    auto item_it = cluster.data_items.find(ref);
    if (item_it == cluster.data_items.end()) continue;
    const DataItem& item = item_it->second;
    if (item.replica_nodes.contains(node_id)) continue;

    const double size_gib = static_cast<double>(item.size_bytes) / kBytesPerGiB;
    std::optional<NetworkLink> best;
    double best_cost = 0.0;
    for (const auto& source : item.replica_nodes) {
      auto link = cluster.link(source, node_id);
      if (!link) continue;
      const double cost = size_gib * link->cost_per_gib;
      if (!best || cost < best_cost) {
        best = link;
        best_cost = cost;
      }
    }
    if (!best) {
      est.feasible = false;
      est.infeasible_reason = fmt::format("data item {} cannot reach node {}", ref, node_id);
      return est;
    }
    transfer += best_cost;
    worst_latency = std::max(worst_latency, best->latency_ms);
    est.transfers.push_back({ref, best->from_node, item.size_bytes});
  }

  est.breakdown.transfer_cost = weights.alpha * transfer;
  est.breakdown.latency_cost = weights.beta * worst_latency;
  est.breakdown.compute_cost = weights.gamma * node_it->second.compute_cost_per_invocation;
  return est;
}

CostBreakdown estimate_cost(const std::string& node_id, const std::vector<std::string>& data_refs,
                            const ClusterState& cluster, const CostWeights& weights) {
  auto est = try_estimate_cost(node_id, data_refs, cluster, weights);
  if (!est.feasible) throw Error(ErrorCode::Infeasible, est.infeasible_reason);
  return est.breakdown;
}

std::vector<CostEstimate> explain(const std::vector<std::string>& data_refs,
                                  const ClusterState& cluster, const CostWeights& weights) {
  std::vector<CostEstimate> out;
  out.reserve(cluster.nodes.size());
  for (const auto& [id, _] : cluster.nodes) {
    out.push_back(try_estimate_cost(id, data_refs, cluster, weights));
  }
  return out;
}

PlacementDecision choose_node(const std::vector<std::string>& data_refs, const ClusterState& cluster,
                              const CostWeights& weights) {
  const auto estimates = explain(data_refs, cluster, weights);
  std::optional<double> best;
  for (const auto& e : estimates) {
    if (e.feasible && (!best || e.breakdown.total() < *best)) best = e.breakdown.total();
  }
  if (!best) {
    std::string why;
    for (const auto& e : estimates) why += (why.empty() ? "" : "; ") + e.infeasible_reason;
    throw Error(ErrorCode::NoFeasibleNode, "no feasible node: " + why);
  }
  // estimates are in node id order, so the first one within tolerance wins
  for (const auto& e : estimates) {
    if (e.feasible && e.breakdown.total() <= *best + kCostTieTolerance * std::abs(*best)) {
      return PlacementDecision{e.node_id, e.breakdown.total(), e.breakdown, e.transfers};
    }
  }
  throw Error(ErrorCode::NoFeasibleNode, "no feasible node");
}

ClusterState parse_topology(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::IoError,
                fmt::format("{}: malformed topology at byte {}: {}", source, e.byte, e.what()));
  }
  ClusterState c;
  try {
    if (!doc.is_object()) invalid(fmt::format("{}: topology must be a JSON object", source));
    for (const auto& n : doc.at("nodes")) {
      NodeSpec node{n.at("node_id").get<std::string>(), n.value("site_name", std::string{}),
                    n.value("compute_cost_per_invocation", 0.0), n.value("capacity", 1024)};
      if (!c.nodes.emplace(node.node_id, node).second) {
        invalid(fmt::format("duplicate node_id {}", node.node_id));
      }
    }
    for (const auto& l : doc.value("links", json::array())) {
      NetworkLink link{l.at("from_node").get<std::string>(), l.at("to_node").get<std::string>(),
                       l.value("latency_ms", 0.0), l.value("cost_per_gib", 0.0),
                       l.value("bandwidth_gibps", 1.0)};
      if (!c.links.emplace(std::pair{link.from_node, link.to_node}, link).second) {
        invalid(fmt::format("duplicate link {}->{}", link.from_node, link.to_node));
      }
    }
    for (const auto& d : doc.value("data_items", json::array())) {
      DataItem item{d.at("data_id").get<std::string>(), d.value("size_bytes", std::uint64_t{0}),
                    d.at("replica_nodes").get<std::set<std::string>>()};
      if (!c.data_items.emplace(item.data_id, item).second) {
        invalid(fmt::format("duplicate data_id {}", item.data_id));
      }
    }
    if (doc.contains("weights")) {
      const auto& w = doc.at("weights");
      c.weights = CostWeights{w.value("alpha", 1.0), w.value("beta", 0.001), w.value("gamma", 1.0)};
    }
    if (doc.contains("default_link") && !doc.at("default_link").is_null()) {
      const auto& l = doc.at("default_link");
      c.default_link = NetworkLink{"*", "*", l.value("latency_ms", 0.0), l.value("cost_per_gib", 0.0),
                                   l.value("bandwidth_gibps", 1.0)};
    }
  } catch (const json::exception& e) {
    invalid(fmt::format("{}: {}", source, e.what()));
  }
  c.validate();
  return c;
}

ClusterState load_topology(const fs::path& path) {
  return parse_topology(read_file(path), path.string());
}

json topology_to_json(const ClusterState& cluster) {
  json nodes = json::array();
  for (const auto& [_, n] : cluster.nodes) {
    nodes.push_back({{"node_id", n.node_id},
                     {"site_name", n.site_name},
                     {"compute_cost_per_invocation", n.compute_cost_per_invocation},
                     {"capacity", n.capacity}});
  }
  json links = json::array();
  for (const auto& [_, l] : cluster.links) {
    links.push_back({{"from_node", l.from_node},
                     {"to_node", l.to_node},
                     {"latency_ms", l.latency_ms},
                     {"cost_per_gib", l.cost_per_gib},
                     {"bandwidth_gibps", l.bandwidth_gibps}});
  }
  json items = json::array();
  for (const auto& [_, d] : cluster.data_items) {
    items.push_back(
        {{"data_id", d.data_id}, {"size_bytes", d.size_bytes}, {"replica_nodes", d.replica_nodes}});
  }
  json doc = {{"nodes", nodes},
              {"links", links},
              {"data_items", items},
              {"weights",
               {{"alpha", cluster.weights.alpha},
                {"beta", cluster.weights.beta},
                {"gamma", cluster.weights.gamma}}}};
  if (cluster.default_link) {
    doc["default_link"] = {{"latency_ms", cluster.default_link->latency_ms},
                           {"cost_per_gib", cluster.default_link->cost_per_gib},
                           {"bandwidth_gibps", cluster.default_link->bandwidth_gibps}};
  }
  return doc;
}

void save_topology(const fs::path& path, const ClusterState& cluster) {
  write_file_atomic(path, topology_to_json(cluster).dump(2) + "\n");
}

Planner::Planner(ClusterState cluster) : cluster_(std::move(cluster)) { cluster_.validate(); }

PlacementDecision Planner::plan(const std::vector<std::string>& data_refs) {
  std::lock_guard lk(mu_);
  auto decision = choose_node(data_refs, cluster_, cluster_.weights);
  ++cluster_.current_load[decision.node_id];
  return decision;
}

PlacementDecision Planner::plan(const std::vector<std::string>& data_refs, const CostWeights& weights) {
  std::lock_guard lk(mu_);
  auto decision = choose_node(data_refs, cluster_, weights);
  ++cluster_.current_load[decision.node_id];
  return decision;
}

void Planner::update_load(const std::string& node_id, int delta) {
  std::lock_guard lk(mu_);
  if (!cluster_.nodes.contains(node_id)) invalid(fmt::format("unknown node {}", node_id));
  int& load = cluster_.current_load[node_id];
  if (load + delta < 0) {
    load = 0;
    invalid(fmt::format("load on {} would drop below zero; clamped to 0", node_id));
  }
  load += delta;
}

void Planner::register_data(DataItem item) {
  std::lock_guard lk(mu_);
  if (item.data_id.empty()) invalid("data_id must be non-empty");
  if (item.replica_nodes.empty()) invalid(fmt::format("data item {} has no replicas", item.data_id));
  for (const auto& n : item.replica_nodes) {
    if (!cluster_.nodes.contains(n)) {
      invalid(fmt::format("data item {} lists unknown replica node {}", item.data_id, n));
    }
  }
  cluster_.data_items[item.data_id] = std::move(item);
}

void Planner::add_replica(const std::string& data_id, const std::string& node_id,
                          std::uint64_t size_bytes) {
  std::lock_guard lk(mu_);
  if (!cluster_.nodes.contains(node_id)) invalid(fmt::format("unknown node {}", node_id));
  auto [it, inserted] = cluster_.data_items.try_emplace(data_id, DataItem{data_id, size_bytes, {}});
  if (!inserted) it->second.size_bytes = size_bytes;
  it->second.replica_nodes.insert(node_id);
}

bool Planner::knows(const std::string& data_id) const {
  std::lock_guard lk(mu_);
  return cluster_.data_items.contains(data_id);
}

ClusterState Planner::snapshot() const {
  std::lock_guard lk(mu_);
  return cluster_;
}

CostWeights Planner::weights() const {
  std::lock_guard lk(mu_);
  return cluster_.weights;
}

}  // namespace faasmesh
