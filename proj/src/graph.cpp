// Copyright 2026 The uniplan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "uniplan/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

namespace uniplan {

std::size_t ComputationGraph::index_of(int id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  throw InputError(fmt::format("unknown layer id {}", id));
}

std::vector<std::pair<std::size_t, std::size_t>> ComputationGraph::edge_positions() const {
  std::unordered_map<int, std::size_t> pos;
  for (std::size_t i = 0; i < nodes.size(); ++i) pos.emplace(nodes[i].id, i);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(edges.size());
  for (const auto& e : edges) {
    auto s = pos.find(e.src);
    auto d = pos.find(e.dst);
    if (s == pos.end() || d == pos.end()) {
      throw InputError(fmt::format("edge ({},{}) references an unknown layer", e.src, e.dst));
    }
    out.emplace_back(s->second, d->second);
  }
  return out;
}

Reachability::Reachability(const ComputationGraph& graph)
    : n_(graph.size()), bits_(n_ * n_, 0) {
  std::vector<std::vector<std::size_t>> succ(n_);
  for (auto [s, d] : graph.edge_positions()) succ[s].push_back(d);

  // One DFS per source: O(|V| * |E|).
  std::vector<std::size_t> stack;
  for (std::size_t src = 0; src < n_; ++src) {
    std::uint8_t* row = &bits_[src * n_];
    row[src] = 1;
    stack.assign(1, src);
    while (!stack.empty()) {
      std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : succ[u]) {
        if (!row[v]) {
          row[v] = 1;
          stack.push_back(v);
        }
      }
    }
  }
}

std::string to_string(const IntraStrategy& s) {
  return fmt::format("(dp={},tp={}{})", s.dp, s.tp, s.fsdp_shard ? ",fsdp" : "");
}

StrategySpace enumerate_strategies(int per_stage_devices) {
  if (per_stage_devices < 1) {
    throw InputError(fmt::format("per-stage device count must be >= 1, got {}", per_stage_devices));
  }
  StrategySpace space;
  space.per_stage_devices = per_stage_devices;
  // Walk tp from the largest power of two downwards so dp ascends.
  int tp = 1;
  while (tp * 2 <= per_stage_devices) tp *= 2;
  for (; tp >= 1; tp /= 2) {
    if (per_stage_devices % tp != 0) continue;
    const int dp = per_stage_devices / tp;
    space.strategies.push_back({dp, tp, false});
    if (dp >= 2) space.strategies.push_back({dp, tp, true});
  }
  return space;
}

std::vector<int> required_tp_sizes(const StrategySpace& space) {
  std::set<int> tps;
  for (const auto& s : space.strategies) tps.insert(s.tp);
  return {tps.begin(), tps.end()};
}

bool is_contiguous_positions(const Reachability& reach, std::span<const std::uint8_t> member) {
  const std::size_t n = reach.size();
  for (std::size_t v = 0; v < n; ++v) {
    if (member[v]) continue;
    bool from_inside = false;
    bool to_inside = false;
    for (std::size_t u = 0; u < n && !(from_inside && to_inside); ++u) {
      if (!member[u]) continue;
      from_inside = from_inside || reach.reaches(u, v);
      to_inside = to_inside || reach.reaches(v, u);
    }
    if (from_inside && to_inside) return false;
  }
  return true;
}

bool is_contiguous(const ComputationGraph& graph, std::span<const int> subset) {
  std::vector<std::uint8_t> member(graph.size(), 0);
  for (int id : subset) member[graph.index_of(id)] = 1;
  Reachability reach(graph);
  return is_contiguous_positions(reach, member);
}

namespace {

bool bad_number(double x) { return !std::isfinite(x) || x < 0.0; }

void check_table(const LayerNode& n, const std::map<int, double>& table, const char* field,
                 std::vector<GraphViolation>& out) {
  for (const auto& [tp, value] : table) {
    if (tp < 1) {
      out.push_back({"invalid-tp-key", fmt::format("layer {}: {} has TP key {}", n.id, field, tp)});
    }
    if (bad_number(value)) {
      out.push_back({"negative-field",
                     fmt::format("layer {}: {}[{}] = {} is negative or non-finite", n.id, field, tp, value)});
    }
  }
}

}  // namespace

std::vector<GraphViolation> validate_graph(const ComputationGraph& graph) {
  std::vector<GraphViolation> out;
  if (graph.nodes.empty()) {
    out.push_back({"empty-graph", "graph has no layers"});
    return out;
  }

  std::unordered_map<int, std::size_t> pos;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    if (n.id < 0) out.push_back({"negative-id", fmt::format("layer at position {} has id {}", i, n.id)});
    if (!pos.emplace(n.id, i).second) {
      out.push_back({"duplicate-id", fmt::format("layer id {} appears more than once", n.id)});
    }
    if (bad_number(n.param_bytes)) {
      out.push_back({"negative-field", fmt::format("layer {}: param_bytes = {}", n.id, n.param_bytes)});
    }
    if (bad_number(n.ctx_bytes)) {
      out.push_back({"negative-field", fmt::format("layer {}: ctx_bytes = {}", n.id, n.ctx_bytes)});
    }
    if (bad_number(n.tp_comm_bytes_per_sample)) {
      out.push_back({"negative-field",
                     fmt::format("layer {}: tp_comm_bytes_per_sample = {}", n.id, n.tp_comm_bytes_per_sample)});
    }
    check_table(n, n.fwd_time_per_sample, "fwd_time_per_sample", out);
    check_table(n, n.act_bytes_per_sample, "act_bytes_per_sample", out);
  }

  // Union-find for weak connectivity.
  std::vector<std::size_t> parent(graph.nodes.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  std::set<std::pair<int, int>> seen;
  for (const auto& e : graph.edges) {
    auto s = pos.find(e.src);
    auto d = pos.find(e.dst);
    if (s == pos.end() || d == pos.end()) {
      out.push_back({"unknown-endpoint", fmt::format("edge ({},{}) references an unknown layer", e.src, e.dst)});
      continue;
    }
    if (e.src == e.dst) {
      out.push_back({"self-loop", fmt::format("edge ({},{}) is a self-loop", e.src, e.dst)});
      continue;
    }
    if (!seen.emplace(e.src, e.dst).second) {
      out.push_back({"duplicate-edge", fmt::format("edge ({},{}) appears more than once", e.src, e.dst)});
    }
    if (s->second > d->second) {
      out.push_back({"topological-order",
                     fmt::format("edge ({},{}) points backwards in the layer order", e.src, e.dst)});
    }
    if (bad_number(e.tensor_bytes_per_sample)) {
      out.push_back({"negative-field", fmt::format("edge ({},{}): tensor_bytes_per_sample = {}", e.src, e.dst,
                                                   e.tensor_bytes_per_sample)});
    }
    parent[find(s->second)] = find(d->second);
  }

  std::size_t root = find(0);
  for (std::size_t i = 1; i < graph.nodes.size(); ++i) {
    if (find(i) != root) {
      out.push_back({"disconnected", fmt::format("layer {} is not connected to layer {}", graph.nodes[i].id,
                                                 graph.nodes[0].id)});
      break;
    }
  }
  return out;
}

}  // namespace uniplan
