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

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uniplan {

/// Raised for malformed inputs (unknown ids, inconsistent shapes, bad args).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One profiled layer. Per-TP tables are keyed by tensor-parallel size.
struct LayerNode {
  int id = 0;
  std::string kind;
  std::map<int, double> fwd_time_per_sample;   // seconds / sample
  double param_bytes = 0.0;                    // ps
  std::map<int, double> act_bytes_per_sample;  // bytes / sample
  double ctx_bytes = 0.0;                      // m_c
  double tp_comm_bytes_per_sample = 0.0;
};

struct EdgeInfo {
  int src = 0;
  int dst = 0;
  double tensor_bytes_per_sample = 0.0;
};

/// Layered model graph. `nodes` is stored in topological order; internal
/// algorithms address layers by their position in `nodes`, and edges by
/// their position in `edges`.
struct ComputationGraph {
  std::vector<LayerNode> nodes;
  std::vector<EdgeInfo> edges;

  std::size_t size() const { return nodes.size(); }

  /// Position of the layer with the given id. Throws InputError if absent.
  std::size_t index_of(int id) const;

  /// Edges as (src position, dst position) pairs, same order as `edges`.
  std::vector<std::pair<std::size_t, std::size_t>> edge_positions() const;
};

/// Dense transitive closure. reaches(u, v) is true when v is reachable from u
/// by a path of length >= 0 (every node reaches itself).
class Reachability {
 public:
  explicit Reachability(const ComputationGraph& graph);

  bool reaches(std::size_t from, std::size_t to) const {
    return bits_[from * n_ + to] != 0;
  }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct IntraStrategy {
  int dp = 1;
  int tp = 1;
  bool fsdp_shard = false;

  /// FSDP shard count: dp when sharding model states, else 1.
  int fs() const { return fsdp_shard ? dp : 1; }

  /// Activation layout is determined by the (dp, tp) split only; the FSDP
  /// flag affects model states, not the layout of produced tensors.
  bool same_layout(const IntraStrategy& other) const {
    return dp == other.dp && tp == other.tp;
  }

  friend bool operator==(const IntraStrategy&, const IntraStrategy&) = default;
};

std::string to_string(const IntraStrategy& s);

struct StrategySpace {
  int per_stage_devices = 1;
  std::vector<IntraStrategy> strategies;

  std::size_t size() const { return strategies.size(); }
  const IntraStrategy& operator[](std::size_t k) const { return strategies[k]; }
};

/// All (dp, tp) splits of `per_stage_devices` with power-of-two tp, plus an
/// FSDP variant whenever dp >= 2. Ordered by ascending dp, plain before FSDP.
/// Cardinality for g = 2^k is 2k + 1.
StrategySpace enumerate_strategies(int per_stage_devices);

/// Contiguity by definition: false iff some outside node lies on a path
/// between two members. `subset` holds layer ids.
bool is_contiguous(const ComputationGraph& graph, std::span<const int> subset);

/// Same predicate over positions with a precomputed closure.
bool is_contiguous_positions(const Reachability& reach,
                             std::span<const std::uint8_t> member);

struct GraphViolation {
  std::string kind;     // e.g. "topological-order", "negative-field"
  std::string message;  // names the offending node or edge
};

std::vector<GraphViolation> validate_graph(const ComputationGraph& graph);

/// Sorted set of TP sizes every layer must have profile entries for.
std::vector<int> required_tp_sizes(const StrategySpace& space);

}  // namespace uniplan
