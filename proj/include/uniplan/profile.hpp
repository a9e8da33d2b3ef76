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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uniplan/graph.hpp"

namespace uniplan {

class ProfileError : public InputError {
 public:
  using InputError::InputError;
};

/// Cluster description: device memory, measured collective and P2P
/// bandwidths, per-message latency and the compute/communication overlap
/// coefficient.
struct ClusterProfile {
  int n = 1;
  std::vector<double> mem_bytes_per_device;
  std::map<int, double> allreduce_bw;  // group size -> bytes/s
  double p2p_bw_default = 0.0;         // bytes/s
  // Optional per stage-boundary overrides, keyed by the boundary pattern name
  // used in the profile file. Kept for round-tripping; time queries use the
  // default unless a key is given.
  std::map<std::string, double> p2p_bw_overrides;
  double latency_s = 0.0;
  double ccoc = 0.0;

  double p2p_bw(const std::optional<std::string>& boundary = std::nullopt) const;

  /// Smallest device memory among devices [first, first + count).
  double min_memory(int first, int count) const;
};

/// Divisors of n greater than 1, ascending.
std::vector<int> collective_group_sizes(int n);

ClusterProfile load_profile(const nlohmann::json& document);
nlohmann::json serialize_profile(const ClusterProfile& profile);

ClusterProfile synth_profile(int n, double link_bw, double latency_s, double mem_bytes, double ccoc);

/// Ring all-reduce: 2(g-1)/g * volume / bw[g] + 2(g-1) * latency. Zero for g = 1.
double allreduce_time(double volume_bytes, int group, const ClusterProfile& profile);

double p2p_time(double volume_bytes, const ClusterProfile& profile);

/// compute + comm - ccoc * min(compute, comm).
double overlap(double compute_s, double comm_s, double ccoc);

}  // namespace uniplan
