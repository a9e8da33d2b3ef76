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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "uniplan/cost_model.hpp"
#include "uniplan/graph.hpp"
#include "uniplan/miqp.hpp"
#include "uniplan/profile.hpp"
#include "uniplan/solver.hpp"

namespace uniplan {

/// Divisors of x except 1, ascending.
std::vector<int> factors(int x);

struct ConfigOutcome {
  int deg = 1;
  int c = 1;
  SolveStats stats;
  std::optional<double> objective;
  std::string witness;  // why the configuration has no plan, if it has none
};

struct ParallelPlan {
  int deg = 1;
  int c = 1;
  Assignment assignment;
  double est_tpi = 0.0;
  PlanContext context;
  std::vector<ConfigOutcome> stats;  // QIP first, then (deg, c) ascending
};

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, std::vector<ConfigOutcome> outcomes)
      : std::runtime_error(what), outcomes_(std::move(outcomes)) {}
  const std::vector<ConfigOutcome>& outcomes() const { return outcomes_; }

 private:
  std::vector<ConfigOutcome> outcomes_;
};

struct OptimizeOptions {
  Precision precision = Precision::kFp32;
  InflightRule inflight_rule = InflightRule::kAllMicroBatches;
  Budget budget;
  // Skip the rest of a configuration once its bound exceeds the best plan
  // found by configurations that already finished.
  bool previous_best_cutoff = false;
  // Worker threads for the configuration sweep. Each solve is serial.
  int jobs = 1;
  // Called once per configuration with its built models (for LP export).
  std::function<void(const PlanContext&, const MilpModel&)> on_model;
};

/// Configurations the sweep visits: (1, 1) for the single-stage program,
/// then every (deg, c) in factors(n) x factors(B).
std::vector<std::pair<int, int>> sweep_configurations(int n, int mini_batch);

/// Runs the single-stage program once (b = B), then every pipeline
/// configuration, and returns the strictly cheapest plan. Ties keep the
/// earlier configuration (smaller deg, then smaller c). Throws
/// InfeasibleError when no configuration has a plan.
ParallelPlan unified_optimize(const ComputationGraph& graph, const ClusterProfile& profile, int mini_batch,
                              const OptimizeOptions& options = {});

}  // namespace uniplan
