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

// Random instance generators and independent oracles shared by the unit and
// acceptance tests. Nothing here calls the solver or the model builders.

#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uniplan/cost_model.hpp"
#include "uniplan/graph.hpp"
#include "uniplan/miqp.hpp"
#include "uniplan/profile.hpp"

namespace uniplan::testing {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi);
int uniform_int(Rng& rng, int lo, int hi);  // inclusive

/// Layer with TP tables for 1, 2, 4 and 8.
LayerNode random_layer(Rng& rng, int id);

/// Chain 0 -> 1 -> ... -> nv-1.
ComputationGraph random_chain(Rng& rng, int nv);

/// Connected DAG in topological order: node v > 0 gets one random earlier
/// predecessor, plus every other earlier node with probability `extra`.
ComputationGraph random_dag(Rng& rng, int nv, double extra = 0.3);

struct Instance {
  ComputationGraph graph;
  ClusterProfile profile;
  PlanContext ctx;
  CostMatrices costs;
  std::vector<double> limits;
};

/// Builds costs through the cost model for (n, B, deg, c) on a random
/// profile with per-device memory drawn so the memory rows sometimes bind
/// and sometimes make the instance infeasible.
Instance random_instance(Rng& rng, ComputationGraph graph, int n, int mini_batch, int deg, int c);

/// Cost matrices drawn directly (not from the cost model) over a
/// hand-picked strategy list; memory entries are infinite with probability
/// `infeasible`. Same-stage diagonal resharding is zero.
CostMatrices random_costs(Rng& rng, const ComputationGraph& graph, std::vector<IntraStrategy> strategies,
                          double infeasible = 0.1);

/// Exact single-stage optimum of a chain by dynamic programming over
/// (layer, strategy) with Pareto sets of (time, memory). Uses only exec,
/// reshard and memory from `costs`. nullopt when no combination fits.
struct ChainDpResult {
  double objective = 0.0;
  std::vector<int> strategy_of;
};
std::optional<ChainDpResult> chain_dp_optimum(const CostMatrices& costs, double mem_limit);

/// True when some 0/1 assignment of column i of Z satisfies every
/// order-preserving row of stage i, with P taken from `x`.
bool z_column_exists(const MiqpModel& model, std::vector<double> x, int stage);

/// Minimal CPLEX LP reader: enough structure to count what an export holds.
struct LpSummary {
  bool has_minimize = false;
  bool has_subject_to = false;
  bool has_bounds = false;
  bool has_binary = false;
  bool has_end = false;
  std::size_t objective_terms = 0;
  std::size_t rows = 0;
  std::map<std::string, std::size_t> rows_by_prefix;  // name up to the first '_' pair, e.g. "ord_a"
  std::size_t binaries = 0;
  std::size_t fixed_zero = 0;
  std::size_t continuous_bounds = 0;
};
LpSummary read_lp(const std::string& text);

/// Row-name prefix used by read_lp for a constraint name.
std::string row_prefix(const std::string& name);

}  // namespace uniplan::testing
