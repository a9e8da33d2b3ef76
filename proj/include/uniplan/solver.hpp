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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uniplan/cost_model.hpp"
#include "uniplan/graph.hpp"

namespace uniplan {

/// Placement and strategy choice for every layer, indexed by layer position.
/// Stages, boundaries and strategies are 0-based here.
struct Assignment {
  std::vector<int> stage_of;
  std::vector<int> strategy_of;
  double objective = 0.0;
  std::vector<double> per_stage_cost;
  std::vector<double> per_boundary_cost;
  std::vector<double> per_stage_memory;
};

/// Stage, boundary and memory totals of a candidate, plus the pipeline
/// objective sum(p) + sum(o) + (c - 1) * max(p u o).
///
/// An edge (u, v) with both ends on stage i adds its resharding cost to p_i.
/// An edge from stage i to stage m > i adds its cross-stage cost to every
/// boundary j with i <= j < m; for adjacent stages this is the plain
/// consecutive-stage term.
struct Evaluation {
  std::vector<double> stage;
  std::vector<double> boundary;
  std::vector<double> memory;
  double objective = 0.0;
};

Evaluation evaluate(const CostMatrices& costs, int deg, int c, std::span<const int> stage_of,
                    std::span<const int> strategy_of);

/// Fills objective and per-stage fields of `a` from its placement.
void fill_costs(Assignment& a, const CostMatrices& costs, int deg, int c);

/// Lexicographic (stage_of, strategy_of) order used to break objective ties.
bool tie_break_less(const Assignment& a, const Assignment& b);

/// Per-stage memory limits: stage i runs on devices [i*g, (i+1)*g) and gets
/// the smallest memory among them.
std::vector<double> stage_memory_limits(const ClusterProfile& profile, const PlanContext& ctx);

struct Budget {
  double time_limit_s = 60.0;
  double gap_tol = 1e-4;
  // Subtrees whose bound exceeds this value are skipped.
  std::optional<double> previous_best_cutoff;
  int jobs = 1;
};

enum class Termination { kOptimal, kTimeLimit, kInfeasible, kCutoff };
std::string to_string(Termination t);

struct SolveStats {
  std::uint64_t nodes_explored = 0;
  double best_bound = 0.0;
  double incumbent = 0.0;
  double gap = 0.0;
  double wall_time = 0.0;
  Termination terminated_by = Termination::kOptimal;
};

struct SolveResult {
  std::optional<Assignment> assignment;
  SolveStats stats;
  // Set when no assignment exists: the constraint family that rules every
  // candidate out, with a human-readable explanation.
  std::string witness_family;
  std::string witness_detail;
};

/// Branch-and-bound over (stage, strategy) per layer in topological order.
/// Returns the optimum with the lexicographic tie-break when the search
/// completes. `budget.jobs > 1` explores root subtrees with OpenMP; the
/// result does not depend on the thread count.
SolveResult solve_exact(const CostMatrices& costs, const ComputationGraph& graph, const PlanContext& ctx,
                        std::span<const double> mem_limits, const Budget& budget = {});

/// Lower bound the search uses for a partial assignment of the first
/// `stage_of.size()` layers. Exposed for admissibility tests.
double partial_lower_bound(const CostMatrices& costs, const PlanContext& ctx, std::span<const double> mem_limits,
                           std::span<const int> stage_of, std::span<const int> strategy_of);

inline constexpr double kExhaustiveLimit = 1e7;

/// Brute-force reference: every placement x strategy vector in lexicographic
/// order, constraints evaluated literally. Throws InputError when |V| > 8 or
/// the candidate count exceeds kExhaustiveLimit.
SolveResult solve_exhaustive(const CostMatrices& costs, const ComputationGraph& graph, const PlanContext& ctx,
                             std::span<const double> mem_limits);

struct Violation {
  std::string family;  // layer_placement, order_preserving, memory, ...
  std::string message;
  double margin = 0.0;
};

/// Empty when `a` satisfies every constraint family and its stored
/// objective matches a fresh evaluation within 1e-9.
std::vector<Violation> check_assignment(const Assignment& a, const CostMatrices& costs,
                                        const ComputationGraph& graph, const PlanContext& ctx,
                                        std::span<const double> mem_limits);

}  // namespace uniplan
