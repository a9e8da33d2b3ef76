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

// Direct evaluation of placements: objective, constraint checks and the
// brute-force reference solver.

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "uniplan/solver.hpp"

namespace uniplan {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kOptimal:
      return "optimal";
    case Termination::kTimeLimit:
      return "time_limit";
    case Termination::kInfeasible:
      return "infeasible";
    case Termination::kCutoff:
      return "cutoff";
  }
  return "unknown";
}

Evaluation evaluate(const CostMatrices& costs, int deg, int c, std::span<const int> stage_of,
                    std::span<const int> strategy_of) {
  Evaluation ev;
  ev.stage.assign(static_cast<std::size_t>(deg), 0.0);
  ev.boundary.assign(static_cast<std::size_t>(std::max(deg - 1, 0)), 0.0);
  ev.memory.assign(static_cast<std::size_t>(deg), 0.0);

  const std::size_t nv = costs.num_layers();
  for (std::size_t u = 0; u < nv; ++u) {
    const auto i = static_cast<std::size_t>(stage_of[u]);
    const auto k = static_cast<std::size_t>(strategy_of[u]);
    ev.stage[i] += costs.exec(u, k);
    ev.memory[i] += costs.memory(u, k);
  }
  for (std::size_t e = 0; e < costs.edges.size(); ++e) {
    const auto [u, v] = costs.edges[e];
    const int su = stage_of[u];
    const int sv = stage_of[v];
    const auto k = static_cast<std::size_t>(strategy_of[u]);
    const auto l = static_cast<std::size_t>(strategy_of[v]);
    if (su == sv) {
      ev.stage[static_cast<std::size_t>(su)] += costs.reshard[e](k, l);
    } else if (su < sv) {
      for (int j = su; j < sv; ++j) ev.boundary[static_cast<std::size_t>(j)] += costs.cross[e](k, l);
    }
  }

  double total = 0.0;
  double worst = 0.0;
  for (double p : ev.stage) {
    total += p;
    worst = std::max(worst, p);
  }
  for (double o : ev.boundary) {
    total += o;
    worst = std::max(worst, o);
  }
  ev.objective = total + (c - 1) * worst;
  return ev;
}

void fill_costs(Assignment& a, const CostMatrices& costs, int deg, int c) {
  Evaluation ev = evaluate(costs, deg, c, a.stage_of, a.strategy_of);
  a.objective = ev.objective;
  a.per_stage_cost = std::move(ev.stage);
  a.per_boundary_cost = std::move(ev.boundary);
  a.per_stage_memory = std::move(ev.memory);
}

bool tie_break_less(const Assignment& a, const Assignment& b) {
  if (a.stage_of != b.stage_of) return a.stage_of < b.stage_of;
  return a.strategy_of < b.strategy_of;
}

std::vector<double> stage_memory_limits(const ClusterProfile& profile, const PlanContext& ctx) {
  std::vector<double> limits;
  limits.reserve(static_cast<std::size_t>(ctx.deg));
  for (int i = 0; i < ctx.deg; ++i) {
    limits.push_back(profile.min_memory(i * ctx.per_stage_devices, ctx.per_stage_devices));
  }
  return limits;
}

namespace {

void check_shapes(const CostMatrices& costs, const ComputationGraph& graph, const PlanContext& ctx,
                  std::span<const double> mem_limits) {
  if (costs.num_layers() != graph.size()) {
    throw InputError(fmt::format("cost matrices cover {} layers, graph has {}", costs.num_layers(), graph.size()));
  }
  if (costs.edges.size() != graph.edges.size()) throw InputError("cost matrices and graph disagree on edges");
  if (ctx.deg < 1) throw InputError("pipeline degree must be >= 1");
  if (mem_limits.size() != static_cast<std::size_t>(ctx.deg)) {
    throw InputError(fmt::format("expected {} per-stage memory limits, got {}", ctx.deg, mem_limits.size()));
  }
}

// Literal placement checks: every stage used, each stage set
// contiguous, and no edge pointing to an earlier stage.
bool placement_ok(const ComputationGraph&, const Reachability& reach,
                  const std::vector<std::pair<std::size_t, std::size_t>>& edges, std::span<const int> stage_of,
                  int deg) {
  const std::size_t nv = stage_of.size();
  std::vector<std::uint8_t> member(nv);
  for (int i = 0; i < deg; ++i) {
    bool used = false;
    for (std::size_t u = 0; u < nv; ++u) {
      member[u] = stage_of[u] == i ? 1 : 0;
      used = used || member[u];
    }
    if (!used) return false;
    if (!is_contiguous_positions(reach, member)) return false;
  }
  for (auto [u, v] : edges) {
    if (stage_of[u] > stage_of[v]) return false;
  }
  return true;
}

// Advances a base-`radix` odometer (last digit fastest). False on wrap.
bool next_lex(std::vector<int>& digits, int radix) {
  for (std::size_t pos = digits.size(); pos-- > 0;) {
    if (++digits[pos] < radix) return true;
    digits[pos] = 0;
  }
  return false;
}

}  // namespace

SolveResult solve_exhaustive(const CostMatrices& costs, const ComputationGraph& graph, const PlanContext& ctx,
                             std::span<const double> mem_limits) {
  check_shapes(costs, graph, ctx, mem_limits);
  const auto start = std::chrono::steady_clock::now();
  const std::size_t nv = graph.size();
  const int ns = static_cast<int>(costs.num_strategies());
  const double count = std::pow(static_cast<double>(ns), static_cast<double>(nv)) *
                       std::pow(static_cast<double>(ctx.deg), static_cast<double>(nv));
  if (nv > 8 || count > kExhaustiveLimit) {
    throw InputError(fmt::format(
        "refusing exhaustive enumeration: |V| = {} (max 8), |S|^|V| * deg^|V| = {:.0f} (max {:.0f})", nv, count,
        kExhaustiveLimit));
  }

  SolveResult result;
  Reachability reach(graph);
  std::vector<int> stage_of(nv, 0);
  bool any_placement = false;
  do {
    if (!placement_ok(graph, reach, costs.edges, stage_of, ctx.deg)) continue;
    any_placement = true;
    std::vector<int> strategy_of(nv, 0);
    do {
      bool usable = true;
      for (std::size_t u = 0; u < nv && usable; ++u) {
        usable = costs.feasible(u, static_cast<std::size_t>(strategy_of[u]));
      }
      if (!usable) continue;
      Evaluation ev = evaluate(costs, ctx.deg, ctx.c, stage_of, strategy_of);
      bool fits = true;
      for (int i = 0; i < ctx.deg && fits; ++i) {
        fits = ev.memory[static_cast<std::size_t>(i)] <= mem_limits[static_cast<std::size_t>(i)];
      }
      if (!fits) continue;
      ++result.stats.nodes_explored;
      if (!result.assignment || ev.objective < result.assignment->objective) {
        Assignment a;
        a.stage_of = stage_of;
        a.strategy_of = strategy_of;
        a.objective = ev.objective;
        a.per_stage_cost = std::move(ev.stage);
        a.per_boundary_cost = std::move(ev.boundary);
        a.per_stage_memory = std::move(ev.memory);
        result.assignment = std::move(a);
      }
    } while (next_lex(strategy_of, ns));
  } while (next_lex(stage_of, ctx.deg));

  result.stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (result.assignment) {
    result.stats.incumbent = result.stats.best_bound = result.assignment->objective;
    result.stats.terminated_by = Termination::kOptimal;
  } else {
    result.stats.incumbent = result.stats.best_bound = kInfeasible;
    result.stats.terminated_by = Termination::kInfeasible;
    result.witness_family = any_placement ? "memory" : "layer_placement";
    result.witness_detail = any_placement ? "every valid placement exceeds a per-stage memory limit"
                                          : "no placement puts at least one layer on every stage";
  }
  return result;
}

std::vector<Violation> check_assignment(const Assignment& a, const CostMatrices& costs,
                                        const ComputationGraph& graph, const PlanContext& ctx,
                                        std::span<const double> mem_limits) {
  check_shapes(costs, graph, ctx, mem_limits);
  std::vector<Violation> out;
  const std::size_t nv = graph.size();
  const int ns = static_cast<int>(costs.num_strategies());

  if (a.stage_of.size() != nv || a.strategy_of.size() != nv) {
    out.push_back({"shape",
                   fmt::format("assignment covers {}/{} layers, graph has {}", a.stage_of.size(),
                               a.strategy_of.size(), nv),
                   0.0});
    return out;
  }
  bool indices_ok = true;
  for (std::size_t u = 0; u < nv; ++u) {
    if (a.stage_of[u] < 0 || a.stage_of[u] >= ctx.deg) {
      out.push_back({"layer_placement",
                     fmt::format("layer {} placed on stage {} outside [0, {})", graph.nodes[u].id, a.stage_of[u],
                                 ctx.deg),
                     0.0});
      indices_ok = false;
    }
    if (a.strategy_of[u] < 0 || a.strategy_of[u] >= ns) {
      out.push_back({"strategy_selection",
                     fmt::format("layer {} selects strategy {} outside [0, {})", graph.nodes[u].id,
                                 a.strategy_of[u], ns),
                     0.0});
      indices_ok = false;
    }
  }
  if (!indices_ok) return out;

  for (std::size_t u = 0; u < nv; ++u) {
    if (!costs.feasible(u, static_cast<std::size_t>(a.strategy_of[u]))) {
      out.push_back({"strategy_selection",
                     fmt::format("layer {} selects {} which cannot split micro-batch {}", graph.nodes[u].id,
                                 to_string(costs.space[static_cast<std::size_t>(a.strategy_of[u])]),
                                 ctx.micro_batch),
                     0.0});
    }
  }

  Reachability reach(graph);
  std::vector<std::uint8_t> member(nv);
  for (int i = 0; i < ctx.deg; ++i) {
    std::size_t used = 0;
    for (std::size_t u = 0; u < nv; ++u) {
      member[u] = a.stage_of[u] == i ? 1 : 0;
      used += member[u];
    }
    if (used == 0) {
      out.push_back({"layer_placement", fmt::format("stage {} has no layers", i), 1.0});
    } else if (!is_contiguous_positions(reach, member)) {
      out.push_back({"order_preserving", fmt::format("stage {} is not a contiguous layer set", i), 0.0});
    }
  }
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    auto [u, v] = costs.edges[e];
    if (a.stage_of[u] > a.stage_of[v]) {
      out.push_back({"order_preserving",
                     fmt::format("edge ({},{}) runs from stage {} back to stage {}", graph.edges[e].src,
                                 graph.edges[e].dst, a.stage_of[u], a.stage_of[v]),
                     static_cast<double>(a.stage_of[u] - a.stage_of[v])});
    }
  }

  Evaluation ev = evaluate(costs, ctx.deg, ctx.c, a.stage_of, a.strategy_of);
  for (int i = 0; i < ctx.deg; ++i) {
    const double used = ev.memory[static_cast<std::size_t>(i)];
    const double limit = mem_limits[static_cast<std::size_t>(i)];
    if (!(used <= limit)) {
      out.push_back({"memory", fmt::format("stage {} needs {:.6g} bytes, limit {:.6g}", i, used, limit),
                     used - limit});
    }
  }

  const double tol = 1e-9 * std::max(1.0, std::abs(ev.objective));
  if (!(std::abs(ev.objective - a.objective) <= tol)) {
    out.push_back({"objective",
                   fmt::format("objective mismatch: stored {:.12g}, recomputed {:.12g}", a.objective, ev.objective),
                   a.objective - ev.objective});
  }
  return out;
}

}  // namespace uniplan
