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

#include "uniplan/uop.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>

#include <fmt/format.h>

namespace uniplan {

std::vector<int> factors(int x) {
  std::vector<int> out;
  for (int d = 2; d <= x; ++d) {
    if (x % d == 0) out.push_back(d);
  }
  return out;
}

std::vector<std::pair<int, int>> sweep_configurations(int n, int mini_batch) {
  std::vector<std::pair<int, int>> out{{1, 1}};
  for (int deg : factors(n)) {
    for (int c : factors(mini_batch)) out.emplace_back(deg, c);
  }
  return out;
}

namespace {

struct ConfigRun {
  ConfigOutcome outcome;
  std::optional<Assignment> assignment;
  PlanContext context;
};

void atomic_min(std::atomic<double>& target, double value) {
  double cur = target.load();
  while (value < cur && !target.compare_exchange_weak(cur, value)) {
  }
}

ConfigRun run_config(const ComputationGraph& graph, const ClusterProfile& profile, int mini_batch, int deg, int c,
                     const OptimizeOptions& options, std::atomic<double>& best, std::mutex& callback_mutex) {
  ConfigRun run;
  run.outcome.deg = deg;
  run.outcome.c = c;
  // The single-stage program treats the whole batch as one micro-batch.
  run.context = make_context(profile.n, deg, mini_batch, c, options.precision, options.inflight_rule);

  CostMatrices costs;
  try {
    costs = build_cost_matrices(graph, profile, run.context);
  } catch (const NoFeasibleStrategyError& e) {
    run.outcome.stats.terminated_by = Termination::kInfeasible;
    run.outcome.stats.incumbent = run.outcome.stats.best_bound = kInfeasible;
    run.outcome.witness = e.what();
    return run;
  }
  const std::vector<double> limits = stage_memory_limits(profile, run.context);

  if (options.on_model) {
    MiqpModel model = deg == 1 ? build_qip(costs, graph, limits[0]) : build_miqp(costs, graph, run.context, limits);
    MilpModel milp = linearize(model);
    std::lock_guard lock(callback_mutex);
    options.on_model(run.context, milp);
  }

  Budget budget = options.budget;
  budget.jobs = 1;
  if (options.previous_best_cutoff) {
    const double b = best.load();
    if (std::isfinite(b)) budget.previous_best_cutoff = b;
  }
  SolveResult res = solve_exact(costs, graph, run.context, limits, budget);
  run.outcome.stats = res.stats;
  if (res.assignment) {
    run.outcome.objective = res.assignment->objective;
    atomic_min(best, res.assignment->objective);
    run.assignment = std::move(res.assignment);
  } else if (res.stats.terminated_by == Termination::kCutoff) {
    run.outcome.witness = "bound exceeds a plan from an earlier configuration";
  } else if (res.stats.terminated_by == Termination::kTimeLimit) {
    run.outcome.witness = "time limit reached without a feasible plan";
  } else {
    run.outcome.witness = fmt::format("{}: {}", res.witness_family, res.witness_detail);
  }
  return run;
}

}  // namespace

ParallelPlan unified_optimize(const ComputationGraph& graph, const ClusterProfile& profile, int mini_batch,
                              const OptimizeOptions& options) {
  if (mini_batch < 1) throw InputError("batch must be ≥ 1");
  if (auto violations = validate_graph(graph); !violations.empty()) {
    std::string msg = "invalid model graph:";
    for (const auto& v : violations) msg += fmt::format("\n  [{}] {}", v.kind, v.message);
    throw InputError(msg);
  }

  const auto configs = sweep_configurations(profile.n, mini_batch);
  std::vector<ConfigRun> runs(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<double> best{std::numeric_limits<double>::infinity()};
  std::mutex callback_mutex;

  const int jobs = std::max(1, options.jobs);
  const auto count = static_cast<std::ptrdiff_t>(configs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs) if (jobs > 1)
  for (std::ptrdiff_t idx = 0; idx < count; ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    try {
      runs[i] = run_config(graph, profile, mini_batch, configs[i].first, configs[i].second, options, best,
                           callback_mutex);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Ordered reduction: strict improvement only, so earlier configurations win ties.
  std::optional<std::size_t> winner;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i].assignment) continue;
    if (!winner || runs[i].assignment->objective < runs[*winner].assignment->objective) winner = i;
  }

  std::vector<ConfigOutcome> outcomes;
  outcomes.reserve(runs.size());
  for (const auto& r : runs) outcomes.push_back(r.outcome);

  if (!winner) {
    std::string msg = "no configuration admits a feasible plan:";
    for (const auto& o : outcomes) msg += fmt::format("\n  deg={} c={}: {}", o.deg, o.c, o.witness);
    throw InfeasibleError(msg, std::move(outcomes));
  }

  ParallelPlan plan;
  auto& w = runs[*winner];
  plan.deg = w.outcome.deg;
  plan.c = w.outcome.c;
  plan.context = w.context;
  plan.est_tpi = w.assignment->objective;
  plan.assignment = std::move(*w.assignment);
  plan.stats = std::move(outcomes);
  return plan;
}

}  // namespace uniplan
