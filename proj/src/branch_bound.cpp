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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "uniplan/solver.hpp"

namespace uniplan {

namespace {

using Clock = std::chrono::steady_clock;

// Ties must survive pruning so the lexicographic tie-break sees them; only
// subtrees strictly worse than a known objective are cut.
double prune_threshold(double value) { return value + 1e-11 * std::abs(value); }

void atomic_min(std::atomic<double>& target, double value) {
  double cur = target.load(std::memory_order_relaxed);
  while (value < cur && !target.compare_exchange_weak(cur, value, std::memory_order_relaxed)) {
  }
}

/// Problem data shared read-only by every search worker.
struct Problem {
  const CostMatrices& costs;
  std::span<const double> limits;
  int nv = 0;
  int deg = 1;
  int c = 1;
  double max_limit = 0.0;
  // (edge index, predecessor position) for each layer.
  std::vector<std::vector<std::pair<std::size_t, int>>> preds;
  std::vector<std::vector<int>> usable;  // strategies that fit some stage
  std::vector<double> rest;              // rest[u] = sum_{v >= u} min exec(v, .)

  Problem(const CostMatrices& cm, const PlanContext& ctx, std::span<const double> mem_limits)
      : costs(cm), limits(mem_limits), nv(static_cast<int>(cm.num_layers())), deg(ctx.deg), c(ctx.c) {
    max_limit = *std::max_element(limits.begin(), limits.end());
    preds.resize(static_cast<std::size_t>(nv));
    for (std::size_t e = 0; e < cm.edges.size(); ++e) {
      auto [u, v] = cm.edges[e];
      preds[v].emplace_back(e, static_cast<int>(u));
    }
    usable.resize(static_cast<std::size_t>(nv));
    rest.assign(static_cast<std::size_t>(nv) + 1, 0.0);
    std::vector<double> best(static_cast<std::size_t>(nv), 0.0);
    for (int u = 0; u < nv; ++u) {
      double lo = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < cm.num_strategies(); ++k) {
        const double m = cm.memory(static_cast<std::size_t>(u), k);
        if (m == kInfeasible || m > max_limit) continue;
        usable[static_cast<std::size_t>(u)].push_back(static_cast<int>(k));
        lo = std::min(lo, cm.exec(static_cast<std::size_t>(u), k));
      }
      best[static_cast<std::size_t>(u)] = lo;
    }
    for (int u = nv - 1; u >= 0; --u) {
      rest[static_cast<std::size_t>(u)] = rest[static_cast<std::size_t>(u) + 1] + best[static_cast<std::size_t>(u)];
    }
  }

  std::size_t num_boundaries() const { return static_cast<std::size_t>(deg - 1); }
};

/// Partial-assignment state for one depth-first worker.
class Search {
 public:
  Search(const Problem& pb, std::atomic<double>& incumbent, std::atomic<bool>& stop,
         std::optional<double> cutoff, Clock::time_point deadline)
      : pb_(pb), incumbent_(incumbent), stop_(stop), cutoff_(cutoff), deadline_(deadline) {
    const auto n = static_cast<std::size_t>(pb.nv);
    const auto d = static_cast<std::size_t>(pb.deg);
    stage_.assign(n, -1);
    strat_.assign(n, -1);
    // Level t holds the state after assigning layers [0, t).
    p_.assign((n + 1) * d, 0.0);
    o_.assign((n + 1) * pb.num_boundaries(), 0.0);
    mem_.assign((n + 1) * d, 0.0);
    used_.assign((n + 1) * d, 0);
  }

  /// Assigns layer `u` at level u -> u + 1. False when the move breaks
  /// memory, ordering or the every-stage-used requirement.
  bool apply(int u, int stage, int strategy) {
    const auto& cm = pb_.costs;
    const auto uz = static_cast<std::size_t>(u);
    const auto d = static_cast<std::size_t>(pb_.deg);
    const std::size_t nb = pb_.num_boundaries();
    const auto si = static_cast<std::size_t>(stage);
    const auto k = static_cast<std::size_t>(strategy);

    const double* mem_in = &mem_[uz * d];
    const double new_mem = mem_in[si] + cm.memory(uz, k);
    if (!(new_mem <= pb_.limits[si])) return false;

    const int* used_in = &used_[uz * d];
    int empty_after = 0;
    for (std::size_t i = 0; i < d; ++i) empty_after += (used_in[i] == 0 && i != si) ? 1 : 0;
    if (empty_after > pb_.nv - u - 1) return false;

    double* p = &p_[(uz + 1) * d];
    double* o = nb ? &o_[(uz + 1) * nb] : nullptr;
    std::copy_n(&p_[uz * d], d, p);
    if (nb) std::copy_n(&o_[uz * nb], nb, o);
    std::copy_n(mem_in, d, &mem_[(uz + 1) * d]);
    std::copy_n(used_in, d, &used_[(uz + 1) * d]);
    mem_[(uz + 1) * d + si] = new_mem;
    used_[(uz + 1) * d + si] += 1;

    p[si] += cm.exec(uz, k);
    for (auto [e, w] : pb_.preds[uz]) {
      const int sw = stage_[static_cast<std::size_t>(w)];
      const auto kw = static_cast<std::size_t>(strat_[static_cast<std::size_t>(w)]);
      if (sw == stage) {
        p[si] += cm.reshard[e](kw, k);
      } else {
        for (int j = sw; j < stage; ++j) o[static_cast<std::size_t>(j)] += cm.cross[e](kw, k);
      }
    }
    stage_[uz] = stage;
    strat_[uz] = strategy;
    return true;
  }

  /// Lower bound on any completion of the first `level` layers.
  double bound(int level) const {
    const auto lz = static_cast<std::size_t>(level);
    const auto d = static_cast<std::size_t>(pb_.deg);
    const std::size_t nb = pb_.num_boundaries();
    const double rest = pb_.rest[lz];
    double sum_p = 0.0;
    double sum_o = 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      sum_p += p_[lz * d + i];
      worst = std::max(worst, p_[lz * d + i]);
    }
    for (std::size_t j = 0; j < nb; ++j) {
      sum_o += o_[lz * nb + j];
      worst = std::max(worst, o_[lz * nb + j]);
    }
    // Remaining layers add at least their cheapest exec cost to some stage,
    // so the largest final stage is at least the average.
    worst = std::max(worst, (sum_p + rest) / pb_.deg);
    return sum_p + sum_o + rest + (pb_.c - 1) * worst;
  }

  void run(int level) {
    if (stop_.load(std::memory_order_relaxed)) {
      open_bound_ = std::min(open_bound_, bound(level));
      return;
    }
    ++nodes_;
    if ((nodes_ & 1023u) == 0 && Clock::now() >= deadline_) {
      stop_.store(true, std::memory_order_relaxed);
      open_bound_ = std::min(open_bound_, bound(level));
      return;
    }
    if (level == pb_.nv) {
      leaf();
      return;
    }
    const auto uz = static_cast<std::size_t>(level);
    int lo = 0;
    for (auto [e, w] : pb_.preds[uz]) lo = std::max(lo, stage_[static_cast<std::size_t>(w)]);
    for (int i = lo; i < pb_.deg; ++i) {
      for (int k : pb_.usable[uz]) {
        if (!apply(level, i, k)) continue;
        const double b = bound(level + 1);
        if (stop_.load(std::memory_order_relaxed)) {
          open_bound_ = std::min(open_bound_, b);
          continue;
        }
        if (b > prune_threshold(incumbent_.load(std::memory_order_relaxed))) continue;
        if (cutoff_ && b > prune_threshold(*cutoff_)) {
          cut_by_cutoff_ = true;
          continue;
        }
        run(level + 1);
      }
    }
  }

  std::optional<Assignment>& best() { return best_; }
  std::uint64_t nodes() const { return nodes_; }
  double open_bound() const { return open_bound_; }
  bool cut_by_cutoff() const { return cut_by_cutoff_; }
  void note_open(double b) { open_bound_ = std::min(open_bound_, b); }

 private:
  void leaf() {
    const auto d = static_cast<std::size_t>(pb_.deg);
    const auto n = static_cast<std::size_t>(pb_.nv);
    for (std::size_t i = 0; i < d; ++i) {
      if (used_[n * d + i] == 0) return;
    }
    Assignment a;
    a.stage_of = stage_;
    a.strategy_of = strat_;
    fill_costs(a, pb_.costs, pb_.deg, pb_.c);
    if (!best_ || a.objective < best_->objective ||
        (a.objective == best_->objective && tie_break_less(a, *best_))) {
      atomic_min(incumbent_, a.objective);
      best_ = std::move(a);
    }
  }

  const Problem& pb_;
  std::atomic<double>& incumbent_;
  std::atomic<bool>& stop_;
  std::optional<double> cutoff_;
  Clock::time_point deadline_;

  std::vector<int> stage_;
  std::vector<int> strat_;
  std::vector<double> p_;
  std::vector<double> o_;
  std::vector<double> mem_;
  std::vector<int> used_;

  std::optional<Assignment> best_;
  std::uint64_t nodes_ = 0;
  double open_bound_ = std::numeric_limits<double>::infinity();
  bool cut_by_cutoff_ = false;
};

struct Prefix {
  std::vector<std::pair<int, int>> moves;  // (stage, strategy) for layers 0..
};

// Feasible prefixes of length `depth`, in search order.
std::vector<Prefix> frontier(const Problem& pb, int depth) {
  std::vector<Prefix> out{Prefix{}};
  for (int level = 0; level < depth; ++level) {
    std::vector<Prefix> next;
    for (const auto& pre : out) {
      int lo = 0;
      for (auto [e, w] : pb.preds[static_cast<std::size_t>(level)]) {
        lo = std::max(lo, pre.moves[static_cast<std::size_t>(w)].first);
      }
      for (int i = lo; i < pb.deg; ++i) {
        for (int k : pb.usable[static_cast<std::size_t>(level)]) {
          Prefix child = pre;
          child.moves.emplace_back(i, k);
          next.push_back(std::move(child));
        }
      }
    }
    out = std::move(next);
  }
  return out;
}

void fill_witness(SolveResult& r, const Problem& pb, const ComputationGraph& graph) {
  r.witness_family = "memory";
  if (pb.deg > pb.nv) {
    r.witness_family = "layer_placement";
    r.witness_detail = fmt::format("{} stages need at least {} layers, model has {}", pb.deg, pb.deg, pb.nv);
    return;
  }
  for (int u = 0; u < pb.nv; ++u) {
    if (pb.usable[static_cast<std::size_t>(u)].empty()) {
      r.witness_detail = fmt::format("layer {} exceeds every per-stage memory limit under all strategies",
                                     graph.nodes[static_cast<std::size_t>(u)].id);
      return;
    }
  }
  r.witness_detail = "no placement fits the per-stage memory limits";
}

}  // namespace

double partial_lower_bound(const CostMatrices& costs, const PlanContext& ctx, std::span<const double> mem_limits,
                           std::span<const int> stage_of, std::span<const int> strategy_of) {
  Problem pb(costs, ctx, mem_limits);
  const int m = static_cast<int>(stage_of.size());
  const auto d = static_cast<std::size_t>(ctx.deg);
  std::vector<double> p(d, 0.0);
  std::vector<double> o(pb.num_boundaries(), 0.0);
  for (int u = 0; u < m; ++u) {
    p[static_cast<std::size_t>(stage_of[static_cast<std::size_t>(u)])] +=
        costs.exec(static_cast<std::size_t>(u), static_cast<std::size_t>(strategy_of[static_cast<std::size_t>(u)]));
  }
  for (std::size_t e = 0; e < costs.edges.size(); ++e) {
    auto [u, v] = costs.edges[e];
    if (static_cast<int>(v) >= m || static_cast<int>(u) >= m) continue;
    const int su = stage_of[u];
    const int sv = stage_of[v];
    const auto k = static_cast<std::size_t>(strategy_of[u]);
    const auto l = static_cast<std::size_t>(strategy_of[v]);
    if (su == sv) {
      p[static_cast<std::size_t>(su)] += costs.reshard[e](k, l);
    } else {
      for (int j = su; j < sv; ++j) o[static_cast<std::size_t>(j)] += costs.cross[e](k, l);
    }
  }
  double sum_p = 0.0;
  double sum_o = 0.0;
  double worst = 0.0;
  for (double x : p) {
    sum_p += x;
    worst = std::max(worst, x);
  }
  for (double x : o) {
    sum_o += x;
    worst = std::max(worst, x);
  }
  const double rest = pb.rest[static_cast<std::size_t>(m)];
  worst = std::max(worst, (sum_p + rest) / ctx.deg);
  return sum_p + sum_o + rest + (ctx.c - 1) * worst;
}

SolveResult solve_exact(const CostMatrices& costs, const ComputationGraph& graph, const PlanContext& ctx,
                        std::span<const double> mem_limits, const Budget& budget) {
  if (costs.num_layers() != graph.size() || costs.edges.size() != graph.edges.size()) {
    throw InputError("cost matrices do not match the graph");
  }
  if (ctx.deg < 1) throw InputError("pipeline degree must be >= 1");
  if (mem_limits.size() != static_cast<std::size_t>(ctx.deg)) {
    throw InputError(fmt::format("expected {} per-stage memory limits, got {}", ctx.deg, mem_limits.size()));
  }

  const auto start = Clock::now();
  const auto deadline =
      start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(budget.time_limit_s));
  Problem pb(costs, ctx, mem_limits);
  SolveResult result;

  bool any_usable_missing = false;
  for (const auto& u : pb.usable) any_usable_missing = any_usable_missing || u.empty();
  if (pb.deg > pb.nv || any_usable_missing) {
    result.stats.terminated_by = Termination::kInfeasible;
    result.stats.incumbent = result.stats.best_bound = kInfeasible;
    fill_witness(result, pb, graph);
    return result;
  }

  std::atomic<double> incumbent{std::numeric_limits<double>::infinity()};
  std::atomic<bool> stop{false};

  const int jobs = std::max(1, budget.jobs);
  std::vector<Prefix> tasks =
      jobs > 1 ? frontier(pb, std::min(pb.nv, 2)) : std::vector<Prefix>{Prefix{}};
  std::vector<std::optional<Assignment>> bests(tasks.size());
  std::vector<std::uint64_t> nodes(tasks.size(), 0);
  std::vector<double> open(tasks.size(), std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> cut(tasks.size(), 0);

  const auto ntasks = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs) if (jobs > 1)
  for (std::ptrdiff_t t = 0; t < ntasks; ++t) {
    Search search(pb, incumbent, stop, budget.previous_best_cutoff, deadline);
    const auto& moves = tasks[static_cast<std::size_t>(t)].moves;
    bool ok = true;
    for (std::size_t u = 0; u < moves.size() && ok; ++u) {
      ok = search.apply(static_cast<int>(u), moves[u].first, moves[u].second);
    }
    if (ok) {
      const int level = static_cast<int>(moves.size());
      const double b = search.bound(level);
      if (stop.load(std::memory_order_relaxed)) {
        search.note_open(b);
      } else if (budget.previous_best_cutoff && b > prune_threshold(*budget.previous_best_cutoff)) {
        cut[static_cast<std::size_t>(t)] = 1;
      } else if (b <= prune_threshold(incumbent.load(std::memory_order_relaxed))) {
        search.run(level);
      }
    }
    bests[static_cast<std::size_t>(t)] = std::move(search.best());
    nodes[static_cast<std::size_t>(t)] = search.nodes();
    open[static_cast<std::size_t>(t)] = search.open_bound();
    cut[static_cast<std::size_t>(t)] |= search.cut_by_cutoff() ? 1 : 0;
  }

  // Deterministic reduction in task order.
  bool any_cut = false;
  double open_bound = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    result.stats.nodes_explored += nodes[t];
    open_bound = std::min(open_bound, open[t]);
    any_cut = any_cut || cut[t];
    auto& cand = bests[t];
    if (!cand) continue;
    if (!result.assignment || cand->objective < result.assignment->objective ||
        (cand->objective == result.assignment->objective && tie_break_less(*cand, *result.assignment))) {
      result.assignment = std::move(cand);
    }
  }

  auto& st = result.stats;
  st.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
  const bool stopped = stop.load();
  if (result.assignment) {
    st.incumbent = result.assignment->objective;
    st.best_bound = stopped ? std::min(open_bound, st.incumbent) : st.incumbent;
    st.gap = (st.incumbent - st.best_bound) / std::max(st.incumbent, 1e-12);
    st.terminated_by = (!stopped || st.gap <= budget.gap_tol) ? Termination::kOptimal : Termination::kTimeLimit;
  } else if (stopped) {
    st.incumbent = kInfeasible;
    st.best_bound = open_bound;
    st.gap = 1.0;
    st.terminated_by = Termination::kTimeLimit;
  } else if (any_cut) {
    st.incumbent = kInfeasible;
    st.best_bound = *budget.previous_best_cutoff;
    st.gap = 1.0;
    st.terminated_by = Termination::kCutoff;
  } else {
    st.incumbent = st.best_bound = kInfeasible;
    st.terminated_by = Termination::kInfeasible;
    fill_witness(result, pb, graph);
  }
  return result;
}

}  // namespace uniplan
