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

#include "support.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "uniplan/solver.hpp"

namespace uniplan::testing {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

LayerNode random_layer(Rng& rng, int id) {
  LayerNode n;
  n.id = id;
  n.kind = "block";
  const double t1 = uniform(rng, 1e-4, 2e-3);
  const double act = uniform(rng, 1e6, 1e7);
  const double loss = uniform(rng, 0.0, 0.3);
  for (int tp = 1; tp <= 8; tp *= 2) {
    n.fwd_time_per_sample[tp] = t1 / tp * (1.0 + loss * (tp - 1));
    n.act_bytes_per_sample[tp] = act / tp;
  }
  n.param_bytes = uniform(rng, 1e6, 1e8);
  n.ctx_bytes = uniform(rng, 0.0, 5e7);
  n.tp_comm_bytes_per_sample = uniform(rng, 0.0, 4e6);
  return n;
}

ComputationGraph random_chain(Rng& rng, int nv) {
  ComputationGraph g;
  for (int v = 0; v < nv; ++v) {
    g.nodes.push_back(random_layer(rng, v));
    if (v > 0) g.edges.push_back({v - 1, v, uniform(rng, 1e5, 5e6)});
  }
  return g;
}

ComputationGraph random_dag(Rng& rng, int nv, double extra) {
  ComputationGraph g;
  for (int v = 0; v < nv; ++v) {
    g.nodes.push_back(random_layer(rng, v));
    if (v == 0) continue;
    const int anchor = uniform_int(rng, 0, v - 1);
    for (int u = 0; u < v; ++u) {
      if (u == anchor || uniform(rng, 0.0, 1.0) < extra) g.edges.push_back({u, v, uniform(rng, 1e5, 5e6)});
    }
  }
  return g;
}

Instance random_instance(Rng& rng, ComputationGraph graph, int n, int mini_batch, int deg, int c) {
  Instance inst;
  inst.graph = std::move(graph);
  inst.profile = synth_profile(n, uniform(rng, 5e9, 5e10), uniform(rng, 0.0, 2e-5), 1.0, uniform(rng, 0.0, 1.0));
  for (auto& [g, bw] : inst.profile.allreduce_bw) bw *= uniform(rng, 0.7, 1.0);
  inst.profile.p2p_bw_default *= uniform(rng, 0.5, 1.0);
  inst.ctx = make_context(n, deg, mini_batch, c);
  inst.costs = build_cost_matrices(inst.graph, inst.profile, inst.ctx);

  // Memory: around the cheapest per-stage share, with per-device jitter.
  double cheapest = 0.0;
  for (std::size_t u = 0; u < inst.costs.num_layers(); ++u) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < inst.costs.num_strategies(); ++k) best = std::min(best, inst.costs.memory(u, k));
    cheapest += best;
  }
  const double base = cheapest / deg * uniform(rng, 0.9, 3.0);
  inst.profile.mem_bytes_per_device.clear();
  for (int d = 0; d < n; ++d) inst.profile.mem_bytes_per_device.push_back(base * uniform(rng, 0.85, 1.15));
  inst.limits = stage_memory_limits(inst.profile, inst.ctx);
  return inst;
}

CostMatrices random_costs(Rng& rng, const ComputationGraph& graph, std::vector<IntraStrategy> strategies,
                          double infeasible) {
  CostMatrices cm;
  cm.space.per_stage_devices = strategies.front().dp * strategies.front().tp;
  cm.space.strategies = std::move(strategies);
  cm.edges = graph.edge_positions();
  const std::size_t nv = graph.size();
  const std::size_t ns = cm.space.size();
  cm.exec = Matrix(nv, ns);
  cm.memory = Matrix(nv, ns);
  for (std::size_t u = 0; u < nv; ++u) {
    std::vector<bool> off(ns);
    for (std::size_t k = 0; k < ns; ++k) off[k] = uniform(rng, 0.0, 1.0) < infeasible;
    if (std::all_of(off.begin(), off.end(), [](bool b) { return b; })) {
      off[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(ns) - 1))] = false;
    }
    for (std::size_t k = 0; k < ns; ++k) {
      cm.exec(u, k) = off[k] ? 0.0 : uniform(rng, 0.1, 1.0);
      cm.memory(u, k) = off[k] ? kInfeasible : uniform(rng, 1.0, 10.0);
    }
  }
  for (std::size_t e = 0; e < cm.edges.size(); ++e) {
    Matrix same(ns, ns);
    Matrix across(ns, ns);
    for (std::size_t k = 0; k < ns; ++k) {
      for (std::size_t l = 0; l < ns; ++l) {
        same(k, l) = k == l ? 0.0 : uniform(rng, 0.0, 0.5);
        across(k, l) = uniform(rng, 0.0, 0.3);
      }
    }
    cm.reshard.push_back(std::move(same));
    cm.cross.push_back(std::move(across));
  }
  return cm;
}

std::optional<ChainDpResult> chain_dp_optimum(const CostMatrices& costs, double mem_limit) {
  const std::size_t nv = costs.num_layers();
  const std::size_t ns = costs.num_strategies();
  if (nv == 0) return std::nullopt;
  // Edge feeding layer u, which must be (u - 1, u) for a chain.
  std::vector<std::size_t> in_edge(nv, 0);
  for (std::size_t e = 0; e < costs.edges.size(); ++e) {
    auto [a, b] = costs.edges[e];
    if (a + 1 != b) throw std::invalid_argument("chain_dp_optimum needs a chain in position order");
    in_edge[b] = e;
  }
  if (costs.edges.size() + 1 != nv) throw std::invalid_argument("chain_dp_optimum needs a chain");

  struct Entry {
    double time;
    double mem;
    int prev_k;
    int prev_idx;
  };
  // frontier[u][k]: Pareto set of (time, mem) over strategy prefixes ending in k.
  std::vector<std::vector<std::vector<Entry>>> frontier(nv, std::vector<std::vector<Entry>>(ns));

  auto prune = [&](std::vector<Entry>& list) {
    std::sort(list.begin(), list.end(), [](const Entry& a, const Entry& b) {
      return a.time != b.time ? a.time < b.time : a.mem < b.mem;
    });
    std::vector<Entry> kept;
    double best_mem = std::numeric_limits<double>::infinity();
    for (const auto& en : list) {
      if (en.mem < best_mem) {
        kept.push_back(en);
        best_mem = en.mem;
      }
    }
    list = std::move(kept);
  };

  for (std::size_t k = 0; k < ns; ++k) {
    if (!costs.feasible(0, k) || costs.memory(0, k) > mem_limit) continue;
    frontier[0][k].push_back({costs.exec(0, k), costs.memory(0, k), -1, -1});
  }
  for (std::size_t u = 1; u < nv; ++u) {
    const Matrix& r = costs.reshard[in_edge[u]];
    for (std::size_t k = 0; k < ns; ++k) {
      if (!costs.feasible(u, k)) continue;
      auto& out = frontier[u][k];
      for (std::size_t l = 0; l < ns; ++l) {
        const auto& prev = frontier[u - 1][l];
        for (std::size_t i = 0; i < prev.size(); ++i) {
          const double mem = prev[i].mem + costs.memory(u, k);
          if (mem > mem_limit) continue;
          out.push_back({prev[i].time + r(l, k) + costs.exec(u, k), mem, static_cast<int>(l), static_cast<int>(i)});
        }
      }
      prune(out);
    }
  }

  std::optional<ChainDpResult> best;
  int best_k = -1;
  int best_i = -1;
  for (std::size_t k = 0; k < ns; ++k) {
    const auto& list = frontier[nv - 1][k];
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!best || list[i].time < best->objective) {
        best = ChainDpResult{list[i].time, {}};
        best_k = static_cast<int>(k);
        best_i = static_cast<int>(i);
      }
    }
  }
  if (!best) return std::nullopt;
  best->strategy_of.assign(nv, 0);
  for (std::size_t u = nv; u-- > 0;) {
    best->strategy_of[u] = best_k;
    const Entry& en = frontier[u][static_cast<std::size_t>(best_k)][static_cast<std::size_t>(best_i)];
    best_k = en.prev_k;
    best_i = en.prev_idx;
  }
  return best;
}

bool z_column_exists(const MiqpModel& model, std::vector<double> x, int stage) {
  std::vector<const Constraint*> rows;
  for (const auto& row : model.constraints) {
    if (row.family == Family::kOrderPreserving && row.stage == stage) rows.push_back(&row);
  }
  const std::size_t nv = model.num_layers;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nv); ++mask) {
    for (std::size_t u = 0; u < nv; ++u) {
      x[static_cast<std::size_t>(model.Z_at(u, stage))] = (mask >> u) & 1U ? 1.0 : 0.0;
    }
    bool ok = true;
    for (const Constraint* row : rows) {
      if (!model.satisfied(*row, x)) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

std::string row_prefix(const std::string& name) {
  std::string out;
  std::istringstream in(name);
  std::string token;
  while (std::getline(in, token, '_')) {
    if (token.empty() || std::isdigit(static_cast<unsigned char>(token[0]))) break;
    if (!out.empty()) out += '_';
    out += token;
  }
  return out;
}

LpSummary read_lp(const std::string& text) {
  LpSummary s;
  enum class Section { kNone, kObjective, kRows, kBounds, kBinary } section = Section::kNone;
  std::istringstream in(text);
  std::string line;
  auto count_terms = [](const std::string& body) {
    // Terms are separated by " + " / " - " and the first may carry a sign.
    std::size_t n = 0;
    std::istringstream words(body);
    std::string w;
    while (words >> w) {
      if (!w.empty() && (std::isalpha(static_cast<unsigned char>(w[0])) != 0)) ++n;
    }
    return n;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '\\') continue;
    if (line == "Minimize") {
      s.has_minimize = true;
      section = Section::kObjective;
      continue;
    }
    if (line == "Subject To") {
      s.has_subject_to = true;
      section = Section::kRows;
      continue;
    }
    if (line == "Bounds") {
      s.has_bounds = true;
      section = Section::kBounds;
      continue;
    }
    if (line == "Binary") {
      s.has_binary = true;
      section = Section::kBinary;
      continue;
    }
    if (line == "End") {
      s.has_end = true;
      section = Section::kNone;
      continue;
    }
    const bool continuation = line.rfind("  ", 0) == 0;
    switch (section) {
      case Section::kObjective: {
        std::string body = line;
        if (!continuation) body = line.substr(line.find(':') + 1);
        s.objective_terms += count_terms(body);
        break;
      }
      case Section::kRows: {
        if (continuation) break;
        const auto colon = line.find(':');
        if (colon == std::string::npos) break;
        std::string name = line.substr(1, colon - 1);
        ++s.rows;
        ++s.rows_by_prefix[row_prefix(name)];
        break;
      }
      case Section::kBounds:
        if (line.find(" = 0") != std::string::npos) {
          ++s.fixed_zero;
        } else if (line.find(">=") != std::string::npos) {
          ++s.continuous_bounds;
        }
        break;
      case Section::kBinary: {
        std::istringstream words(line);
        std::string w;
        while (words >> w) ++s.binaries;
        break;
      }
      case Section::kNone:
        break;
    }
  }
  return s;
}

}  // namespace uniplan::testing
