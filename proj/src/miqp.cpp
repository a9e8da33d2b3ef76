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

#include "uniplan/miqp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

namespace uniplan {

std::string to_string(Family f) {
  switch (f) {
    case Family::kComputationStage:
      return "computation_stage";
    case Family::kCommunicationStage:
      return "communication_stage";
    case Family::kMemory:
      return "memory";
    case Family::kOrderPreserving:
      return "order_preserving";
    case Family::kStageOrder:
      return "stage_order";
    case Family::kLayerPlacement:
      return "layer_placement";
    case Family::kStrategySelection:
      return "strategy_selection";
    case Family::kEpigraph:
      return "epigraph";
    case Family::kLinearization:
      return "linearization";
  }
  return "unknown";
}

int PolyModel::add_var(std::string name, VarType type, double lb, double ub) {
  vars.push_back({std::move(name), type, lb, ub});
  return static_cast<int>(vars.size()) - 1;
}

double monomial_value(const Monomial& m, std::span<const double> x) {
  double v = m.coef;
  for (int var : m.vars) v *= x[static_cast<std::size_t>(var)];
  return v;
}

double PolyModel::row_activity(const Constraint& row, std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& m : row.terms) sum += monomial_value(m, x);
  return sum;
}

bool PolyModel::satisfied(const Constraint& row, std::span<const double> x, double tol) const {
  const double a = row_activity(row, x);
  switch (row.sense) {
    case Sense::kLe:
      return a <= row.rhs + tol;
    case Sense::kGe:
      return a >= row.rhs - tol;
    case Sense::kEq:
      return std::abs(a - row.rhs) <= tol;
  }
  return false;
}

double PolyModel::objective_value(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& m : objective) sum += monomial_value(m, x);
  return sum;
}

std::size_t PolyModel::count(Family f) const {
  return static_cast<std::size_t>(
      std::count_if(constraints.begin(), constraints.end(), [f](const Constraint& c) { return c.family == f; }));
}

namespace {

Monomial linear(double coef, int var) { return {coef, {var}, {}}; }

Monomial product(double coef, std::vector<int> vars, std::string name) {
  return {coef, std::move(vars), std::move(name)};
}

void check_costs(const CostMatrices& costs, const ComputationGraph& graph) {
  if (costs.num_layers() != graph.size() || costs.memory.rows() != graph.size()) {
    throw InputError(fmt::format("cost matrices cover {} layers, graph has {}", costs.num_layers(), graph.size()));
  }
  if (costs.edges.size() != graph.edges.size() || costs.reshard.size() != graph.edges.size() ||
      costs.cross.size() != graph.edges.size()) {
    throw InputError("cost matrices and graph disagree on edges");
  }
  const std::size_t ns = costs.num_strategies();
  if (costs.exec.cols() != ns || costs.memory.cols() != ns) throw InputError("cost matrix width != |S|");
  for (std::size_t e = 0; e < costs.edges.size(); ++e) {
    if (costs.reshard[e].rows() != ns || costs.reshard[e].cols() != ns || costs.cross[e].rows() != ns ||
        costs.cross[e].cols() != ns) {
      throw InputError(fmt::format("resharding matrices of edge {} are not |S| x |S|", e));
    }
  }
}

// Shared between the pipeline and single-stage builders.
void add_strategy_vars(MiqpModel& m, const CostMatrices& costs, const ComputationGraph& graph) {
  m.S.resize(m.num_layers * m.num_strategies);
  for (std::size_t u = 0; u < m.num_layers; ++u) {
    for (std::size_t k = 0; k < m.num_strategies; ++k) {
      // Unusable (layer, strategy) pairs are fixed to zero.
      const double ub = costs.feasible(u, k) ? 1.0 : 0.0;
      m.S[u * m.num_strategies + k] =
          m.add_var(fmt::format("S_{}_{}", graph.nodes[u].id, k + 1), VarType::kBinary, 0.0, ub);
    }
  }
}

void add_strategy_selection(MiqpModel& m, const ComputationGraph& graph) {
  for (std::size_t u = 0; u < m.num_layers; ++u) {
    Constraint row{Family::kStrategySelection, fmt::format("select_{}", graph.nodes[u].id), {}, Sense::kEq, 1.0};
    for (std::size_t k = 0; k < m.num_strategies; ++k) row.terms.push_back(linear(1.0, m.S_at(u, k)));
    m.constraints.push_back(std::move(row));
  }
}

void flag_memory(MiqpModel& m, const CostMatrices& costs, const ComputationGraph& graph, double max_limit) {
  for (std::size_t u = 0; u < m.num_layers; ++u) {
    bool fits = false;
    for (std::size_t k = 0; k < m.num_strategies && !fits; ++k) {
      fits = costs.feasible(u, k) && costs.memory(u, k) <= max_limit;
    }
    if (!fits) {
      m.trivially_infeasible = true;
      m.infeasible_reason =
          fmt::format("layer {} exceeds the memory limit under every strategy", graph.nodes[u].id);
      return;
    }
  }
}

}  // namespace

MiqpModel build_miqp(const CostMatrices& costs, const ComputationGraph& graph, const PlanContext& ctx,
                     std::span<const double> mem_limits) {
  if (ctx.deg < 2) throw InputError("build_miqp needs deg >= 2; use build_qip for a single stage");
  check_costs(costs, graph);
  if (mem_limits.size() != static_cast<std::size_t>(ctx.deg)) {
    throw InputError(fmt::format("expected {} per-stage memory limits, got {}", ctx.deg, mem_limits.size()));
  }

  MiqpModel m;
  m.deg = ctx.deg;
  m.c = ctx.c;
  m.num_layers = graph.size();
  m.num_strategies = costs.num_strategies();
  const int deg = ctx.deg;
  const std::size_t nv = m.num_layers;
  const std::size_t ns = m.num_strategies;
  auto id = [&](std::size_t u) { return graph.nodes[u].id; };

  m.P.resize(nv * static_cast<std::size_t>(deg));
  for (std::size_t u = 0; u < nv; ++u) {
    for (int i = 0; i < deg; ++i) {
      m.P[u * static_cast<std::size_t>(deg) + static_cast<std::size_t>(i)] =
          m.add_var(fmt::format("P_{}_{}", id(u), i + 1), VarType::kBinary);
    }
  }
  add_strategy_vars(m, costs, graph);
  m.Z.resize(nv * static_cast<std::size_t>(deg));
  for (std::size_t u = 0; u < nv; ++u) {
    for (int i = 0; i < deg; ++i) {
      m.Z[u * static_cast<std::size_t>(deg) + static_cast<std::size_t>(i)] =
          m.add_var(fmt::format("Z_{}_{}", id(u), i + 1), VarType::kBinary);
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < deg; ++i) m.p.push_back(m.add_var(fmt::format("p_{}", i + 1), VarType::kContinuous, 0.0, inf));
  for (int j = 0; j + 1 < deg; ++j) {
    m.o.push_back(m.add_var(fmt::format("o_{}", j + 1), VarType::kContinuous, 0.0, inf));
  }
  m.t = m.add_var("t", VarType::kContinuous, 0.0, inf);

  // Stage cost rows.
  for (int i = 0; i < deg; ++i) {
    Constraint row{Family::kComputationStage, fmt::format("comp_{}", i + 1), {}, Sense::kEq, 0.0, i};
    for (std::size_t u = 0; u < nv; ++u) {
      for (std::size_t k = 0; k < ns; ++k) {
        row.terms.push_back(product(costs.exec(u, k), {m.P_at(u, i), m.S_at(u, k)},
                                    fmt::format("y_{}_{}_{}", id(u), i + 1, k + 1)));
      }
    }
    for (std::size_t e = 0; e < costs.edges.size(); ++e) {
      auto [u, v] = costs.edges[e];
      for (std::size_t k = 0; k < ns; ++k) {
        for (std::size_t l = 0; l < ns; ++l) {
          row.terms.push_back(product(costs.reshard[e](k, l), {m.P_at(u, i), m.P_at(v, i), m.S_at(u, k), m.S_at(v, l)},
                                      fmt::format("w_{}_{}_{}_{}_{}", id(u), id(v), i + 1, k + 1, l + 1)));
        }
      }
    }
    row.terms.push_back(linear(-1.0, m.p[static_cast<std::size_t>(i)]));
    m.p_row.push_back(m.constraints.size());
    m.constraints.push_back(std::move(row));
  }

  // Boundary rows. An edge from stage a to stage b > a is charged on every
  // boundary it crosses.
  for (int j = 0; j + 1 < deg; ++j) {
    Constraint row{Family::kCommunicationStage, fmt::format("comm_{}", j + 1), {}, Sense::kEq, 0.0, j};
    for (std::size_t e = 0; e < costs.edges.size(); ++e) {
      auto [u, v] = costs.edges[e];
      for (int a = 0; a <= j; ++a) {
        for (int b = j + 1; b < deg; ++b) {
          for (std::size_t k = 0; k < ns; ++k) {
            for (std::size_t l = 0; l < ns; ++l) {
              row.terms.push_back(
                  product(costs.cross[e](k, l), {m.P_at(u, a), m.P_at(v, b), m.S_at(u, k), m.S_at(v, l)},
                          fmt::format("wp_{}_{}_{}_{}_{}_{}", id(u), id(v), a + 1, b + 1, k + 1, l + 1)));
            }
          }
        }
      }
    }
    row.terms.push_back(linear(-1.0, m.o[static_cast<std::size_t>(j)]));
    m.o_row.push_back(m.constraints.size());
    m.constraints.push_back(std::move(row));
  }

  // Memory rows; fixed-out pairs carry no coefficient.
  for (int i = 0; i < deg; ++i) {
    Constraint row{Family::kMemory, fmt::format("mem_{}", i + 1), {}, Sense::kLe,
                   mem_limits[static_cast<std::size_t>(i)], i};
    for (std::size_t u = 0; u < nv; ++u) {
      for (std::size_t k = 0; k < ns; ++k) {
        if (!costs.feasible(u, k)) continue;
        row.terms.push_back(product(costs.memory(u, k), {m.P_at(u, i), m.S_at(u, k)},
                                    fmt::format("y_{}_{}_{}", id(u), i + 1, k + 1)));
      }
    }
    m.constraints.push_back(std::move(row));
  }

  // Order preserving: Z_vi >= P_vi; Z_vi <= Z_ui and Z_vi <= P_vi - P_ui + 1 per edge.
  for (std::size_t v = 0; v < nv; ++v) {
    for (int i = 0; i < deg; ++i) {
      m.constraints.push_back({Family::kOrderPreserving, fmt::format("ord_a_{}_{}", id(v), i + 1),
                               {linear(1.0, m.Z_at(v, i)), linear(-1.0, m.P_at(v, i))}, Sense::kGe, 0.0, i});
    }
  }
  for (auto [u, v] : costs.edges) {
    for (int i = 0; i < deg; ++i) {
      m.constraints.push_back({Family::kOrderPreserving, fmt::format("ord_b_{}_{}_{}", id(u), id(v), i + 1),
                               {linear(1.0, m.Z_at(v, i)), linear(-1.0, m.Z_at(u, i))}, Sense::kLe, 0.0, i});
    }
  }
  for (auto [u, v] : costs.edges) {
    for (int i = 0; i < deg; ++i) {
      m.constraints.push_back({Family::kOrderPreserving, fmt::format("ord_c_{}_{}_{}", id(u), id(v), i + 1),
                               {linear(1.0, m.Z_at(v, i)), linear(-1.0, m.P_at(v, i)), linear(1.0, m.P_at(u, i))},
                               Sense::kLe, 1.0, i});
    }
  }

  // Stage order: an edge never points to an earlier stage.
  for (auto [u, v] : costs.edges) {
    Constraint row{Family::kStageOrder, fmt::format("sord_{}_{}", id(u), id(v)), {}, Sense::kGe, 0.0};
    for (int i = 1; i < deg; ++i) row.terms.push_back(linear(static_cast<double>(i), m.P_at(v, i)));
    for (int i = 1; i < deg; ++i) row.terms.push_back(linear(-static_cast<double>(i), m.P_at(u, i)));
    m.constraints.push_back(std::move(row));
  }

  // Layer placement: one stage per layer, no empty stage.
  for (std::size_t u = 0; u < nv; ++u) {
    Constraint row{Family::kLayerPlacement, fmt::format("place_{}", id(u)), {}, Sense::kEq, 1.0};
    for (int i = 0; i < deg; ++i) row.terms.push_back(linear(1.0, m.P_at(u, i)));
    m.constraints.push_back(std::move(row));
  }
  for (int i = 0; i < deg; ++i) {
    Constraint row{Family::kLayerPlacement, fmt::format("nonempty_{}", i + 1), {}, Sense::kGe, 1.0, i};
    for (std::size_t u = 0; u < nv; ++u) row.terms.push_back(linear(1.0, m.P_at(u, i)));
    m.constraints.push_back(std::move(row));
  }

  add_strategy_selection(m, graph);

  for (int i = 0; i < deg; ++i) {
    m.constraints.push_back({Family::kEpigraph, fmt::format("epi_p_{}", i + 1),
                             {linear(1.0, m.t), linear(-1.0, m.p[static_cast<std::size_t>(i)])}, Sense::kGe, 0.0, i});
  }
  for (int j = 0; j + 1 < deg; ++j) {
    m.constraints.push_back({Family::kEpigraph, fmt::format("epi_o_{}", j + 1),
                             {linear(1.0, m.t), linear(-1.0, m.o[static_cast<std::size_t>(j)])}, Sense::kGe, 0.0, j});
  }

  for (int var : m.p) m.objective.push_back(linear(1.0, var));
  for (int var : m.o) m.objective.push_back(linear(1.0, var));
  if (ctx.c > 1) m.objective.push_back(linear(static_cast<double>(ctx.c - 1), m.t));

  flag_memory(m, costs, graph, *std::max_element(mem_limits.begin(), mem_limits.end()));
  return m;
}

MiqpModel build_qip(const CostMatrices& costs, const ComputationGraph& graph, double mem_limit) {
  check_costs(costs, graph);
  MiqpModel m;
  m.single_stage = true;
  m.deg = 1;
  m.c = 1;
  m.num_layers = graph.size();
  m.num_strategies = costs.num_strategies();
  const std::size_t nv = m.num_layers;
  const std::size_t ns = m.num_strategies;
  auto id = [&](std::size_t u) { return graph.nodes[u].id; };

  add_strategy_vars(m, costs, graph);
  m.p.push_back(m.add_var("p_1", VarType::kContinuous, 0.0, std::numeric_limits<double>::infinity()));

  Constraint cost{Family::kComputationStage, "comp_1", {}, Sense::kEq, 0.0, 0};
  for (std::size_t u = 0; u < nv; ++u) {
    for (std::size_t k = 0; k < ns; ++k) cost.terms.push_back(linear(costs.exec(u, k), m.S_at(u, k)));
  }
  for (std::size_t e = 0; e < costs.edges.size(); ++e) {
    auto [u, v] = costs.edges[e];
    for (std::size_t k = 0; k < ns; ++k) {
      for (std::size_t l = 0; l < ns; ++l) {
        cost.terms.push_back(product(costs.reshard[e](k, l), {m.S_at(u, k), m.S_at(v, l)},
                                     fmt::format("w_{}_{}_{}_{}", id(u), id(v), k + 1, l + 1)));
      }
    }
  }
  cost.terms.push_back(linear(-1.0, m.p[0]));
  m.p_row.push_back(m.constraints.size());
  m.constraints.push_back(std::move(cost));

  Constraint mem{Family::kMemory, "mem_1", {}, Sense::kLe, mem_limit, 0};
  for (std::size_t u = 0; u < nv; ++u) {
    for (std::size_t k = 0; k < ns; ++k) {
      if (costs.feasible(u, k)) mem.terms.push_back(linear(costs.memory(u, k), m.S_at(u, k)));
    }
  }
  m.constraints.push_back(std::move(mem));

  add_strategy_selection(m, graph);
  m.objective.push_back(linear(1.0, m.p[0]));

  flag_memory(m, costs, graph, mem_limit);
  return m;
}

void MiqpModel::derive_continuous(std::vector<double>& x) const {
  for (std::size_t i = 0; i < p.size(); ++i) {
    x[static_cast<std::size_t>(p[i])] = 0.0;
    x[static_cast<std::size_t>(p[i])] = row_activity(constraints[p_row[i]], x);
  }
  for (std::size_t j = 0; j < o.size(); ++j) {
    x[static_cast<std::size_t>(o[j])] = 0.0;
    x[static_cast<std::size_t>(o[j])] = row_activity(constraints[o_row[j]], x);
  }
  if (t >= 0) {
    double worst = 0.0;
    for (int var : p) worst = std::max(worst, x[static_cast<std::size_t>(var)]);
    for (int var : o) worst = std::max(worst, x[static_cast<std::size_t>(var)]);
    x[static_cast<std::size_t>(t)] = worst;
  }
}

std::vector<double> MiqpModel::encode(const ComputationGraph& graph, std::span<const int> stage_of,
                                      std::span<const int> strategy_of) const {
  std::vector<double> x(vars.size(), 0.0);
  for (std::size_t u = 0; u < num_layers; ++u) {
    x[static_cast<std::size_t>(S_at(u, static_cast<std::size_t>(strategy_of[u])))] = 1.0;
  }
  if (!single_stage) {
    Reachability reach(graph);
    for (std::size_t u = 0; u < num_layers; ++u) x[static_cast<std::size_t>(P_at(u, stage_of[u]))] = 1.0;
    for (std::size_t v = 0; v < num_layers; ++v) {
      for (std::size_t w = 0; w < num_layers; ++w) {
        if (reach.reaches(v, w)) x[static_cast<std::size_t>(Z_at(v, stage_of[w]))] = 1.0;
      }
    }
  }
  derive_continuous(x);
  return x;
}

MilpModel linearize(const MiqpModel& model) {
  MilpModel out;
  out.vars = model.vars;
  out.base_vars = model.vars.size();
  out.p = model.p;
  out.o = model.o;
  out.t = model.t;
  out.p_row = model.p_row;
  out.o_row = model.o_row;

  std::unordered_map<std::string, int> by_name;
  auto replace = [&](const Monomial& m) -> Monomial {
    if (m.vars.size() < 2) return m;
    auto [it, fresh] = by_name.try_emplace(m.product, -1);
    if (fresh) {
      it->second = out.add_var(m.product, VarType::kBinary);
      out.products.emplace_back(it->second, m.vars);
    }
    return linear(m.coef, it->second);
  };

  for (const auto& row : model.constraints) {
    Constraint lin{row.family, row.name, {}, row.sense, row.rhs, row.stage};
    lin.terms.reserve(row.terms.size());
    for (const auto& m : row.terms) lin.terms.push_back(replace(m));
    out.constraints.push_back(std::move(lin));
  }
  for (const auto& m : model.objective) out.objective.push_back(replace(m));

  // w <= each factor; w >= sum(factors) - (k - 1).
  for (const auto& [w, factors] : out.products) {
    const std::string& name = out.vars[static_cast<std::size_t>(w)].name;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      out.constraints.push_back({Family::kLinearization, fmt::format("and_{}_{}", name, f + 1),
                                 {linear(1.0, w), linear(-1.0, factors[f])}, Sense::kLe, 0.0});
    }
    Constraint lb{Family::kLinearization, fmt::format("and_{}_lb", name), {linear(1.0, w)}, Sense::kGe,
                  -static_cast<double>(factors.size() - 1)};
    for (int f : factors) lb.terms.push_back(linear(-1.0, f));
    out.constraints.push_back(std::move(lb));
  }
  return out;
}

std::vector<double> MilpModel::complete(std::span<const double> base) const {
  std::vector<double> x(vars.size(), 0.0);
  std::copy_n(base.begin(), std::min(base.size(), base_vars), x.begin());
  for (const auto& [w, factors] : products) {
    double v = 1.0;
    for (int f : factors) v *= x[static_cast<std::size_t>(f)];
    x[static_cast<std::size_t>(w)] = v;
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    x[static_cast<std::size_t>(p[i])] = 0.0;
    x[static_cast<std::size_t>(p[i])] = row_activity(constraints[p_row[i]], x);
  }
  for (std::size_t j = 0; j < o.size(); ++j) {
    x[static_cast<std::size_t>(o[j])] = 0.0;
    x[static_cast<std::size_t>(o[j])] = row_activity(constraints[o_row[j]], x);
  }
  if (t >= 0) {
    double worst = 0.0;
    for (int var : p) worst = std::max(worst, x[static_cast<std::size_t>(var)]);
    for (int var : o) worst = std::max(worst, x[static_cast<std::size_t>(var)]);
    x[static_cast<std::size_t>(t)] = worst;
  }
  return x;
}

std::size_t MilpModel::count_products(const std::string& prefix) const {
  return static_cast<std::size_t>(std::count_if(products.begin(), products.end(), [&](const auto& pr) {
    return vars[static_cast<std::size_t>(pr.first)].name.starts_with(prefix);
  }));
}

namespace {

constexpr std::size_t kTermsPerLine = 8;

void write_terms(std::ostream& os, const PolyModel& model, const std::vector<Monomial>& terms) {
  std::size_t n = 0;
  for (const auto& m : terms) {
    if (m.vars.size() != 1) throw std::logic_error("export_lp: model is not linear");
    const std::string& name = model.vars[static_cast<std::size_t>(m.vars[0])].name;
    if (n > 0 && n % kTermsPerLine == 0) os << "\n  ";
    const bool neg = std::signbit(m.coef);
    const double mag = std::abs(m.coef);
    if (n == 0) {
      os << (neg ? "- " : "");
    } else {
      os << (neg ? " - " : " + ");
    }
    if (mag != 1.0) os << fmt::format("{} ", mag);
    os << name;
    ++n;
  }
  if (n == 0) os << "0";
}

const char* sense_text(Sense s) {
  switch (s) {
    case Sense::kLe:
      return "<=";
    case Sense::kGe:
      return ">=";
    case Sense::kEq:
      return "=";
  }
  return "=";
}

}  // namespace

void export_lp(const MilpModel& model, std::ostream& os, const std::string& title) {
  os << "\\ " << title << "\n";
  os << "Minimize\n obj: ";
  write_terms(os, model, model.objective);
  os << "\nSubject To\n";
  for (const auto& row : model.constraints) {
    os << " " << row.name << ": ";
    write_terms(os, model, row.terms);
    os << " " << sense_text(row.sense) << " " << fmt::format("{}", row.rhs) << "\n";
  }
  os << "Bounds\n";
  for (const auto& v : model.vars) {
    if (v.type == VarType::kContinuous) {
      os << " " << v.name << " >= " << fmt::format("{}", v.lb) << "\n";
    } else if (v.ub == 0.0) {
      os << " " << v.name << " = 0\n";
    }
  }
  os << "Binary\n";
  std::size_t n = 0;
  for (const auto& v : model.vars) {
    if (v.type != VarType::kBinary) continue;
    os << " " << v.name;
    if (++n % kTermsPerLine == 0) os << "\n";
  }
  if (n % kTermsPerLine != 0) os << "\n";
  os << "End\n";
  if (!os) throw std::runtime_error("export_lp: write failed");
}

}  // namespace uniplan
