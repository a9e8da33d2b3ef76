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
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "uniplan/cost_model.hpp"
#include "uniplan/graph.hpp"

namespace uniplan {

enum class VarType { kBinary, kContinuous };

struct Variable {
  std::string name;
  VarType type = VarType::kBinary;
  double lb = 0.0;
  double ub = 1.0;
};

/// coef * product(vars). `product` names the auxiliary variable that stands
/// for the product once linearized; empty for linear terms.
struct Monomial {
  double coef = 0.0;
  std::vector<int> vars;
  std::string product;
};

enum class Sense { kLe, kGe, kEq };

enum class Family {
  kComputationStage,
  kCommunicationStage,
  kMemory,
  kOrderPreserving,
  kStageOrder,
  kLayerPlacement,
  kStrategySelection,
  kEpigraph,
  kLinearization,
};

std::string to_string(Family f);

struct Constraint {
  Family family = Family::kComputationStage;
  std::string name;
  std::vector<Monomial> terms;
  Sense sense = Sense::kEq;
  double rhs = 0.0;
  int stage = -1;  // stage or boundary the row belongs to, -1 if none
};

/// Variables, polynomial constraints and a polynomial objective to minimize.
struct PolyModel {
  std::vector<Variable> vars;
  std::vector<Constraint> constraints;
  std::vector<Monomial> objective;

  int add_var(std::string name, VarType type, double lb = 0.0, double ub = 1.0);

  double row_activity(const Constraint& row, std::span<const double> x) const;
  bool satisfied(const Constraint& row, std::span<const double> x, double tol = 1e-9) const;
  double objective_value(std::span<const double> x) const;
  std::size_t count(Family f) const;
};

double monomial_value(const Monomial& m, std::span<const double> x);

/// The pipeline program for one (deg, c) configuration, or the single-stage
/// program when `single_stage` is set (then P, Z, o and t are absent).
///
/// Variable naming (u = layer id, stages/boundaries/strategies 1-based):
///   P_u_i, S_u_k, Z_u_i   binaries
///   p_i, o_j, t           continuous
struct MiqpModel : PolyModel {
  bool single_stage = false;
  int deg = 1;
  int c = 1;
  std::size_t num_layers = 0;
  std::size_t num_strategies = 0;
  std::vector<int> P;  // [u * deg + i]
  std::vector<int> S;  // [u * |S| + k]
  std::vector<int> Z;  // [u * deg + i]
  std::vector<int> p;
  std::vector<int> o;
  int t = -1;
  // Row index defining each p_i / o_j as an equality.
  std::vector<std::size_t> p_row;
  std::vector<std::size_t> o_row;
  // Set when some layer has no strategy within any memory limit.
  bool trivially_infeasible = false;
  std::string infeasible_reason;

  int P_at(std::size_t u, int i) const { return P[u * static_cast<std::size_t>(deg) + static_cast<std::size_t>(i)]; }
  int S_at(std::size_t u, std::size_t k) const { return S[u * num_strategies + k]; }
  int Z_at(std::size_t u, int i) const { return Z[u * static_cast<std::size_t>(deg) + static_cast<std::size_t>(i)]; }

  /// Solves the defining equalities for p and o from the binaries in `x`,
  /// then sets t = max(p u o).
  void derive_continuous(std::vector<double>& x) const;

  /// Full variable vector for a placement: P and S from the assignment, Z by
  /// reachability into each stage, continuous variables derived.
  std::vector<double> encode(const ComputationGraph& graph, std::span<const int> stage_of,
                             std::span<const int> strategy_of) const;
};

/// Layer placement, order-preserving (with Z), stage-order, memory, strategy
/// selection and epigraph rows. `deg` must be >= 2.
MiqpModel build_miqp(const CostMatrices& costs, const ComputationGraph& graph, const PlanContext& ctx,
                     std::span<const double> mem_limits);

/// Single-stage program: minimize p_1 with the stage cost row, one memory
/// row and strategy selection.
MiqpModel build_qip(const CostMatrices& costs, const ComputationGraph& graph, double mem_limit);

/// Linear model with one binary per distinct product of binaries.
struct MilpModel : PolyModel {
  std::size_t base_vars = 0;  // vars [0, base_vars) are the MIQP's own
  // product variable -> factor variables
  std::vector<std::pair<int, std::vector<int>>> products;
  std::vector<std::size_t> p_row;
  std::vector<std::size_t> o_row;
  std::vector<int> p;
  std::vector<int> o;
  int t = -1;

  /// Given MIQP variable values in x[0, base_vars), sets each product to
  /// the AND of its factors, derives p and o from the linear rows and sets t.
  std::vector<double> complete(std::span<const double> base) const;

  std::size_t count_products(const std::string& prefix) const;
};

MilpModel linearize(const MiqpModel& model);

/// CPLEX LP text. Deterministic byte-for-byte for identical models. Throws
/// std::runtime_error if the stream fails.
void export_lp(const MilpModel& model, std::ostream& sink, const std::string& title = "uniplan");

}  // namespace uniplan
