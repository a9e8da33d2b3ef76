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

#include "uniplan/cost_model.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace uniplan {

int dtype_multiplier(Precision p) {
  // fp32: (4 + 4 + 4 + 4) / 4; fp16 mixed: (4 + 4 + 4 + 2 + 2) / 2.
  return p == Precision::kFp32 ? 4 : 8;
}

std::string to_string(Precision p) { return p == Precision::kFp32 ? "fp32" : "fp16-mixed"; }

Precision parse_precision(const std::string& text) {
  if (text == "fp32") return Precision::kFp32;
  if (text == "fp16-mixed" || text == "fp16_mixed") return Precision::kFp16Mixed;
  throw InputError(fmt::format("unknown precision \"{}\" (expected fp32 or fp16-mixed)", text));
}

std::string to_string(InflightRule r) { return r == InflightRule::kAllMicroBatches ? "gpipe" : "single"; }

InflightRule parse_inflight_rule(const std::string& text) {
  if (text == "gpipe") return InflightRule::kAllMicroBatches;
  if (text == "single") return InflightRule::kOneMicroBatch;
  throw InputError(fmt::format("unknown inflight rule \"{}\" (expected gpipe or single)", text));
}

PlanContext make_context(int n, int deg, int mini_batch, int c, Precision precision, InflightRule rule) {
  if (n < 1) throw InputError("device count must be >= 1");
  if (deg < 1 || n % deg != 0) throw InputError(fmt::format("pipeline degree {} does not divide n = {}", deg, n));
  if (mini_batch < 1) throw InputError("batch must be ≥ 1");
  if (c < 1 || mini_batch % c != 0) {
    throw InputError(fmt::format("micro-batch count {} does not divide batch {}", c, mini_batch));
  }
  PlanContext ctx;
  ctx.deg = deg;
  ctx.c = c;
  ctx.mini_batch = mini_batch;
  ctx.micro_batch = mini_batch / c;
  ctx.per_stage_devices = n / deg;
  ctx.precision = precision;
  ctx.inflight_rule = rule;
  return ctx;
}

namespace {

double table_at(const LayerNode& layer, const std::map<int, double>& table, int tp, const char* field) {
  auto it = table.find(tp);
  if (it == table.end()) {
    throw InputError(fmt::format("layer {}: {} has no entry for TP size {}", layer.id, field, tp));
  }
  return it->second;
}

}  // namespace

double model_state_bytes(double param_bytes, Precision precision, int ts, int fs) {
  return dtype_multiplier(precision) * param_bytes / (static_cast<double>(ts) * fs);
}

std::optional<double> layer_exec_cost(const LayerNode& layer, const IntraStrategy& s, const PlanContext& ctx,
                                      const ClusterProfile& profile) {
  if (ctx.micro_batch % s.dp != 0) return std::nullopt;
  const double samples = static_cast<double>(ctx.micro_batch / s.dp);

  const double fp = samples * table_at(layer, layer.fwd_time_per_sample, s.tp, "fwd_time_per_sample");
  const double bp = 2.0 * fp;

  // TP collectives run on every replica's share; backward moves twice the volume.
  const double tp_volume = samples * layer.tp_comm_bytes_per_sample;
  const double tp_comm = allreduce_time(tp_volume, s.tp, profile) + allreduce_time(2.0 * tp_volume, s.tp, profile);

  // Per-iteration gradient synchronisation over the dp axis, spread over c
  // micro-batches. FSDP pays all-gather (fwd, bwd) plus reduce-scatter,
  // i.e. 1.5x a ring all-reduce of the same shard.
  const double grad_bytes = layer.param_bytes / s.tp;
  double sync = allreduce_time(grad_bytes, s.dp, profile);
  if (s.fsdp_shard) sync *= 1.5;

  return overlap(fp + bp, tp_comm, profile.ccoc) + sync / ctx.c;
}

double layer_memory(const LayerNode& layer, const IntraStrategy& s, const PlanContext& ctx) {
  if (ctx.micro_batch % s.dp != 0) return kInfeasible;
  const double samples = static_cast<double>(ctx.micro_batch / s.dp);
  const double states = model_state_bytes(layer.param_bytes, ctx.precision, s.tp, s.fs());
  const double acts =
      ctx.inflight() * samples * table_at(layer, layer.act_bytes_per_sample, s.tp, "act_bytes_per_sample");
  return states + acts + layer.ctx_bytes;
}

double resharding_cost(const EdgeInfo& edge, const IntraStrategy& from, const IntraStrategy& to,
                       const PlanContext& ctx, const ClusterProfile& profile, bool cross_stage) {
  const double volume = ctx.micro_batch * edge.tensor_bytes_per_sample;
  if (!cross_stage) {
    if (from.same_layout(to)) return 0.0;
    // Both layouts split the same g devices, so the dp ratio equals the
    // inverse tp ratio: the gather runs over groups of that size.
    const int group = std::max(from.dp, to.dp) / std::min(from.dp, to.dp);
    return allreduce_time(volume, group, profile);
  }
  const double shard = volume / std::min(from.dp, to.dp);
  const int fan_out = std::max(1, to.tp / from.tp);
  return p2p_time(shard, profile) * fan_out;
}

CostMatrices build_cost_matrices(const ComputationGraph& graph, const ClusterProfile& profile,
                                 const PlanContext& ctx) {
  CostMatrices cm;
  cm.space = enumerate_strategies(ctx.per_stage_devices);
  cm.edges = graph.edge_positions();
  const std::size_t nv = graph.size();
  const std::size_t ns = cm.space.size();

  cm.exec = Matrix(nv, ns);
  cm.memory = Matrix(nv, ns);
  for (std::size_t u = 0; u < nv; ++u) {
    const auto& layer = graph.nodes[u];
    bool any = false;
    for (std::size_t k = 0; k < ns; ++k) {
      auto t = layer_exec_cost(layer, cm.space[k], ctx, profile);
      if (!t) {
        cm.exec(u, k) = 0.0;
        cm.memory(u, k) = kInfeasible;
        continue;
      }
      cm.exec(u, k) = *t;
      cm.memory(u, k) = layer_memory(layer, cm.space[k], ctx);
      any = true;
    }
    if (!any) {
      throw NoFeasibleStrategyError(fmt::format("no feasible strategy for layer {} (micro-batch {} on {} devices per stage)",
                                   layer.id, ctx.micro_batch, ctx.per_stage_devices));
    }
  }

  cm.reshard.reserve(graph.edges.size());
  cm.cross.reserve(graph.edges.size());
  for (const auto& edge : graph.edges) {
    Matrix same(ns, ns);
    Matrix across(ns, ns);
    for (std::size_t k = 0; k < ns; ++k) {
      for (std::size_t l = 0; l < ns; ++l) {
        same(k, l) = resharding_cost(edge, cm.space[k], cm.space[l], ctx, profile, false);
        across(k, l) = resharding_cost(edge, cm.space[k], cm.space[l], ctx, profile, true);
      }
    }
    cm.reshard.push_back(std::move(same));
    cm.cross.push_back(std::move(across));
  }
  return cm;
}

}  // namespace uniplan
