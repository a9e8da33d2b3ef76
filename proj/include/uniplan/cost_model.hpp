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
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uniplan/graph.hpp"
#include "uniplan/profile.hpp"

namespace uniplan {

enum class Precision { kFp32, kFp16Mixed };

/// Bytes of model state per parameter byte: 4 for FP32 (param, grad and two
/// Adam moments), 8 for FP16 mixed precision (FP32 master copies on top).
int dtype_multiplier(Precision p);

std::string to_string(Precision p);
Precision parse_precision(const std::string& text);

/// How many micro-batches of activations a stage holds at its peak.
enum class InflightRule {
  kAllMicroBatches,  // GPipe: all c forwards complete before any backward
  kOneMicroBatch,
};

std::string to_string(InflightRule r);
InflightRule parse_inflight_rule(const std::string& text);

/// Every strategy of some layer is unusable for the configuration.
class NoFeasibleStrategyError : public InputError {
 public:
  using InputError::InputError;
};

inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

/// One (deg, c) configuration of the outer sweep.
struct PlanContext {
  int deg = 1;
  int c = 1;
  int mini_batch = 1;
  int micro_batch = 1;
  int per_stage_devices = 1;
  Precision precision = Precision::kFp32;
  InflightRule inflight_rule = InflightRule::kAllMicroBatches;

  int inflight() const { return inflight_rule == InflightRule::kAllMicroBatches ? c : 1; }
};

/// Validates divisibility and derives b = B / c and g = n / deg.
PlanContext make_context(int n, int deg, int mini_batch, int c, Precision precision = Precision::kFp32,
                         InflightRule rule = InflightRule::kAllMicroBatches);

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Constant inputs of the optimization for one configuration.
///   exec(u, k)      per-micro-batch FP+BP seconds of layer u under strategy k
///   reshard[e]      same-stage layout change cost for edge e (|S| x |S|)
///   cross[e]        cross-stage transfer cost for edge e (|S| x |S|)
///   memory(u, k)    per-device bytes; kInfeasible marks an unusable pair
struct CostMatrices {
  StrategySpace space;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (src pos, dst pos)
  Matrix exec;
  std::vector<Matrix> reshard;
  std::vector<Matrix> cross;
  Matrix memory;
  double bp_to_fp_ratio = 2.0;

  std::size_t num_layers() const { return exec.rows(); }
  std::size_t num_strategies() const { return space.size(); }
  bool feasible(std::size_t u, std::size_t k) const { return memory(u, k) != kInfeasible; }
};

/// m_s = c_dtype * ps / (ts * fs).
double model_state_bytes(double param_bytes, Precision precision, int ts, int fs);

/// Seconds per micro-batch, or nullopt when b is not divisible by dp.
std::optional<double> layer_exec_cost(const LayerNode& layer, const IntraStrategy& s, const PlanContext& ctx,
                                      const ClusterProfile& profile);

/// Bytes per device, kInfeasible when b is not divisible by dp.
double layer_memory(const LayerNode& layer, const IntraStrategy& s, const PlanContext& ctx);

double resharding_cost(const EdgeInfo& edge, const IntraStrategy& from, const IntraStrategy& to,
                       const PlanContext& ctx, const ClusterProfile& profile, bool cross_stage);

/// Throws NoFeasibleStrategyError naming the layer when no strategy of some
/// layer is usable.
CostMatrices build_cost_matrices(const ComputationGraph& graph, const ClusterProfile& profile,
                                 const PlanContext& ctx);

}  // namespace uniplan
