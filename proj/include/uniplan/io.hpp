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

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uniplan/cost_model.hpp"
#include "uniplan/graph.hpp"
#include "uniplan/solver.hpp"
#include "uniplan/uop.hpp"

namespace uniplan {

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// Parses JSON text; syntax errors become InputError naming `what`.
nlohmann::json parse_json(const std::string& text, const std::string& what);

std::string sha256_hex(const std::string& bytes);

/// {"layers":[{"id","kind","fwd_time_per_sample":{"1":s,...},"param_bytes",
///   "act_bytes_per_sample":{...},"ctx_bytes","tp_comm_bytes_per_sample"}],
///  "edges":[{"src","dst","tensor_bytes_per_sample"}]}
/// Structural problems are reported by validate_graph, not here.
ComputationGraph load_model(const nlohmann::json& document);
nlohmann::json serialize_model(const ComputationGraph& graph);

inline constexpr const char* kPlanVersion = "v1";

struct Provenance {
  std::string model_sha256;
  std::string profile_sha256;
  std::string planner_version;
  double wall_time_s = 0.0;
  std::vector<double> config_wall_time_s;
};

/// A serialized plan. Stages and strategy indices are 0-based.
struct PlanDocument {
  PlanContext context;
  std::vector<int> layer_ids;
  Assignment assignment;  // objective is the estimated time per iteration
  std::vector<IntraStrategy> strategies;  // expansion of strategy_of
  std::vector<ConfigOutcome> sweep;
  Provenance provenance;
};

PlanDocument make_plan_document(const ParallelPlan& plan, const ComputationGraph& graph);

/// The document without provenance is a pure function of the inputs.
nlohmann::json plan_to_json(const PlanDocument& doc, bool with_provenance = true);
PlanDocument plan_from_json(const nlohmann::json& document);

}  // namespace uniplan
