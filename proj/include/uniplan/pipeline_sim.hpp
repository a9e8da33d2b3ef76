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

#include <vector>

#include <nlohmann/json.hpp>

#include "uniplan/cost_model.hpp"
#include "uniplan/solver.hpp"

namespace uniplan {

/// Forward/backward split of every stage (fp, bp) and boundary (fo, bo).
struct StageTimes {
  std::vector<double> fp;
  std::vector<double> bp;
  std::vector<double> fo;
  std::vector<double> bo;

  int deg() const { return static_cast<int>(fp.size()); }
};

enum class ResourceKind { kStage, kBoundary };
enum class Phase { kForward, kBackward };

struct Event {
  ResourceKind resource = ResourceKind::kStage;
  int index = 0;
  int micro_batch = 0;
  Phase phase = Phase::kForward;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct EventTrace {
  int deg = 1;
  int c = 1;
  std::vector<Event> events;
  double makespan_s = 0.0;
};

/// Splits each stage and boundary total by the cost model's backward:forward
/// ratio, so fp + bp reproduces p and fo + bo reproduces o.
StageTimes stage_times_from(const Assignment& assignment, const CostMatrices& costs);

/// GPipe with a synchronous flush: every micro-batch runs forward through
/// stages and boundaries in order, then backward from the last stage to the
/// first. Each resource serves one event at a time in FIFO order.
EventTrace simulate_gpipe(const StageTimes& times, int c);

/// sum(p) + sum(o) + (c - 1) * max(p u o).
double estimate_tpi(const StageTimes& times, int c);

/// |actual - estimated| / actual * 100. Throws InputError if actual <= 0.
double relative_error(double actual, double estimated);

nlohmann::json trace_to_json(const EventTrace& trace);
EventTrace trace_from_json(const nlohmann::json& doc);

}  // namespace uniplan
