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

#include <ostream>
#include <string>
#include <vector>

#include "uniplan/io.hpp"
#include "uniplan/pipeline_sim.hpp"

namespace uniplan::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,   // malformed JSON, bad flags, inconsistent documents
  kInfeasible = 2,   // no configuration admits a plan
  kViolations = 3,   // validate found constraint violations
  kIoError = 4,      // a file could not be read or written
};

/// Runs one command line (without the program name). Everything the tool
/// prints goes to `out` and `err`, so tests can drive it in-process.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// One row per stage: layer ids with their (dp, tp[, fsdp]) tags.
std::string render_stage_map(const PlanDocument& doc);

/// One row per stage, then one per boundary.
std::string render_gantt_svg(const EventTrace& trace);

}  // namespace uniplan::cli
