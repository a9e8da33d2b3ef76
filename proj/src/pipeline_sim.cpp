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

#include "uniplan/pipeline_sim.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace uniplan {

using nlohmann::json;

StageTimes stage_times_from(const Assignment& a, const CostMatrices& costs) {
  const double share = 1.0 / (1.0 + costs.bp_to_fp_ratio);
  StageTimes t;
  for (double p : a.per_stage_cost) {
    const double f = p * share;
    t.fp.push_back(f);
    t.bp.push_back(p - f);
  }
  for (double o : a.per_boundary_cost) {
    const double f = o * share;
    t.fo.push_back(f);
    t.bo.push_back(o - f);
  }
  return t;
}

namespace {

void check_times(const StageTimes& t, int c) {
  if (c < 1) throw InputError(fmt::format("micro-batch count must be >= 1, got {}", c));
  const std::size_t deg = t.fp.size();
  if (deg == 0 || t.bp.size() != deg || t.fo.size() + 1 != deg || t.bo.size() + 1 != deg) {
    throw InputError("stage times need deg stage entries and deg - 1 boundary entries");
  }
}

}  // namespace

EventTrace simulate_gpipe(const StageTimes& times, int c) {
  check_times(times, c);
  const int deg = times.deg();
  EventTrace trace;
  trace.deg = deg;
  trace.c = c;

  // Free time of each stage and boundary resource.
  std::vector<double> stage_free(static_cast<std::size_t>(deg), 0.0);
  std::vector<double> link_free(static_cast<std::size_t>(deg - 1), 0.0);

  auto run = [&](ResourceKind kind, int index, int mb, Phase phase, double ready, double duration) {
    double& free = kind == ResourceKind::kStage ? stage_free[static_cast<std::size_t>(index)]
                                                : link_free[static_cast<std::size_t>(index)];
    const double start = std::max(free, ready);
    const double end = start + duration;
    free = end;
    trace.events.push_back({kind, index, mb, phase, start, end});
    return end;
  };

  // Forward wave, micro-batches in order.
  for (int mb = 0; mb < c; ++mb) {
    double ready = 0.0;
    for (int i = 0; i < deg; ++i) {
      ready = run(ResourceKind::kStage, i, mb, Phase::kForward, ready, times.fp[static_cast<std::size_t>(i)]);
      if (i + 1 < deg) {
        ready = run(ResourceKind::kBoundary, i, mb, Phase::kForward, ready, times.fo[static_cast<std::size_t>(i)]);
      }
    }
  }

  // Flush: backward starts once the last stage has finished every forward.
  const double flush = stage_free[static_cast<std::size_t>(deg - 1)];
  for (int mb = c - 1; mb >= 0; --mb) {
    double ready = flush;
    for (int i = deg - 1; i >= 0; --i) {
      ready = run(ResourceKind::kStage, i, mb, Phase::kBackward, ready, times.bp[static_cast<std::size_t>(i)]);
      if (i > 0) {
        ready = run(ResourceKind::kBoundary, i - 1, mb, Phase::kBackward, ready,
                    times.bo[static_cast<std::size_t>(i - 1)]);
      }
    }
  }

  for (const auto& e : trace.events) trace.makespan_s = std::max(trace.makespan_s, e.end_s);
  return trace;
}

double estimate_tpi(const StageTimes& times, int c) {
  check_times(times, c);
  double total = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < times.fp.size(); ++i) {
    const double p = times.fp[i] + times.bp[i];
    total += p;
    worst = std::max(worst, p);
  }
  for (std::size_t j = 0; j < times.fo.size(); ++j) {
    const double o = times.fo[j] + times.bo[j];
    total += o;
    worst = std::max(worst, o);
  }
  return total + (c - 1) * worst;
}

double relative_error(double actual, double estimated) {
  if (!(actual > 0.0)) throw InputError(fmt::format("relative error needs actual > 0, got {}", actual));
  return std::abs(actual - estimated) / actual * 100.0;
}

json trace_to_json(const EventTrace& trace) {
  json events = json::array();
  for (const auto& e : trace.events) {
    events.push_back({{"resource", e.resource == ResourceKind::kStage ? "stage" : "boundary"},
                      {"index", e.index},
                      {"micro_batch", e.micro_batch},
                      {"phase", e.phase == Phase::kForward ? "forward" : "backward"},
                      {"start_s", e.start_s},
                      {"end_s", e.end_s}});
  }
  return {{"deg", trace.deg}, {"c", trace.c}, {"makespan_s", trace.makespan_s}, {"events", events}};
}

EventTrace trace_from_json(const json& doc) {
  EventTrace t;
  try {
    t.deg = doc.at("deg").get<int>();
    t.c = doc.at("c").get<int>();
    t.makespan_s = doc.at("makespan_s").get<double>();
    for (const auto& e : doc.at("events")) {
      Event ev;
      const auto res = e.at("resource").get<std::string>();
      const auto phase = e.at("phase").get<std::string>();
      if (res != "stage" && res != "boundary") throw InputError("trace event resource must be stage or boundary");
      if (phase != "forward" && phase != "backward") throw InputError("trace event phase must be forward or backward");
      ev.resource = res == "stage" ? ResourceKind::kStage : ResourceKind::kBoundary;
      ev.phase = phase == "forward" ? Phase::kForward : Phase::kBackward;
      ev.index = e.at("index").get<int>();
      ev.micro_batch = e.at("micro_batch").get<int>();
      ev.start_s = e.at("start_s").get<double>();
      ev.end_s = e.at("end_s").get<double>();
      t.events.push_back(ev);
    }
  } catch (const json::exception& ex) {
    throw InputError(fmt::format("malformed trace document: {}", ex.what()));
  }
  return t;
}

}  // namespace uniplan
