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

// Serial reference vs OpenMP paths: the (deg, c) sweep with jobs = 1 and
// jobs = k, and the branch-and-bound solver vs exhaustive enumeration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>

#include <omp.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "uniplan/uop.hpp"

namespace {

using uniplan::ComputationGraph;

// Transformer-ish chain: alternating attention and MLP blocks with an
// embedding in front and a head at the back.
ComputationGraph make_chain(int layers) {
  ComputationGraph g;
  for (int i = 0; i < layers; ++i) {
    uniplan::LayerNode n;
    n.id = i;
    const bool edge = i == 0 || i == layers - 1;
    const bool attn = i % 2 == 1;
    n.kind = i == 0 ? "embedding" : i == layers - 1 ? "head" : attn ? "attention" : "mlp";
    const double t1 = edge ? 2e-4 : attn ? 6e-4 : 8e-4;
    const double act = edge ? 1.5e6 : attn ? 6e6 : 8e6;
    for (int tp = 1; tp <= 8; tp *= 2) {
      n.fwd_time_per_sample[tp] = t1 / tp * (1.0 + 0.08 * (tp - 1));
      n.act_bytes_per_sample[tp] = act / tp;
    }
    n.param_bytes = edge ? 9.4e7 : attn ? 9.4e6 : 1.9e7;
    n.ctx_bytes = 2e8;
    n.tp_comm_bytes_per_sample = edge ? 0.0 : 1.5e6;
    g.nodes.push_back(std::move(n));
    if (i > 0) g.edges.push_back({i - 1, i, 1.5e6});
  }
  return g;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uniplan_bench: serial reference vs parallel kernels"};
  int layers = 8;
  int n = 8;
  int batch = 32;
  int jobs = std::max(2, omp_get_max_threads());
  int reps = 3;
  app.add_option("--layers", layers)->capture_default_str();
  app.add_option("--n", n)->capture_default_str();
  app.add_option("--batch", batch)->capture_default_str();
  app.add_option("--jobs", jobs)->capture_default_str();
  app.add_option("--reps", reps)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const ComputationGraph graph = make_chain(layers);
  const auto profile = uniplan::synth_profile(n, 2.5e10, 5e-6, 16e9, 0.5);

  std::cout << fmt::format("{:<34}{:>12}{:>26}\n", "kernel", "seconds", "objective");

  // Sweep: serial reference vs OpenMP over configurations.
  double serial_obj = 0.0;
  double parallel_obj = 0.0;
  for (int jobs_now : {1, jobs}) {
    uniplan::OptimizeOptions opt;
    opt.jobs = jobs_now;
    double best = 1e300;
    double obj = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto plan = uniplan::unified_optimize(graph, profile, batch, opt);
      best = std::min(best, seconds_since(t0));
      obj = plan.est_tpi;
    }
    (jobs_now == 1 ? serial_obj : parallel_obj) = obj;
    std::cout << fmt::format("{:<34}{:>12.4f}{:>26.17g}\n", fmt::format("sweep jobs={}", jobs_now), best, obj);
  }

  // One configuration: B&B (serial and OpenMP root split) vs exhaustive.
  const ComputationGraph small = make_chain(std::min(layers, 6));
  const auto ctx = uniplan::make_context(4, 2, 8, 2);
  const auto small_profile = uniplan::synth_profile(4, 2.5e10, 5e-6, 16e9, 0.5);
  const auto costs = uniplan::build_cost_matrices(small, small_profile, ctx);
  const auto limits = uniplan::stage_memory_limits(small_profile, ctx);

  double bb_obj = 0.0;
  for (int jobs_now : {1, jobs}) {
    uniplan::Budget budget;
    budget.jobs = jobs_now;
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = uniplan::solve_exact(costs, small, ctx, limits, budget);
      best = std::min(best, seconds_since(t0));
      bb_obj = res.assignment ? res.assignment->objective : NAN;
    }
    std::cout << fmt::format("{:<34}{:>12.6f}{:>26.17g}\n", fmt::format("branch-and-bound jobs={}", jobs_now), best,
                             bb_obj);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto ex = uniplan::solve_exhaustive(costs, small, ctx, limits);
  const double ex_time = seconds_since(t0);
  const double ex_obj = ex.assignment ? ex.assignment->objective : NAN;
  std::cout << fmt::format("{:<34}{:>12.6f}{:>26.17g}\n", "exhaustive (serial reference)", ex_time, ex_obj);

  const bool agree = serial_obj == parallel_obj && bb_obj == ex_obj;
  std::cout << (agree ? "results agree\n" : "RESULTS DIFFER\n");
  return agree ? 0 : 1;
}
