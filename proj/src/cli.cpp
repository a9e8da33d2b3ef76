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

#include "uniplan/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "uniplan/miqp.hpp"
#include "uniplan/uop.hpp"

namespace uniplan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kMiB = 1024.0 * 1024.0;

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("uniplan", sink);
  log->set_pattern("[%l] %v");
  log->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("UNIPLAN_LOG")) {
    auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept it when asked for.
    if (level == spdlog::level::off && std::string(env) != "off") {
      log->warn("ignoring unknown UNIPLAN_LOG level \"{}\"", env);
    } else {
      log->set_level(level);
    }
  }
  return log;
}

json load_json_file(const std::string& path, const std::string& what) {
  return parse_json(read_file(path), fmt::format("{} {}", what, path));
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + std::to_string(ids[i]);
  return s;
}

// ---- plan -------------------------------------------------------------------

struct PlanArgs {
  std::string model;
  std::string profile;
  int batch = 0;
  std::string precision = "fp32";
  std::string inflight = "gpipe";
  double time_limit = 60.0;
  double gap = 1e-4;
  std::string out = "plan.json";
  std::string export_lp;
  int jobs = 1;
  bool raw = false;
};

void print_summary(std::ostream& out, const PlanDocument& doc, std::span<const double> limits) {
  const auto& ctx = doc.context;
  const auto& a = doc.assignment;
  out << fmt::format("configuration  deg={} c={} micro-batch={} devices/stage={}\n", ctx.deg, ctx.c, ctx.micro_batch,
                     ctx.per_stage_devices);
  out << fmt::format("est_tpi        {:.6e} s\n", a.objective);
  out << fmt::format("{:<7}{:<20}{:>14}{:>16}{:>16}\n", "stage", "layers", "p (s)", "memory (MiB)", "headroom (MiB)");
  for (int i = 0; i < ctx.deg; ++i) {
    std::vector<int> ids;
    for (std::size_t u = 0; u < a.stage_of.size(); ++u) {
      if (a.stage_of[u] == i) ids.push_back(doc.layer_ids[u]);
    }
    const auto si = static_cast<std::size_t>(i);
    out << fmt::format("{:<7}{:<20}{:>14.6e}{:>16.2f}{:>16.2f}\n", i, join_ids(ids), a.per_stage_cost[si],
                       a.per_stage_memory[si] / kMiB, (limits[si] - a.per_stage_memory[si]) / kMiB);
  }
  if (!a.per_boundary_cost.empty()) {
    out << fmt::format("{:<10}{:>14}\n", "boundary", "o (s)");
    for (std::size_t j = 0; j < a.per_boundary_cost.size(); ++j) {
      out << fmt::format("{:<10}{:>14.6e}\n", fmt::format("{}-{}", j, j + 1), a.per_boundary_cost[j]);
    }
  }
  const auto planned =
      std::count_if(doc.sweep.begin(), doc.sweep.end(), [](const ConfigOutcome& o) { return o.objective.has_value(); });
  out << fmt::format("sweep          {} configurations, {} with a plan\n", doc.sweep.size(), planned);
}

void print_raw(std::ostream& out, const PlanDocument& doc, std::size_t num_strategies) {
  const auto& a = doc.assignment;
  out << "P (layers x stages)\n";
  for (std::size_t u = 0; u < a.stage_of.size(); ++u) {
    out << fmt::format("  layer {}:", doc.layer_ids[u]);
    for (int i = 0; i < doc.context.deg; ++i) out << (a.stage_of[u] == i ? " 1" : " 0");
    out << '\n';
  }
  out << "S (layers x strategies)\n";
  for (std::size_t u = 0; u < a.strategy_of.size(); ++u) {
    out << fmt::format("  layer {}:", doc.layer_ids[u]);
    for (std::size_t k = 0; k < num_strategies; ++k) {
      out << (a.strategy_of[u] == static_cast<int>(k) ? " 1" : " 0");
    }
    out << '\n';
  }
}

int cmd_plan(const PlanArgs& args, std::ostream& out, spdlog::logger& log) {
  if (args.batch < 1) throw InputError("batch must be ≥ 1");
  if (!(args.time_limit > 0.0)) throw InputError("--time-limit must be positive");
  if (!(args.gap >= 0.0)) throw InputError("--gap must be >= 0");
  if (args.jobs < 1) throw InputError("--jobs must be >= 1");

  const std::string model_text = read_file(args.model);
  const std::string profile_text = read_file(args.profile);
  const ComputationGraph graph = load_model(parse_json(model_text, "model " + args.model));
  const ClusterProfile profile = load_profile(parse_json(profile_text, "profile " + args.profile));

  OptimizeOptions options;
  options.precision = parse_precision(args.precision);
  options.inflight_rule = parse_inflight_rule(args.inflight);
  options.budget.time_limit_s = args.time_limit;
  options.budget.gap_tol = args.gap;
  options.jobs = args.jobs;

  // LP text is collected during the sweep and written after it.
  std::map<std::pair<int, int>, std::string> lp_files;
  if (!args.export_lp.empty()) {
    options.on_model = [&lp_files](const PlanContext& ctx, const MilpModel& model) {
      std::ostringstream text;
      export_lp(model, text, fmt::format("uniplan deg={} c={} b={}", ctx.deg, ctx.c, ctx.micro_batch));
      lp_files[{ctx.deg, ctx.c}] = text.str();
    };
  }
  auto write_lps = [&] {
    if (args.export_lp.empty()) return;
    std::error_code ec;
    fs::create_directories(args.export_lp, ec);
    if (ec) throw IoError(fmt::format("cannot create directory {}: {}", args.export_lp, ec.message()));
    for (const auto& [key, text] : lp_files) {
      write_file(fs::path(args.export_lp) / fmt::format("deg{}_c{}.lp", key.first, key.second), text);
    }
    log.info("wrote {} LP files to {}", lp_files.size(), args.export_lp);
  };

  const auto start = std::chrono::steady_clock::now();
  ParallelPlan plan;
  try {
    plan = unified_optimize(graph, profile, args.batch, options);
  } catch (const InfeasibleError&) {
    write_lps();
    throw;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& o : plan.stats) {
    log.info("deg={} c={} {} nodes={} objective={}", o.deg, o.c, to_string(o.stats.terminated_by),
             o.stats.nodes_explored, o.objective ? fmt::format("{:.6e}", *o.objective) : o.witness);
  }

  PlanDocument doc = make_plan_document(plan, graph);
  doc.provenance.model_sha256 = sha256_hex(model_text);
  doc.provenance.profile_sha256 = sha256_hex(profile_text);
  doc.provenance.wall_time_s = wall;

  write_file(args.out, plan_to_json(doc).dump(2) + "\n");
  write_lps();

  print_summary(out, doc, stage_memory_limits(profile, plan.context));
  if (args.raw) print_raw(out, doc, enumerate_strategies(plan.context.per_stage_devices).size());
  return kOk;
}

// ---- validate ---------------------------------------------------------------

struct ValidateArgs {
  std::string plan;
  std::string model;
  std::string profile;
  std::string trace;
};

int cmd_validate(const ValidateArgs& args, std::ostream& out) {
  const ComputationGraph graph = load_model(load_json_file(args.model, "model"));
  const ClusterProfile profile = load_profile(load_json_file(args.profile, "profile"));
  const PlanDocument doc = plan_from_json(load_json_file(args.plan, "plan"));

  if (doc.layer_ids.size() != graph.size()) {
    throw InputError(fmt::format("plan has {} layers, model has {}", doc.layer_ids.size(), graph.size()));
  }
  for (std::size_t u = 0; u < graph.size(); ++u) {
    if (doc.layer_ids[u] != graph.nodes[u].id) {
      throw InputError(fmt::format("plan layer {} is id {}, model has id {}", u, doc.layer_ids[u], graph.nodes[u].id));
    }
  }
  const PlanContext ctx = make_context(profile.n, doc.context.deg, doc.context.mini_batch, doc.context.c,
                                       doc.context.precision, doc.context.inflight_rule);
  if (ctx.micro_batch != doc.context.micro_batch || ctx.per_stage_devices != doc.context.per_stage_devices) {
    throw InputError("plan micro-batch or devices per stage disagree with its deg, c and the profile");
  }
  const CostMatrices costs = build_cost_matrices(graph, profile, ctx);
  const std::vector<double> limits = stage_memory_limits(profile, ctx);

  std::vector<Violation> violations = check_assignment(doc.assignment, costs, graph, ctx, limits);
  bool in_range = doc.assignment.stage_of.size() == graph.size() && doc.assignment.strategy_of.size() == graph.size();
  for (std::size_t u = 0; in_range && u < graph.size(); ++u) {
    const int i = doc.assignment.stage_of[u];
    const int k = doc.assignment.strategy_of[u];
    if (i < 0 || i >= ctx.deg || k < 0 || k >= static_cast<int>(costs.num_strategies())) {
      in_range = false;
      break;
    }
    const auto& s = costs.space[static_cast<std::size_t>(k)];
    if (!(s == doc.strategies[u])) {
      violations.push_back({"strategy_selection",
                            fmt::format("layer {}: strategy index {} is {} but the document lists {}", graph.nodes[u].id,
                                        k, to_string(s), to_string(doc.strategies[u])),
                            0.0});
    }
  }

  out << fmt::format("est_tpi             {:.9e} s\n", doc.assignment.objective);
  if (in_range) {
    Assignment fresh = doc.assignment;
    fill_costs(fresh, costs, ctx.deg, ctx.c);
    const EventTrace trace = simulate_gpipe(stage_times_from(fresh, costs), ctx.c);
    out << fmt::format("simulated makespan  {:.9e} s\n", trace.makespan_s);
    if (trace.makespan_s > 0.0) {
      out << fmt::format("REE                 {:.6f}%\n", relative_error(trace.makespan_s, doc.assignment.objective));
    }
    if (!args.trace.empty()) write_file(args.trace, trace_to_json(trace).dump(2) + "\n");
  } else {
    out << "simulation skipped: stage or strategy index out of range\n";
  }

  if (violations.empty()) {
    out << "violations          0\n";
    return kOk;
  }
  out << fmt::format("violations          {}\n", violations.size());
  for (const auto& v : violations) out << fmt::format("  [{}] {}\n", v.family, v.message);
  return kViolations;
}

// ---- render -----------------------------------------------------------------

struct RenderArgs {
  std::string plan;
  std::string gantt;
  std::string trace;
  std::string out;
};

int cmd_render(const RenderArgs& args, std::ostream& out) {
  const PlanDocument doc = plan_from_json(load_json_file(args.plan, "plan"));
  if (!args.gantt.empty()) {
    if (args.trace.empty() || !fs::exists(args.trace)) {
      throw InputError("--gantt needs an event trace; run `uniplan validate --trace <path>` first");
    }
    const EventTrace trace = trace_from_json(load_json_file(args.trace, "trace"));
    if (trace.deg != doc.context.deg || trace.c != doc.context.c) {
      throw InputError(fmt::format("trace is for deg={} c={}, plan has deg={} c={}", trace.deg, trace.c,
                                   doc.context.deg, doc.context.c));
    }
    write_file(args.gantt, render_gantt_svg(trace));
  }
  const std::string map = render_stage_map(doc);
  if (args.out.empty()) {
    out << map;
  } else {
    write_file(args.out, map);
  }
  return kOk;
}

// ---- synth-profile / costs --------------------------------------------------

struct SynthArgs {
  int n = 0;
  double link_bw = 1e10;
  double latency = 1e-5;
  double mem = 16.0 * 1024 * 1024 * 1024;
  double ccoc = 0.5;
  std::string out;
};

void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty()) {
    out << text;
  } else {
    write_file(path, text);
  }
}

int cmd_synth(const SynthArgs& args, std::ostream& out) {
  if (args.n < 1) throw InputError("--n must be >= 1");
  if (!(args.link_bw > 0.0) || !(args.mem > 0.0) || !(args.latency >= 0.0)) {
    throw InputError("bandwidth and memory must be positive, latency non-negative");
  }
  if (!(args.ccoc >= 0.0 && args.ccoc <= 1.0)) throw InputError(fmt::format("ccoc out of range [0,1]: {}", args.ccoc));
  const ClusterProfile p = synth_profile(args.n, args.link_bw, args.latency, args.mem, args.ccoc);
  emit(out, args.out, serialize_profile(p).dump(2) + "\n");
  return kOk;
}

struct CostsArgs {
  std::string model;
  std::string profile;
  int batch = 0;
  int deg = 1;
  int c = 1;
  std::string precision = "fp32";
  std::string inflight = "gpipe";
  std::string out;
};

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(std::isfinite(m(r, c)) ? json(m(r, c)) : json(nullptr));
    rows.push_back(row);
  }
  return rows;
}

int cmd_costs(const CostsArgs& args, std::ostream& out) {
  const ComputationGraph graph = load_model(load_json_file(args.model, "model"));
  const ClusterProfile profile = load_profile(load_json_file(args.profile, "profile"));
  const PlanContext ctx = make_context(profile.n, args.deg, args.batch, args.c, parse_precision(args.precision),
                                       parse_inflight_rule(args.inflight));
  const CostMatrices costs = build_cost_matrices(graph, profile, ctx);
  json strategies = json::array();
  for (const auto& s : costs.space.strategies) strategies.push_back(to_string(s));
  json reshard = json::array();
  json cross = json::array();
  for (std::size_t e = 0; e < costs.edges.size(); ++e) {
    reshard.push_back(matrix_json(costs.reshard[e]));
    cross.push_back(matrix_json(costs.cross[e]));
  }
  json doc = {{"deg", ctx.deg},
              {"c", ctx.c},
              {"micro_batch", ctx.micro_batch},
              {"strategies", strategies},
              {"exec_s", matrix_json(costs.exec)},
              {"memory_bytes", matrix_json(costs.memory)},
              {"reshard_s", reshard},
              {"cross_s", cross}};
  emit(out, args.out, doc.dump(2) + "\n");
  return kOk;
}

}  // namespace

std::string render_stage_map(const PlanDocument& doc) {
  const auto& a = doc.assignment;
  std::string s = fmt::format("deg={} c={} est_tpi={:.6e} s\n", doc.context.deg, doc.context.c, a.objective);
  for (int i = 0; i < doc.context.deg; ++i) {
    s += fmt::format("stage {} |", i);
    for (std::size_t u = 0; u < a.stage_of.size(); ++u) {
      if (a.stage_of[u] == i) s += fmt::format(" {} {}", doc.layer_ids[u], to_string(doc.strategies.at(u)));
    }
    s += '\n';
  }
  return s;
}

std::string render_gantt_svg(const EventTrace& trace) {
  constexpr double kLabel = 110.0;
  constexpr double kPlot = 840.0;
  constexpr double kRow = 28.0;
  constexpr double kTop = 24.0;
  const int rows = 2 * trace.deg - 1;
  const double scale = trace.makespan_s > 0.0 ? kPlot / trace.makespan_s : 0.0;
  const double height = kTop + rows * kRow + 10.0;

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" font-family=\"monospace\" "
      "font-size=\"12\">\n",
      kLabel + kPlot + 10.0, height);
  s += fmt::format("<text x=\"{:.0f}\" y=\"16\">makespan {:.6e} s, deg={} c={}</text>\n", kLabel, trace.makespan_s,
                   trace.deg, trace.c);
  for (int r = 0; r < rows; ++r) {
    const bool stage = r < trace.deg;
    const int index = stage ? r : r - trace.deg;
    const std::string name = stage ? fmt::format("stage {}", index) : fmt::format("link {}-{}", index, index + 1);
    const double y = kTop + r * kRow;
    s += fmt::format("<g class=\"row\" data-resource=\"{}\">\n", name);
    s += fmt::format("  <text x=\"4\" y=\"{:.1f}\">{}</text>\n", y + kRow * 0.65, name);
    for (const auto& e : trace.events) {
      if ((e.resource == ResourceKind::kStage) != stage || e.index != index) continue;
      const bool fwd = e.phase == Phase::kForward;
      s += fmt::format(
          "  <rect x=\"{:.3f}\" y=\"{:.1f}\" width=\"{:.3f}\" height=\"{:.1f}\" fill=\"{}\" stroke=\"#222\" "
          "stroke-width=\"0.5\"><title>mb {} {}</title></rect>\n",
          kLabel + e.start_s * scale, y + 3.0, (e.end_s - e.start_s) * scale, kRow - 6.0, fwd ? "#4e79a7" : "#f28e2b",
          e.micro_batch, fwd ? "forward" : "backward");
    }
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);

  CLI::App app{"uniplan: hybrid pipeline / intra-layer parallel plan optimizer"};
  app.name("uniplan");
  app.require_subcommand(1);

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "Search every (deg, c) configuration and write the best plan");
  plan->add_option("--model", plan_args.model, "Model graph JSON")->required();
  plan->add_option("--profile", plan_args.profile, "Cluster profile JSON")->required();
  plan->add_option("--batch", plan_args.batch, "Mini-batch size B")->required();
  plan->add_option("--precision", plan_args.precision, "fp32 or fp16-mixed")->capture_default_str();
  plan->add_option("--inflight", plan_args.inflight, "Activation rule: gpipe or single")->capture_default_str();
  plan->add_option("--time-limit", plan_args.time_limit, "Seconds per configuration")->capture_default_str();
  plan->add_option("--gap", plan_args.gap, "Relative gap accepted at the time limit")->capture_default_str();
  plan->add_option("--out", plan_args.out, "Plan document path")->capture_default_str();
  plan->add_option("--export-lp", plan_args.export_lp, "Directory for one .lp file per configuration");
  plan->add_option("--jobs", plan_args.jobs, "Configurations solved in parallel")->capture_default_str();
  plan->add_flag("--raw", plan_args.raw, "Also print the 0/1 placement and strategy matrices");

  ValidateArgs validate_args;
  auto* validate = app.add_subcommand("validate", "Check a plan against the constraints and the simulator");
  validate->add_option("--plan", validate_args.plan, "Plan document")->required();
  validate->add_option("--model", validate_args.model, "Model graph JSON")->required();
  validate->add_option("--profile", validate_args.profile, "Cluster profile JSON")->required();
  validate->add_option("--trace", validate_args.trace, "Write the simulated event trace here");

  RenderArgs render_args;
  auto* render = app.add_subcommand("render", "Print the stage map, optionally an SVG Gantt chart");
  render->add_option("--plan", render_args.plan, "Plan document")->required();
  render->add_option("--gantt", render_args.gantt, "Write an SVG Gantt chart of --trace here");
  render->add_option("--trace", render_args.trace, "Event trace written by validate");
  render->add_option("--out", render_args.out, "Stage map path (default stdout)");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth-profile", "Write a uniform synthetic cluster profile");
  synth->add_option("--n", synth_args.n, "Device count")->required();
  synth->add_option("--link-bw", synth_args.link_bw, "Bytes/s for every link")->capture_default_str();
  synth->add_option("--latency", synth_args.latency, "Per-message latency in seconds")->capture_default_str();
  synth->add_option("--mem", synth_args.mem, "Bytes per device")->capture_default_str();
  synth->add_option("--ccoc", synth_args.ccoc, "Overlap coefficient in [0, 1]")->capture_default_str();
  synth->add_option("--out", synth_args.out, "Profile path (default stdout)");

  CostsArgs costs_args;
  auto* costs = app.add_subcommand("costs", "Dump the cost matrices of one configuration as JSON");
  costs->add_option("--model", costs_args.model, "Model graph JSON")->required();
  costs->add_option("--profile", costs_args.profile, "Cluster profile JSON")->required();
  costs->add_option("--batch", costs_args.batch, "Mini-batch size B")->required();
  costs->add_option("--deg", costs_args.deg, "Pipeline degree")->capture_default_str();
  costs->add_option("--c", costs_args.c, "Micro-batch count")->capture_default_str();
  costs->add_option("--precision", costs_args.precision, "fp32 or fp16-mixed")->capture_default_str();
  costs->add_option("--inflight", costs_args.inflight, "gpipe or single")->capture_default_str();
  costs->add_option("--out", costs_args.out, "Output path (default stdout)");

  std::vector<const char*> argv{"uniplan"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (plan->parsed()) return cmd_plan(plan_args, out, *log);
    if (validate->parsed()) return cmd_validate(validate_args, out);
    if (render->parsed()) return cmd_render(render_args, out);
    if (synth->parsed()) return cmd_synth(synth_args, out);
    if (costs->parsed()) return cmd_costs(costs_args, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kInputError;
}

}  // namespace uniplan::cli
