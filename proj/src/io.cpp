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

#include "uniplan/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#ifndef UNIPLAN_VERSION
#define UNIPLAN_VERSION "0.0.0"
#endif

namespace uniplan {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {} for reading", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("error reading {}", path.string()));
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << content;
  out.flush();
  if (!out) throw IoError(fmt::format("error writing {}", path.string()));
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("{} is not valid JSON: {}", what, e.what()));
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

namespace {

const json& field(const json& obj, const char* name, const std::string& where) {
  auto it = obj.find(name);
  if (it == obj.end()) throw InputError(fmt::format("{}: missing field \"{}\"", where, name));
  return *it;
}

double number(const json& obj, const char* name, const std::string& where) {
  const json& v = field(obj, name, where);
  if (!v.is_number()) throw InputError(fmt::format("{}: \"{}\" must be a number", where, name));
  return v.get<double>();
}

int integer(const json& obj, const char* name, const std::string& where) {
  const json& v = field(obj, name, where);
  if (!v.is_number_integer()) throw InputError(fmt::format("{}: \"{}\" must be an integer", where, name));
  return v.get<int>();
}

std::map<int, double> tp_table(const json& obj, const char* name, const std::string& where) {
  const json& t = field(obj, name, where);
  if (!t.is_object()) throw InputError(fmt::format("{}: \"{}\" must be an object keyed by TP size", where, name));
  std::map<int, double> out;
  for (const auto& [key, value] : t.items()) {
    int tp = 0;
    try {
      std::size_t used = 0;
      tp = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw InputError(fmt::format("{}: \"{}\" key \"{}\" is not a TP size", where, name, key));
    }
    if (!value.is_number()) throw InputError(fmt::format("{}: \"{}\"[\"{}\"] must be a number", where, name, key));
    out[tp] = value.get<double>();
  }
  return out;
}

json tp_table_json(const std::map<int, double>& table) {
  json out = json::object();
  for (const auto& [tp, v] : table) out[std::to_string(tp)] = v;
  return out;
}

// JSON has no infinity; non-finite numbers are written as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double null_as_inf(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

std::vector<double> doubles(const json& arr) {
  std::vector<double> out;
  for (const auto& v : arr) out.push_back(v.get<double>());
  return out;
}

Termination parse_termination(const std::string& s) {
  for (auto t : {Termination::kOptimal, Termination::kTimeLimit, Termination::kInfeasible, Termination::kCutoff}) {
    if (to_string(t) == s) return t;
  }
  throw InputError(fmt::format("unknown termination \"{}\"", s));
}

}  // namespace

ComputationGraph load_model(const json& doc) {
  if (!doc.is_object()) throw InputError("model document must be a JSON object");
  ComputationGraph g;
  const json& layers = field(doc, "layers", "model");
  if (!layers.is_array()) throw InputError("model: \"layers\" must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const json& l = layers[i];
    const std::string where = fmt::format("layers[{}]", i);
    if (!l.is_object()) throw InputError(where + " must be an object");
    LayerNode n;
    n.id = integer(l, "id", where);
    if (auto k = l.find("kind"); k != l.end()) {
      if (!k->is_string()) throw InputError(where + ": \"kind\" must be a string");
      n.kind = k->get<std::string>();
    }
    n.fwd_time_per_sample = tp_table(l, "fwd_time_per_sample", where);
    n.param_bytes = number(l, "param_bytes", where);
    n.act_bytes_per_sample = tp_table(l, "act_bytes_per_sample", where);
    n.ctx_bytes = number(l, "ctx_bytes", where);
    n.tp_comm_bytes_per_sample = number(l, "tp_comm_bytes_per_sample", where);
    g.nodes.push_back(std::move(n));
  }
  const json& edges = field(doc, "edges", "model");
  if (!edges.is_array()) throw InputError("model: \"edges\" must be an array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const json& e = edges[i];
    const std::string where = fmt::format("edges[{}]", i);
    if (!e.is_object()) throw InputError(where + " must be an object");
    g.edges.push_back({integer(e, "src", where), integer(e, "dst", where), number(e, "tensor_bytes_per_sample", where)});
  }
  return g;
}

json serialize_model(const ComputationGraph& graph) {
  json layers = json::array();
  for (const auto& n : graph.nodes) {
    layers.push_back({{"id", n.id},
                      {"kind", n.kind},
                      {"fwd_time_per_sample", tp_table_json(n.fwd_time_per_sample)},
                      {"param_bytes", n.param_bytes},
                      {"act_bytes_per_sample", tp_table_json(n.act_bytes_per_sample)},
                      {"ctx_bytes", n.ctx_bytes},
                      {"tp_comm_bytes_per_sample", n.tp_comm_bytes_per_sample}});
  }
  json edges = json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"tensor_bytes_per_sample", e.tensor_bytes_per_sample}});
  }
  return {{"layers", layers}, {"edges", edges}};
}

PlanDocument make_plan_document(const ParallelPlan& plan, const ComputationGraph& graph) {
  PlanDocument doc;
  doc.context = plan.context;
  for (const auto& n : graph.nodes) doc.layer_ids.push_back(n.id);
  doc.assignment = plan.assignment;
  const StrategySpace space = enumerate_strategies(plan.context.per_stage_devices);
  for (int k : plan.assignment.strategy_of) doc.strategies.push_back(space[static_cast<std::size_t>(k)]);
  doc.sweep = plan.stats;
  doc.provenance.planner_version = UNIPLAN_VERSION;
  for (const auto& o : plan.stats) doc.provenance.config_wall_time_s.push_back(o.stats.wall_time);
  return doc;
}

json plan_to_json(const PlanDocument& doc, bool with_provenance) {
  const auto& a = doc.assignment;
  json strategies = json::array();
  for (std::size_t u = 0; u < a.strategy_of.size(); ++u) {
    const auto& s = doc.strategies.at(u);
    strategies.push_back({{"index", a.strategy_of[u]}, {"dp", s.dp}, {"tp", s.tp}, {"fsdp", s.fsdp_shard}});
  }
  json plan = {{"deg", doc.context.deg},
               {"c", doc.context.c},
               {"mini_batch", doc.context.mini_batch},
               {"micro_batch", doc.context.micro_batch},
               {"per_stage_devices", doc.context.per_stage_devices},
               {"precision", to_string(doc.context.precision)},
               {"inflight_rule", to_string(doc.context.inflight_rule)},
               {"est_tpi", a.objective},
               {"layer_ids", doc.layer_ids},
               {"stage_of", a.stage_of},
               {"strategy_of", strategies},
               {"stage_cost_s", a.per_stage_cost},
               {"boundary_cost_s", a.per_boundary_cost},
               {"stage_memory_bytes", a.per_stage_memory}};

  json sweep = json::array();
  for (const auto& o : doc.sweep) {
    sweep.push_back({{"deg", o.deg},
                     {"c", o.c},
                     {"status", to_string(o.stats.terminated_by)},
                     {"objective", o.objective ? json(*o.objective) : json(nullptr)},
                     {"nodes_explored", o.stats.nodes_explored},
                     {"incumbent", finite_or_null(o.stats.incumbent)},
                     {"best_bound", finite_or_null(o.stats.best_bound)},
                     {"gap", finite_or_null(o.stats.gap)},
                     {"witness", o.witness}});
  }

  json out = {{"version", kPlanVersion}, {"plan", plan}, {"sweep", sweep}};
  if (with_provenance) {
    const auto& p = doc.provenance;
    out["provenance"] = {{"model_sha256", p.model_sha256},
                         {"profile_sha256", p.profile_sha256},
                         {"planner_version", p.planner_version},
                         {"wall_time_s", p.wall_time_s},
                         {"config_wall_time_s", p.config_wall_time_s}};
  }
  return out;
}

PlanDocument plan_from_json(const json& document) {
  PlanDocument doc;
  try {
    if (!document.is_object()) throw InputError("plan document must be a JSON object");
    const auto version = document.at("version").get<std::string>();
    if (version != kPlanVersion) {
      throw InputError(fmt::format("unsupported plan document version \"{}\" (expected {})", version, kPlanVersion));
    }
    const json& p = document.at("plan");
    auto& ctx = doc.context;
    ctx.deg = p.at("deg").get<int>();
    ctx.c = p.at("c").get<int>();
    ctx.mini_batch = p.at("mini_batch").get<int>();
    ctx.micro_batch = p.at("micro_batch").get<int>();
    ctx.per_stage_devices = p.at("per_stage_devices").get<int>();
    ctx.precision = parse_precision(p.at("precision").get<std::string>());
    ctx.inflight_rule = parse_inflight_rule(p.at("inflight_rule").get<std::string>());

    auto& a = doc.assignment;
    a.objective = p.at("est_tpi").get<double>();
    doc.layer_ids = p.at("layer_ids").get<std::vector<int>>();
    a.stage_of = p.at("stage_of").get<std::vector<int>>();
    for (const auto& s : p.at("strategy_of")) {
      a.strategy_of.push_back(s.at("index").get<int>());
      doc.strategies.push_back({s.at("dp").get<int>(), s.at("tp").get<int>(), s.at("fsdp").get<bool>()});
    }
    a.per_stage_cost = doubles(p.at("stage_cost_s"));
    a.per_boundary_cost = doubles(p.at("boundary_cost_s"));
    a.per_stage_memory = doubles(p.at("stage_memory_bytes"));
    if (doc.layer_ids.size() != a.stage_of.size() || a.stage_of.size() != a.strategy_of.size()) {
      throw InputError("plan: layer_ids, stage_of and strategy_of must have equal length");
    }

    if (auto it = document.find("sweep"); it != document.end()) {
      for (const auto& s : *it) {
        ConfigOutcome o;
        o.deg = s.at("deg").get<int>();
        o.c = s.at("c").get<int>();
        o.stats.terminated_by = parse_termination(s.at("status").get<std::string>());
        if (!s.at("objective").is_null()) o.objective = s.at("objective").get<double>();
        o.stats.nodes_explored = s.at("nodes_explored").get<std::uint64_t>();
        o.stats.incumbent = null_as_inf(s.at("incumbent"));
        o.stats.best_bound = null_as_inf(s.at("best_bound"));
        o.stats.gap = null_as_inf(s.at("gap"));
        o.witness = s.at("witness").get<std::string>();
        doc.sweep.push_back(std::move(o));
      }
    }
    if (auto it = document.find("provenance"); it != document.end()) {
      auto& pv = doc.provenance;
      pv.model_sha256 = it->at("model_sha256").get<std::string>();
      pv.profile_sha256 = it->at("profile_sha256").get<std::string>();
      pv.planner_version = it->at("planner_version").get<std::string>();
      pv.wall_time_s = it->at("wall_time_s").get<double>();
      pv.config_wall_time_s = doubles(it->at("config_wall_time_s"));
      for (std::size_t i = 0; i < doc.sweep.size() && i < pv.config_wall_time_s.size(); ++i) {
        doc.sweep[i].stats.wall_time = pv.config_wall_time_s[i];
      }
    }
  } catch (const json::exception& e) {
    throw InputError(fmt::format("malformed plan document: {}", e.what()));
  }
  return doc;
}

}  // namespace uniplan
