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

#include "uniplan/profile.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

namespace uniplan {

using nlohmann::json;

double ClusterProfile::p2p_bw(const std::optional<std::string>& boundary) const {
  if (boundary) {
    auto it = p2p_bw_overrides.find(*boundary);
    if (it != p2p_bw_overrides.end()) return it->second;
  }
  return p2p_bw_default;
}

double ClusterProfile::min_memory(int first, int count) const {
  if (first < 0 || count < 1 || first + count > static_cast<int>(mem_bytes_per_device.size())) {
    throw InputError(fmt::format("device range [{}, {}) outside cluster of {}", first, first + count,
                                 mem_bytes_per_device.size()));
  }
  auto begin = mem_bytes_per_device.begin() + first;
  return *std::min_element(begin, begin + count);
}

std::vector<int> collective_group_sizes(int n) {
  std::vector<int> out;
  for (int g = 2; g <= n; ++g) {
    if (n % g == 0) out.push_back(g);
  }
  return out;
}

namespace {

double positive_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ProfileError(fmt::format("{} must be a number", field));
  double v = j.get<double>();
  if (!std::isfinite(v) || v <= 0.0) throw ProfileError(fmt::format("{} must be positive, got {}", field, v));
  return v;
}

const json& required(const json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end()) throw ProfileError(fmt::format("missing field \"{}\"", field));
  return *it;
}

}  // namespace

ClusterProfile load_profile(const json& doc) {
  if (!doc.is_object()) throw ProfileError("profile document must be a JSON object");
  ClusterProfile p;

  const json& n = required(doc, "n");
  if (!n.is_number_integer() || n.get<long long>() < 1) throw ProfileError("n must be an integer >= 1");
  p.n = n.get<int>();

  const json& mem = required(doc, "mem_bytes_per_device");
  if (!mem.is_array()) throw ProfileError("mem_bytes_per_device must be an array");
  if (mem.size() != static_cast<std::size_t>(p.n)) {
    throw ProfileError(fmt::format("mem_bytes_per_device has {} entries, expected n = {}", mem.size(), p.n));
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    p.mem_bytes_per_device.push_back(positive_number(mem[i], fmt::format("mem_bytes_per_device[{}]", i)));
  }

  const json& ar = required(doc, "allreduce_bw");
  if (!ar.is_object()) throw ProfileError("allreduce_bw must be an object keyed by group size");
  for (const auto& [key, value] : ar.items()) {
    int g = 0;
    try {
      std::size_t used = 0;
      g = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ProfileError(fmt::format("allreduce_bw key \"{}\" is not a group size", key));
    }
    if (g < 1) throw ProfileError(fmt::format("allreduce_bw group size {} must be >= 1", g));
    p.allreduce_bw[g] = positive_number(value, fmt::format("allreduce_bw[\"{}\"]", key));
  }
  for (int g : collective_group_sizes(p.n)) {
    if (!p.allreduce_bw.contains(g)) {
      throw ProfileError(fmt::format("allreduce_bw is missing group size {}", g));
    }
  }

  const json& p2p = required(doc, "p2p_bw");
  if (p2p.is_number()) {
    p.p2p_bw_default = positive_number(p2p, "p2p_bw");
  } else if (p2p.is_object()) {
    if (!p2p.contains("default")) throw ProfileError("p2p_bw is missing \"default\"");
    for (const auto& [key, value] : p2p.items()) {
      double bw = positive_number(value, fmt::format("p2p_bw[\"{}\"]", key));
      if (key == "default") {
        p.p2p_bw_default = bw;
      } else {
        p.p2p_bw_overrides[key] = bw;
      }
    }
  } else {
    throw ProfileError("p2p_bw must be a number or an object");
  }

  const json& lat = required(doc, "latency_s");
  if (!lat.is_number() || !std::isfinite(lat.get<double>()) || lat.get<double>() < 0.0) {
    throw ProfileError("latency_s must be a non-negative number");
  }
  p.latency_s = lat.get<double>();

  const json& ccoc = required(doc, "ccoc");
  if (!ccoc.is_number()) throw ProfileError("ccoc must be a number");
  p.ccoc = ccoc.get<double>();
  if (!(p.ccoc >= 0.0 && p.ccoc <= 1.0)) throw ProfileError(fmt::format("ccoc out of range [0,1]: {}", p.ccoc));

  return p;
}

json serialize_profile(const ClusterProfile& p) {
  json doc;
  doc["n"] = p.n;
  doc["mem_bytes_per_device"] = p.mem_bytes_per_device;
  json ar = json::object();
  for (const auto& [g, bw] : p.allreduce_bw) ar[std::to_string(g)] = bw;
  doc["allreduce_bw"] = ar;
  json p2p = json::object();
  p2p["default"] = p.p2p_bw_default;
  for (const auto& [key, bw] : p.p2p_bw_overrides) p2p[key] = bw;
  doc["p2p_bw"] = p2p;
  doc["latency_s"] = p.latency_s;
  doc["ccoc"] = p.ccoc;
  return doc;
}

ClusterProfile synth_profile(int n, double link_bw, double latency_s, double mem_bytes, double ccoc) {
  if (n < 1) throw InputError("synth_profile: n must be >= 1");
  if (!(link_bw > 0.0)) throw InputError("synth_profile: link_bw must be positive");
  ClusterProfile p;
  p.n = n;
  p.mem_bytes_per_device.assign(static_cast<std::size_t>(n), mem_bytes);
  for (int g = 1; g <= n; ++g) {
    if (n % g == 0) p.allreduce_bw[g] = link_bw;
  }
  p.p2p_bw_default = link_bw;
  p.latency_s = latency_s;
  p.ccoc = ccoc;
  return p;
}

double allreduce_time(double volume_bytes, int group, const ClusterProfile& profile) {
  if (group < 1) throw InputError(fmt::format("all-reduce group size must be >= 1, got {}", group));
  if (group == 1) return 0.0;
  auto it = profile.allreduce_bw.find(group);
  if (it == profile.allreduce_bw.end()) {
    throw InputError(fmt::format("profile has no all-reduce bandwidth for group size {}", group));
  }
  const double steps = static_cast<double>(group - 1);
  return 2.0 * steps / group * volume_bytes / it->second + 2.0 * steps * profile.latency_s;
}

double p2p_time(double volume_bytes, const ClusterProfile& profile) {
  return volume_bytes / profile.p2p_bw_default + profile.latency_s;
}

double overlap(double compute_s, double comm_s, double ccoc) {
  return compute_s + comm_s - ccoc * std::min(compute_s, comm_s);
}

}  // namespace uniplan
