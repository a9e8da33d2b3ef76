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

#include <doctest.h>

#include <string>

#include "support.hpp"
#include "uniplan/profile.hpp"

using namespace uniplan;
using nlohmann::json;
using uniplan::testing::Rng;
using uniplan::testing::uniform;

namespace {

json minimal_doc() {
  return json::parse(R"({"n": 2, "mem_bytes_per_device": [8e9, 8e9], "allreduce_bw": {"2": 1e10},
                         "p2p_bw": {"default": 5e9}, "latency_s": 1e-5, "ccoc": 0.3})");
}

std::string load_error(const json& doc) {
  try {
    load_profile(doc);
  } catch (const ProfileError& e) {
    return e.what();
  }
  return "";
}

std::vector<int> keys(const ClusterProfile& p) {
  std::vector<int> out;
  for (const auto& [g, bw] : p.allreduce_bw) out.push_back(g);
  return out;
}

}  // namespace

TEST_CASE("load a minimal profile") {
  auto p = load_profile(minimal_doc());
  CHECK(p.n == 2);
  CHECK(p.mem_bytes_per_device == std::vector<double>{8e9, 8e9});
  CHECK(p.allreduce_bw.at(2) == 1e10);
  CHECK(p.p2p_bw() == 5e9);
  CHECK(p.latency_s == 1e-5);
  CHECK(p.ccoc == 0.3);
}

TEST_CASE("profile schema errors name the field") {
  auto doc = minimal_doc();
  doc["ccoc"] = 1.3;
  CHECK(load_error(doc).find("ccoc out of range") != std::string::npos);

  auto four = json::parse(R"({"n": 4, "mem_bytes_per_device": [1, 1, 1, 1], "allreduce_bw": {"2": 1e9},
                             "p2p_bw": 1e9, "latency_s": 0, "ccoc": 0})");
  const auto msg = load_error(four);
  CHECK(msg.find("allreduce_bw") != std::string::npos);
  CHECK(msg.find("4") != std::string::npos);

  doc = minimal_doc();
  doc["allreduce_bw"]["2"] = 0;
  CHECK(load_error(doc).find("allreduce_bw") != std::string::npos);

  doc = minimal_doc();
  doc["p2p_bw"]["default"] = -1;
  CHECK(load_error(doc).find("p2p_bw") != std::string::npos);

  doc = minimal_doc();
  doc["mem_bytes_per_device"] = json::array({1.0});
  CHECK(load_error(doc).find("mem_bytes_per_device") != std::string::npos);

  doc = minimal_doc();
  doc.erase("latency_s");
  CHECK(load_error(doc).find("latency_s") != std::string::npos);

  doc = minimal_doc();
  doc["allreduce_bw"]["x"] = 1e9;
  CHECK(load_error(doc).find("\"x\"") != std::string::npos);
}

TEST_CASE("p2p bandwidth as a scalar or with per-boundary overrides") {
  auto doc = minimal_doc();
  doc["p2p_bw"] = 3e9;
  CHECK(load_profile(doc).p2p_bw() == 3e9);
  doc["p2p_bw"] = json{{"default", 3e9}, {"0->2", 7e9}};
  auto p = load_profile(doc);
  CHECK(p.p2p_bw() == 3e9);
  CHECK(p.p2p_bw("0->2") == 7e9);
  CHECK(p.p2p_bw("1->3") == 3e9);
}

TEST_CASE("synthetic profiles carry every divisor") {
  auto p4 = synth_profile(4, 1e9, 1e-5, 12e9, 0.3);
  CHECK(keys(p4) == std::vector<int>{1, 2, 4});
  CHECK(p4.mem_bytes_per_device == std::vector<double>(4, 12e9));
  CHECK(p4.p2p_bw() == 1e9);
  CHECK(keys(synth_profile(1, 1e9, 0, 1, 0)) == std::vector<int>{1});
  CHECK(keys(synth_profile(8, 1e9, 0, 1, 0)) == std::vector<int>{1, 2, 4, 8});
}

TEST_CASE("profile round trip") {
  Rng rng(11);
  for (int n : {1, 2, 4, 6, 8}) {
    auto p = synth_profile(n, uniform(rng, 1e9, 1e11), uniform(rng, 0, 1e-4), uniform(rng, 1e9, 1e11),
                           uniform(rng, 0, 1));
    for (auto& [g, bw] : p.allreduce_bw) bw *= uniform(rng, 0.5, 1.0);
    p.p2p_bw_overrides["0->1"] = 1.25e9;
    auto q = load_profile(serialize_profile(p));
    CHECK(q.n == p.n);
    CHECK(q.mem_bytes_per_device == p.mem_bytes_per_device);
    CHECK(q.allreduce_bw == p.allreduce_bw);
    CHECK(q.p2p_bw_default == p.p2p_bw_default);
    CHECK(q.p2p_bw_overrides == p.p2p_bw_overrides);
    CHECK(q.latency_s == p.latency_s);
    CHECK(q.ccoc == p.ccoc);
  }
}

TEST_CASE("ring all-reduce time") {
  auto p = synth_profile(4, 1e9, 0.0, 1, 0);
  CHECK(allreduce_time(123.0, 1, p) == 0.0);
  CHECK(allreduce_time(1e9, 2, p) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(allreduce_time(1e9, 4, p) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK_THROWS_AS(allreduce_time(1.0, 3, p), InputError);

  auto lat = synth_profile(4, 1e9, 1e-5, 1, 0);
  CHECK(allreduce_time(0.0, 4, lat) == doctest::Approx(6e-5));
}

TEST_CASE("all-reduce monotonicity") {
  auto p = synth_profile(8, 2e9, 0.0, 1, 0);
  for (int g : {2, 4, 8}) {
    double prev = 0.0;
    for (double v = 0.0; v <= 1e9; v += 1e8) {
      const double t = allreduce_time(v, g, p);
      CHECK(t >= prev);
      prev = t;
    }
  }
  for (double v : {1.0, 1e6, 1e9}) {
    CHECK(allreduce_time(v, 2, p) <= allreduce_time(v, 4, p));
    CHECK(allreduce_time(v, 4, p) <= allreduce_time(v, 8, p));
  }
}

TEST_CASE("p2p time") {
  auto zero = synth_profile(2, 1e9, 0.0, 1, 0);
  CHECK(p2p_time(0.0, zero) == 0.0);
  CHECK(p2p_time(1e9, zero) == 1.0);
  auto lat = synth_profile(2, 1e9, 1e-5, 1, 0);
  CHECK(p2p_time(5e8, lat) == doctest::Approx(0.50001).epsilon(1e-14));
}

TEST_CASE("overlap") {
  CHECK(overlap(3, 2, 0) == 5);
  CHECK(overlap(3, 2, 1) == 3);
  CHECK(overlap(3, 2, 0.5) == 4);
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const double a = uniform(rng, 0, 10);
    const double b = uniform(rng, 0, 10);
    const double k = uniform(rng, 0, 1);
    const double v = overlap(a, b, k);
    CHECK(v >= std::max(a, b) - 1e-12);
    CHECK(v <= a + b + 1e-12);
    CHECK(v == overlap(b, a, k));
  }
}
