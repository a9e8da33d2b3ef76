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

#include <filesystem>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "support.hpp"
#include "uniplan/cli.hpp"
#include "uniplan/io.hpp"
#include "uniplan/pipeline_sim.hpp"

using namespace uniplan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = UNIPLAN_FIXTURES_DIR;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("uniplan_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

std::string fixture(const std::string& name) { return (kFixtures / name).string(); }

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

Run plan_bert(const std::string& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"plan",    "--model", fixture("bert8_model.json"), "--profile",
                                fixture("synth4_profile.json"), "--batch", "32", "--out", out};
  args.insert(args.end(), extra.begin(), extra.end());
  return run(args);
}

Run validate(const std::string& plan, const std::string& model = fixture("bert8_model.json"),
             const std::string& profile = fixture("synth4_profile.json"), std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"validate", "--plan", plan, "--model", model, "--profile", profile};
  args.insert(args.end(), extra.begin(), extra.end());
  return run(args);
}

json read_json(const std::string& path) { return json::parse(read_file(path)); }

}  // namespace

TEST_CASE("plan on the chain fixture matches the exhaustive sweep") {
  Scratch s("chain");
  auto r = run({"plan", "--model", fixture("chain4_model.json"), "--profile", fixture("synth2_profile.json"),
                "--batch", "2", "--out", s / "plan.json"});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("est_tpi") != std::string::npos);
  CHECK(r.out.find("sweep          2 configurations") != std::string::npos);

  auto doc = plan_from_json(read_json(s / "plan.json"));
  auto graph = load_model(read_json(fixture("chain4_model.json")));
  auto profile = load_profile(read_json(fixture("synth2_profile.json")));
  std::optional<double> best;
  std::optional<std::pair<int, int>> where;
  for (auto [deg, c] : std::vector<std::pair<int, int>>{{1, 1}, {2, 2}}) {
    auto ctx = make_context(profile.n, deg, 2, c);
    auto cm = build_cost_matrices(graph, profile, ctx);
    auto ex = solve_exhaustive(cm, graph, ctx, stage_memory_limits(profile, ctx));
    if (ex.assignment && (!best || ex.assignment->objective < *best)) {
      best = ex.assignment->objective;
      where = std::pair{deg, c};
    }
  }
  REQUIRE(best);
  CHECK(doc.context.deg == where->first);
  CHECK(doc.context.c == where->second);
  CHECK(doc.assignment.objective == doctest::Approx(*best).epsilon(1e-12));
  CHECK(doc.layer_ids == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("input errors exit 1") {
  Scratch s("input");
  auto zero = run({"plan", "--model", fixture("chain4_model.json"), "--profile", fixture("synth2_profile.json"),
                   "--batch", "0", "--out", s / "plan.json"});
  CHECK(zero.code == cli::kInputError);
  CHECK(zero.err.find("batch must be ≥ 1") != std::string::npos);
  CHECK_FALSE(fs::exists(s / "plan.json"));

  write_file(s / "broken.json", "{\"layers\": [");
  auto malformed = run({"plan", "--model", s / "broken.json", "--profile", fixture("synth2_profile.json"),
                        "--batch", "2", "--out", s / "plan.json"});
  CHECK(malformed.code == cli::kInputError);

  CHECK(run({"plan", "--model", fixture("chain4_model.json")}).code == cli::kInputError);
  CHECK(run({"frobnicate"}).code == cli::kInputError);
  CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("infeasible exits 2 and I/O failures exit 4") {
  Scratch s("exit");
  REQUIRE(run({"synth-profile", "--n", "2", "--mem", "1000", "--out", s / "tiny.json"}).code == cli::kOk);
  auto inf = run({"plan", "--model", fixture("chain4_model.json"), "--profile", s / "tiny.json", "--batch", "2",
                  "--out", s / "plan.json"});
  CHECK(inf.code == cli::kInfeasible);
  CHECK(inf.err.find("deg=1 c=1") != std::string::npos);
  CHECK(inf.err.find("deg=2 c=2") != std::string::npos);

  auto missing = run({"plan", "--model", s / "nope.json", "--profile", fixture("synth2_profile.json"), "--batch",
                      "2", "--out", s / "plan.json"});
  CHECK(missing.code == cli::kIoError);
  auto unwritable = run({"plan", "--model", fixture("chain4_model.json"), "--profile",
                         fixture("synth2_profile.json"), "--batch", "2", "--out", "/nonexistent/dir/plan.json"});
  CHECK(unwritable.code == cli::kIoError);
}

TEST_CASE("LP export writes one file per configuration") {
  Scratch s("lp");
  auto r = plan_bert(s / "plan.json", {"--export-lp", s / "lp"});
  REQUIRE(r.code == cli::kOk);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(s / "lp")) {
    CHECK(e.path().extension() == ".lp");
    ++files;
  }
  // n = 4, B = 32: 1 + 2 * 5 configurations.
  CHECK(files == 11);
  const auto text = read_file(s / "lp/deg2_c16.lp");
  auto summary = uniplan::testing::read_lp(text);
  CHECK(summary.has_minimize);
  CHECK(summary.has_end);
  CHECK(summary.rows_by_prefix["comp"] == 2);
  CHECK(summary.rows_by_prefix["comm"] == 1);

  Scratch again("lp_again");
  REQUIRE(plan_bert(again / "plan.json", {"--export-lp", again / "lp"}).code == cli::kOk);
  CHECK(read_file(again / "lp/deg2_c16.lp") == text);
}

TEST_CASE("validate a planner-native plan") {
  Scratch s("validate");
  REQUIRE(plan_bert(s / "plan.json").code == cli::kOk);
  auto r = validate(s / "plan.json", fixture("bert8_model.json"), fixture("synth4_profile.json"),
                    {"--trace", s / "trace.json"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("REE                 0.000000%") != std::string::npos);
  CHECK(r.out.find("violations          0") != std::string::npos);
  auto trace = trace_from_json(read_json(s / "trace.json"));
  auto doc = plan_from_json(read_json(s / "plan.json"));
  CHECK(trace.deg == doc.context.deg);
  CHECK(relative_error(trace.makespan_s, doc.assignment.objective) <= 1e-9);
}

TEST_CASE("validate reports edited plans") {
  Scratch s("edited");
  REQUIRE(plan_bert(s / "plan.json").code == cli::kOk);
  auto doc = read_json(s / "plan.json");
  REQUIRE(doc["plan"]["deg"].get<int>() >= 2);

  auto empty = doc;
  for (auto& st : empty["plan"]["stage_of"]) st = 0;
  write_file(s / "empty.json", empty.dump());
  auto re = validate(s / "empty.json");
  CHECK(re.code == cli::kViolations);
  CHECK(re.out.find("[layer_placement]") != std::string::npos);
  CHECK(re.out.find("has no layers") != std::string::npos);

  auto stale = doc;
  stale["plan"]["est_tpi"] = doc["plan"]["est_tpi"].get<double>() * 1.01;
  write_file(s / "stale.json", stale.dump());
  auto rs = validate(s / "stale.json");
  CHECK(rs.code == cli::kViolations);
  CHECK(rs.out.find("objective mismatch") != std::string::npos);

  auto other = validate(s / "plan.json", fixture("chain4_model.json"));
  CHECK(other.code == cli::kInputError);
}

TEST_CASE("render the stage map and the Gantt chart") {
  Scratch s("render");
  REQUIRE(plan_bert(s / "plan.json").code == cli::kOk);
  auto map = run({"render", "--plan", s / "plan.json"});
  REQUIRE(map.code == cli::kOk);
  auto doc = plan_from_json(read_json(s / "plan.json"));
  CHECK(map.out.find(fmt::format("deg={} c={}", doc.context.deg, doc.context.c)) != std::string::npos);
  CHECK(count_of(map.out, "stage ") == static_cast<std::size_t>(doc.context.deg));
  CHECK(run({"render", "--plan", s / "plan.json"}).out == map.out);

  auto missing = run({"render", "--plan", s / "plan.json", "--gantt", s / "g.svg"});
  CHECK(missing.code == cli::kInputError);
  CHECK(missing.err.find("--gantt needs an event trace") != std::string::npos);

  REQUIRE(validate(s / "plan.json", fixture("bert8_model.json"), fixture("synth4_profile.json"),
                   {"--trace", s / "trace.json"})
              .code == cli::kOk);
  auto g = run({"render", "--plan", s / "plan.json", "--trace", s / "trace.json", "--gantt", s / "g.svg"});
  REQUIRE(g.code == cli::kOk);
  const auto svg = read_file(s / "g.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(count_of(svg, "class=\"row\"") == static_cast<std::size_t>(2 * doc.context.deg - 1));

  StageTimes t{{1, 1}, {2, 2}, {0.5}, {1}};
  CHECK(count_of(cli::render_gantt_svg(simulate_gpipe(t, 4)), "class=\"row\"") == 3);
  CHECK(cli::render_gantt_svg(simulate_gpipe(t, 4)) == cli::render_gantt_svg(simulate_gpipe(t, 4)));
}

TEST_CASE("worker count does not change the plan document") {
  Scratch s("jobs");
  REQUIRE(plan_bert(s / "one.json", {"--jobs", "1"}).code == cli::kOk);
  REQUIRE(plan_bert(s / "eight.json", {"--jobs", "8"}).code == cli::kOk);
  auto a = plan_to_json(plan_from_json(read_json(s / "one.json")), false);
  auto b = plan_to_json(plan_from_json(read_json(s / "eight.json")), false);
  // Node counts and wall time depend on scheduling; the plan does not.
  CHECK(a["plan"] == b["plan"]);
  REQUIRE(a["sweep"].size() == b["sweep"].size());
  for (std::size_t i = 0; i < a["sweep"].size(); ++i) {
    CHECK(a["sweep"][i]["objective"] == b["sweep"][i]["objective"]);
    CHECK(a["sweep"][i]["status"] == b["sweep"][i]["status"]);
  }
}

TEST_CASE("synth-profile and costs") {
  Scratch s("synth");
  REQUIRE(run({"synth-profile", "--n", "4", "--out", s / "p.json"}).code == cli::kOk);
  auto p = load_profile(read_json(s / "p.json"));
  CHECK(p.n == 4);
  CHECK(p.allreduce_bw.count(4) == 1);
  CHECK(run({"synth-profile", "--n", "4", "--ccoc", "2"}).code == cli::kInputError);

  auto c = run({"costs", "--model", fixture("chain4_model.json"), "--profile", s / "p.json", "--batch", "4",
                "--deg", "2", "--c", "2"});
  REQUIRE(c.code == cli::kOk);
  auto j = json::parse(c.out);
  CHECK(j.dump().find("exec") != std::string::npos);
}

TEST_CASE("raw matrices") {
  Scratch s("raw");
  auto r = plan_bert(s / "plan.json", {"--raw"});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("P (layers x stages)") != std::string::npos);
  CHECK(r.out.find("S (layers x strategies)") != std::string::npos);
  CHECK(count_of(r.out, "  layer ") == 16);
}
