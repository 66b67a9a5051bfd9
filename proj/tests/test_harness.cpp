#include <doctest.h>

#include "pathflow/cli.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/harness.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pathflow;

namespace {

const char* kBase = R"([scenario]
name = t
flow = ou
T = 1
steps = 20
paths = 100
seed = 3
x0 = 0.5 0
y0 = 0 0
checks = check_contraction, check_cocycle

[flow]
dim = 2
lambda = 1
)";

Scenario parse(const std::string& text) { return scenario_from_config(ConfigDocument::parse(text)); }

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

// Line number carried by the ConfigError thrown for `text`, or -1.
int error_line(const std::string& text, std::string* message = nullptr) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    if (message) *message = e.what();
    return e.line();
  }
  return -1;
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  args.insert(args.begin(), "pathflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("config parses and echoes") {
    const Scenario s = parse(kBase);
    CHECK(s.name == "t");
    CHECK(s.T == 1.0);
    CHECK(s.steps == 20);
    CHECK(s.n_paths == 100);
    CHECK(s.checks == std::vector<std::string>{"check_contraction", "check_cocycle"});
    CHECK(s.line_of("T") == 4);
  }

  TEST_CASE("validation errors name the field and line") {
    std::string msg;
    const std::string sphere = R"([scenario]
name = s
flow = shrinking-sphere
T = 6
steps = 20
paths = 100
x0 = 0.1 0.1
checks = check_norm_bound

[flow]
r0 = 2
rate = 0.2
)";
    CHECK(error_line(sphere, &msg) == 4);
    CHECK(msg.find("'T'") != std::string::npos);
    CHECK(msg.find("horizon") != std::string::npos);

    CHECK(error_line(replace(kBase, "steps = 20", "steps = 5")) == 5);
    CHECK(error_line(replace(kBase, "paths = 100", "paths = 99")) == 6);
    CHECK(error_line(replace(kBase, "check_cocycle", "check_nothing"), &msg) == 10);
    CHECK(msg.find("check_nothing") != std::string::npos);
    CHECK(error_line(replace(kBase, "flow = ou", "flow = torus"), &msg) == 3);
    CHECK(msg.find("torus") != std::string::npos);
    CHECK(error_line(replace(kBase, "x0 = 0.5 0", "x0 = 0.5")) == 8);
    CHECK(error_line(replace(kBase, "y0 = 0 0\n", "")) == 9);  // contraction needs y0
    CHECK(error_line(replace(kBase, "check_cocycle", "check_contraction")) == 10);
    CHECK(error_line(replace(kBase, "lambda = 1", "lambda = 1\nmu = 2")) == 15);
    CHECK(error_line(std::string(kBase) + "\n[params]\nbogus = 1\n") == 17);
    CHECK(error_line(std::string(kBase) + "\n[params]\np = -1\n") == 17);
    CHECK(error_line(std::string(kBase) + "\n[other]\n") == 16);
    CHECK(error_line(replace(kBase, "check_cocycle", "check_psi_transport") +
                     "\n[params]\nregion = box 1\n") == 17);
    CHECK(error_line(replace(kBase, "check_cocycle", "check_bismut") +
                     "\n[params]\nf = sin(x3)\n") == 17);
  }

  TEST_CASE("registry and describe") {
    CHECK(builtin_scenarios().size() >= 12);
    for (const auto& b : builtin_scenarios()) CHECK_NOTHROW(builtin_scenario(b.name));
    CHECK(check_registry().size() == 16);
    CHECK(describe("check_talagrand").find("Talagrand") != std::string::npos);
    CHECK(describe("ou-contraction").find("check_contraction") != std::string::npos);
    CHECK_THROWS_AS(describe("check_unknown"), ConfigError);
    CHECK_THROWS_AS(builtin_scenario("nope"), ConfigError);
  }

  TEST_CASE("reports are deterministic and independent of the worker count") {
    const Scenario s = builtin_scenario("smoke");
    const std::string a = report_json(run_scenario(s, Execution{1, false}));
    CHECK(report_json(run_scenario(s, Execution{1, true})) == a);
    CHECK(report_json(run_scenario(s, Execution{4, false})) == a);
    CHECK(report_json(run_scenario(s, Execution{8, false})) == a);

    const auto j = nlohmann::json::parse(a);
    CHECK(j["rng"]["generator"] == "Philox4x32-10");
    CHECK(j["checks"].size() == s.checks.size());
    for (std::size_t i = 0; i < s.checks.size(); ++i) CHECK(j["checks"][i]["check"] == s.checks[i]);
    CHECK(!j.contains("wall_seconds"));
  }

  TEST_CASE("a failing check does not stop the others") {
    // Started far from the boundary, no path touches it: the penalized check errors.
    const Scenario s = parse(R"([scenario]
name = far
flow = half-line
T = 0.1
steps = 20
paths = 100
x0 = 50
checks = check_penalized_limit, check_cocycle
)");
    const ScenarioReport r = run_scenario(s);
    REQUIRE(r.checks.size() == 2);
    CHECK(r.checks[0].errored);
    CHECK(r.checks[0].error_type == "argument");
    CHECK(!r.checks[1].errored);
    CHECK(r.checks[1].pass());
    CHECK(exit_code(r) == kExitRuntime);
    CHECK(report_json(r).find("\"status\": \"error\"") != std::string::npos);
  }

  TEST_CASE("pass is derived from the verdicts") {
    // A declared bound K = 5 on a flat metric is false: contraction must fail.
    const Scenario s = parse(R"([scenario]
name = false-bound
flow = expression
T = 1
steps = 20
paths = 100
x0 = 1 0
y0 = 0 0
checks = check_contraction

[flow]
dim = 2
metric.11 = 1
metric.22 = 1
K = 5
)");
    const ScenarioReport r = run_scenario(s);
    CHECK(!r.pass());
    CHECK(exit_code(r) == kExitFail);
    CHECK(!r.checks[0].verdicts[0].pass);
  }

  TEST_CASE("CLI exit codes and outputs") {
    std::string out, err;
    CHECK(cli({"list"}, &out) == 0);
    CHECK(out.find("ou-contraction") != std::string::npos);
    CHECK(cli({"describe", "check_lsi"}, &out) == 0);
    CHECK(cli({"describe", "nothing"}) == kExitConfig);
    CHECK(cli({"run", "no-such-file.cfg"}) == kExitConfig);
    CHECK(cli({"run", "smoke", "--paths", "10"}) == kExitConfig);
    CHECK(cli({"frobnicate"}) == kExitConfig);
    CHECK(cli({"run", "ou-contraction"}, &out, &err) == kExitPass);
    CHECK(nlohmann::json::parse(out)["pass"] == true);
    CHECK(err.find("PASS") != std::string::npos);

    namespace fs = std::filesystem;
    const fs::path dir = fs::current_path() / "harness_test_tmp";
    fs::create_directories(dir);
    const std::string report = (dir / "r.json").string(), trace = (dir / "t.csv").string();
    CHECK(cli({"run", "ou-contraction", "--out", report, "--trace", trace, "--workers", "2"}) ==
          kExitPass);
    CHECK(fs::exists(report));
    CHECK(fs::exists(report + ".timing.json"));
    std::ifstream t(trace);
    std::string header, row;
    std::getline(t, header);
    std::getline(t, row);
    CHECK(header == "scenario,check,s_k,value,se");
    CHECK(row.rfind("ou-contraction,check_contraction/contraction,0,1,", 0) == 0);
    CHECK(cli({"run", "smoke", "--out", (dir / "missing" / "r.json").string()}) == kExitRuntime);
    fs::remove_all(dir);
  }
}
