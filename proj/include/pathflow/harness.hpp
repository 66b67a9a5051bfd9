#pragma once

#include "pathflow/config.hpp"
#include "pathflow/metric_flow.hpp"
#include "pathflow/parallel.hpp"
#include "pathflow/transport.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace pathflow {

/// One runnable experiment: a flow, a start, a grid, an ensemble and the checks to run.
///
/// Config grammar (see config.hpp for the line syntax):
///   [scenario]  name, description, flow, T, steps, paths, seed, x0, y0, checks
///   [flow]      built-in flow parameters, or an expression flow when flow = expression
///   [params]    check parameters (see check_registry for the keys each check reads)
struct Scenario {
  std::string name;
  std::string description;
  std::string flow;            // built-in flow name or "expression"
  ConfigSection flow_section;  // [flow]
  ConfigSection params;        // [params]
  double T = 1.0;
  std::size_t steps = 100;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  Vec x0;
  Vec y0;  // empty when not given
  std::vector<std::string> checks;
  std::map<std::string, int> lines;  // [scenario] key -> source line
  std::string source;                // file path or "builtin"

  int line_of(const std::string& key) const;
};

/// Parses a scenario document. Throws ConfigError (with the line) on unknown sections,
/// keys, checks or flows and on violated invariants; see validate_scenario.
Scenario scenario_from_config(const ConfigDocument& doc, const std::string& source = "");
Scenario load_scenario_file(const std::string& path);

/// Builds the flow and enforces T < horizon, steps >= 10, paths >= 100, dimension and chart
/// membership of x0 (and y0), and the start points each requested check needs.
std::shared_ptr<const MetricFlow> validate_scenario(const Scenario& s);

struct CheckInfo {
  std::string name;
  std::string summary;    // one line for `list`
  std::string statement;  // inequality or identity checked, for `describe`
  std::vector<std::string> params;
  bool needs_y0 = false;
};

const std::vector<CheckInfo>& check_registry();
const CheckInfo* find_check(const std::string& name);
/// Every key the [params] section may contain.
const std::vector<std::string>& known_params();

/// Built-in scenario configs, in listing order.
struct BuiltinScenario {
  std::string name;
  std::string text;
};
const std::vector<BuiltinScenario>& builtin_scenarios();
/// Throws ConfigError for unknown names.
Scenario builtin_scenario(const std::string& name);

/// Text for `describe`: a check or a built-in scenario. Throws ConfigError if unknown.
std::string describe(const std::string& name);

struct CheckOutcome {
  std::string check;
  bool errored = false;
  std::string error_type;
  std::string error_message;
  std::vector<Verdict> verdicts;
  double seconds = 0.0;

  /// Derived: no error, at least one verdict, every verdict passes.
  bool pass() const;
};

struct ScenarioReport {
  Scenario scenario;
  std::vector<CheckOutcome> checks;  // one per requested check, in request order
  double seconds = 0.0;

  bool pass() const;
  bool errored() const;
};

/// Runs every check in order. Simulation failures are recorded on the check and the
/// remaining checks still run. Checks run sequentially; paths run in parallel per `exec`.
ScenarioReport run_scenario(const Scenario& s, const Execution& exec = {});

/// Deterministic JSON: config echo, RNG provenance and per-check verdicts. No timing.
std::string report_json(const ScenarioReport& r);
/// Wall times, kept apart from the report so reports stay byte-identical.
std::string timing_json(const ScenarioReport& r);
/// CSV with columns scenario, check, s_k, value, se.
void write_trace_csv(std::ostream& out, const ScenarioReport& r);

/// Exit-code contract.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// 3 if any check errored, else 1 if any verdict failed, else 0.
int exit_code(const ScenarioReport& r);

}  // namespace pathflow
