#include "pathflow/cli.hpp"

#include "pathflow/acceptance.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/flows.hpp"
#include "pathflow/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace pathflow {

namespace {

struct RunOptions {
  std::string config;
  std::optional<long long> seed, paths, steps;
  std::string out, trace;
  int workers = 0;
  bool serial = false;
};

Scenario resolve(const std::string& what) {
  if (std::filesystem::is_regular_file(what)) return load_scenario_file(what);
  for (const auto& b : builtin_scenarios())
    if (b.name == what) return builtin_scenario(what);
  throw ConfigError("no config file or built-in scenario named '" + what + "'");
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) return false;
  f << text;
  f.close();
  return static_cast<bool>(f);
}

void print_summary(std::ostream& os, const ScenarioReport& r) {
  os << r.scenario.name << ": " << (r.errored() ? "ERROR" : r.pass() ? "PASS" : "FAIL") << "\n";
  for (const CheckOutcome& c : r.checks) {
    if (c.errored) {
      os << "  ERROR " << c.check << " [" << c.error_type << "] " << c.error_message << "\n";
      continue;
    }
    for (const Verdict& v : c.verdicts) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "lhs=%.6g rhs=%.6g margin=%.3g slack=%.3g se=%.3g", v.lhs,
                    v.rhs, v.margin, v.slack, v.se);
      os << "  " << (v.pass ? "pass " : "FAIL ") << c.check << " " << v.theorem_id << " " << buf
         << "\n";
    }
  }
}

int run_command(const RunOptions& o, std::ostream& out, std::ostream& err) {
  Scenario s = resolve(o.config);
  if (o.seed) {
    if (*o.seed < 0) throw ConfigError("--seed must be >= 0");
    s.seed = static_cast<std::uint64_t>(*o.seed);
  }
  if (o.paths) {
    if (*o.paths < 100) throw ConfigError("--paths must be >= 100");
    s.n_paths = static_cast<std::size_t>(*o.paths);
  }
  if (o.steps) {
    if (*o.steps < 10) throw ConfigError("--steps must be >= 10");
    s.steps = static_cast<std::size_t>(*o.steps);
  }
  if (o.workers < 0) throw ConfigError("--workers must be >= 1");
  validate_scenario(s);
  const ScenarioReport r = run_scenario(s, Execution{o.workers, o.serial});
  const std::string json = report_json(r);
  int code = exit_code(r);
  if (o.out.empty()) {
    out << json;
    print_summary(err, r);
  } else {
    print_summary(out, r);
    if (!write_file(o.out, json) || !write_file(o.out + ".timing.json", timing_json(r))) {
      err << "error: cannot write report to '" << o.out << "'\n";
      code = kExitRuntime;
    }
  }
  if (!o.trace.empty()) {
    std::ostringstream csv;
    write_trace_csv(csv, r);
    if (!write_file(o.trace, csv.str())) {
      err << "error: cannot write trace to '" << o.trace << "'\n";
      code = kExitRuntime;
    }
  }
  return code;
}

void list_command(std::ostream& out) {
  out << "built-in scenarios:\n";
  for (const auto& b : builtin_scenarios()) {
    const Scenario s = builtin_scenario(b.name);
    out << "  " << std::left << std::setw(30) << b.name << s.description << "\n";
  }
  out << "checks:\n";
  for (const CheckInfo& c : check_registry())
    out << "  " << std::left << std::setw(30) << c.name << c.summary << "\n";
  out << "flows:\n ";
  for (const auto& f : builtin_flow_names()) out << " " << f;
  out << " expression\n";
}

int acceptance_command(int workers, std::ostream& out, std::ostream& err) {
  const auto results = run_acceptance(Execution{workers, false}, &err);
  bool all = true;
  for (const auto& r : results) {
    out << format_criterion(r) << "\n";
    all = all && r.pass;
  }
  out << (all ? "acceptance: all criteria pass\n" : "acceptance: some criteria fail\n");
  return all ? kExitPass : kExitFail;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monte Carlo checks for diffusions under evolving metrics", "pathflow"};
  app.require_subcommand(1);
  RunOptions o;
  auto* run = app.add_subcommand("run", "run a scenario file or built-in scenario");
  run->add_option("config", o.config, "config file or built-in scenario name")->required();
  run->add_option("--seed", o.seed, "override the seed");
  run->add_option("--paths", o.paths, "override the number of paths");
  run->add_option("--steps", o.steps, "override the number of steps");
  run->add_option("--out", o.out, "write the JSON report here (timing to FILE.timing.json)");
  run->add_option("--trace", o.trace, "write per-time-point estimator traces as CSV");
  run->add_option("--workers", o.workers, "worker threads (0: OpenMP default)");
  run->add_flag("--serial", o.serial, "use the serial reference loop");
  app.add_subcommand("list", "list built-in scenarios, checks and flows");
  std::string name;
  auto* desc = app.add_subcommand("describe", "explain a check or show a built-in scenario");
  desc->add_option("name", name, "check or scenario name")->required();
  int acc_workers = 0;
  auto* acc = app.add_subcommand("acceptance", "run the acceptance suite");
  acc->add_option("--workers", acc_workers, "worker threads (0: OpenMP default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*run) return run_command(o, out, err);
    if (app.got_subcommand("list")) {
      list_command(out);
      return kExitPass;
    }
    if (*desc) {
      out << describe(name);
      return kExitPass;
    }
    if (*acc) return acceptance_command(acc_workers, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace pathflow
