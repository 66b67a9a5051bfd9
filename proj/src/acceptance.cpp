#include "pathflow/acceptance.hpp"

#include "pathflow/cli.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace pathflow {

namespace {

// Pinned tolerances and time limits.
constexpr double kQClosedFormTol = 1e-4;
constexpr double kQClosedFormSeconds = 1.0;
constexpr double kCocycleTol = 1e-8;
constexpr double kCocycleBoundaryPerDt = 5.0;
constexpr double kNormBoundSeconds = 30.0;
constexpr std::size_t kNormBoundPaths = 10000;
constexpr double kPenalizedFraction = 0.95;
constexpr std::size_t kBismutPaths = 100000;
constexpr double kBismutSeconds = 60.0;
constexpr double kGradientRelTol = 0.05;
constexpr double kGradientSeconds = 120.0;
constexpr double kClarkOconeRatio = 0.05;
constexpr std::size_t kClarkOconePaths = 10000;
constexpr double kContractionBias = 1e-3;
constexpr double kSaturationRel = 0.02;
constexpr double kDoublingTol = 1e-6;
constexpr int kSandwichPairs = 100;
constexpr double kSuiteSeconds = 600.0;
constexpr double kSmokeSeconds = 5.0;

const char* const kNames[] = {"q-closed-form", "cocycle", "norm-bound", "penalized-limit",
                              "bismut", "gradient-formula", "integration-by-parts",
                              "clark-ocone", "log-sobolev", "contraction", "talagrand",
                              "marginal-transport", "psi-extension", "nonconvex-extension",
                              "engineering"};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

class Suite {
 public:
  Suite(const Execution& exec, std::ostream* log) : exec_(exec), log_(log) {}

  ScenarioReport run(const std::string& name, std::size_t paths = 0) {
    Scenario s = builtin_scenario(name);
    if (paths > 0) s.n_paths = paths;
    if (log_) *log_ << "  running " << name << " (" << s.n_paths << " paths)\n" << std::flush;
    ScenarioReport r = run_scenario(s, exec_);
    if (log_) *log_ << "    " << (r.pass() ? "pass" : "FAIL") << fmt(" %.2f s\n", r.seconds);
    return r;
  }

 private:
  Execution exec_;
  std::ostream* log_;
};

const Verdict* find(const ScenarioReport& r, const std::string& id) {
  for (const CheckOutcome& c : r.checks)
    for (const Verdict& v : c.verdicts)
      if (v.theorem_id == id) return &v;
  return nullptr;
}

/// Value of a verdict field, or NaN when the verdict is missing (so comparisons fail).
double lhs(const ScenarioReport& r, const std::string& id) {
  const Verdict* v = find(r, id);
  return v ? v->lhs : NAN;
}

std::string failures(const ScenarioReport& r) {
  std::string out;
  for (const CheckOutcome& c : r.checks) {
    if (c.errored) out += " " + c.check + " errored: " + c.error_message + ";";
    for (const Verdict& v : c.verdicts)
      if (!v.pass) out += " " + r.scenario.name + "/" + v.theorem_id + " failed;";
  }
  return out;
}

// ---------------------------------------------------------------------------------------

CriterionResult q_closed_form(Suite& s) {
  const auto r = s.run("ou-q-closed-form");
  const double err = lhs(r, "q-closed-form");
  const bool ok = r.scenario.steps == 10000 && err <= kQClosedFormTol &&
                  r.seconds < kQClosedFormSeconds;
  return {1, "q-closed-form", ok,
          fmt("OU N=1e4: sup|Q - exp(-s)I| = %.2e <= 1e-4; %.2f s < 1 s", err, r.seconds) +
              failures(r)};
}

CriterionResult cocycle(Suite& s) {
  const auto ou = s.run("ou-cocycle", 1000);
  const auto hl = s.run("half-line-cocycle", 1000);
  const double a = lhs(ou, "cocycle"), b = lhs(hl, "cocycle");
  const double dt = hl.scenario.T / static_cast<double>(hl.scenario.steps);
  const bool ok = a <= kCocycleTol && b <= kCocycleBoundaryPerDt * dt;
  return {2, "cocycle", ok,
          fmt("OU max defect %.2e <= 1e-8; half-line %.2e <= 5 dt = %.3g", a, b,
              kCocycleBoundaryPerDt * dt) +
              failures(ou) + failures(hl)};
}

CriterionResult norm_bound(Suite& s) {
  const auto t0 = Clock::now();
  double violations = 0.0;
  std::string fail;
  bool ok = true;
  for (const char* name : {"norm-bound-ou", "norm-bound-disk", "norm-bound-sphere"}) {
    const auto r = s.run(name, kNormBoundPaths);
    const double v = lhs(r, "norm-bound");
    violations += v;
    ok = ok && v == 0.0 && r.pass();
    fail += failures(r);
  }
  const double t = since(t0);
  ok = ok && t < kNormBoundSeconds;
  return {3, "norm-bound", ok,
          fmt("%.0f violations over 3 x 1e4 paths; %.1f s < 30 s", violations, t) + fail};
}

CriterionResult penalized(Suite& s) {
  const auto r = s.run("half-line-penalized");
  const double bad = lhs(r, "penalized-limit");
  const Verdict* v = find(r, "penalized-limit");
  const double hits = v ? v->diagnostic("paths_with_hits") : 0.0;
  const bool ok = 1.0 - bad >= kPenalizedFraction && hits > 0.0;
  return {4, "penalized-limit", ok,
          fmt("strictly decreasing on %.1f%% of %.0f boundary-touching paths (>= 95%%)",
              100.0 * (1.0 - bad), hits) +
              failures(r)};
}

CriterionResult bismut(Suite& s) {
  const auto ou = s.run("ou-bismut", kBismutPaths);
  const auto hl = s.run("half-line-bismut");
  const bool ok = ou.pass() && hl.pass() && find(ou, "bismut-weighted") &&
                  find(ou, "bismut-plain") && find(hl, "bismut-weighted") &&
                  ou.seconds < kBismutSeconds;
  return {5, "bismut", ok,
          fmt("OU 1e5 paths: weighted %.2e, plain %.2e (|err| - 3SE, <= bias); %.1f s < 60 s",
              lhs(ou, "bismut-weighted"), lhs(ou, "bismut-plain"), ou.seconds) +
              fmt("; half-line: weighted %.2e, plain %.2e <= bias",
                  lhs(hl, "bismut-weighted"), lhs(hl, "bismut-plain")) +
              failures(ou) + failures(hl)};
}

CriterionResult gradient(Suite& s) {
  const auto r = s.run("ou-gradient");
  const double rel = lhs(r, "gradient-formula");
  const bool ok = rel <= kGradientRelTol && r.seconds < kGradientSeconds;
  return {6, "gradient-formula", ok,
          fmt("OU product: relative error %.3f <= 0.05; %.1f s < 120 s", rel, r.seconds) +
              failures(r)};
}

CriterionResult ibp(Suite& s) {
  const auto flat = s.run("flat-ibp");
  const auto ou = s.run("ou-ibp");
  const auto hl = s.run("half-line-ibp");
  const bool ok = flat.pass() && ou.pass() && hl.pass() && find(flat, "ibp-flat-target");
  return {7, "integration-by-parts", ok,
          fmt("flat target dev %.2e, OU max gap %.2e, half-line max gap %.2e",
              lhs(flat, "ibp-flat-target"),
              std::max({lhs(ou, "ibp-fd-pairing"), lhs(ou, "ibp-fd-girsanov"),
                        lhs(ou, "ibp-pairing-girsanov")}),
              std::max({lhs(hl, "ibp-fd-pairing"), lhs(hl, "ibp-fd-girsanov"),
                        lhs(hl, "ibp-pairing-girsanov")})) +
              failures(flat) + failures(ou) + failures(hl)};
}

CriterionResult clark_ocone(Suite& s) {
  const auto r = s.run("ou-clark-ocone", kClarkOconePaths);
  const double ratio = lhs(r, "clark-ocone");
  return {8, "clark-ocone", ratio <= kClarkOconeRatio,
          fmt("OU linear: residual / Var F = %.4f <= 0.05", ratio) + failures(r)};
}

CriterionResult lsi(Suite& s) {
  int failed = 0;
  std::string detail, fail;
  for (const char* name : {"lsi-constant", "lsi-exp-linear", "lsi-product", "lsi-half-line",
                           "lsi-sphere", "lsi-free-gaussian"}) {
    const auto r = s.run(name);
    if (!r.pass()) ++failed;
    fail += failures(r);
  }
  detail = fmt("%.0f failures over 5 fixed-start functionals and the free-path run", failed);
  return {9, "log-sobolev", failed == 0, detail + fail};
}

CriterionResult contraction(Suite& s) {
  const auto ou = s.run("ou-contraction");
  const auto ce = s.run("conformal-euclid-contraction");
  const Verdict* oracle = find(ou, "contraction-oracle");
  const double diff = oracle ? std::abs(oracle->diagnostic("estimate") - oracle->diagnostic("oracle"))
                             : NAN;
  const Verdict* c = find(ou, "contraction");
  const bool ok = diff <= kContractionBias && c && c->lhs <= c->rhs && ce.pass();
  return {10, "contraction", ok,
          fmt("OU |estimate - exp(-T) rho_0| = %.2e <= 1e-3, margin %.2e; conformal-euclid "
              "margin %.3g",
              diff, c ? c->margin : NAN, find(ce, "contraction") ? find(ce, "contraction")->margin : NAN) +
              failures(ou) + failures(ce)};
}

CriterionResult talagrand(Suite& s) {
  const auto flat = s.run("flat-talagrand");
  const auto ou = s.run("ou-talagrand");
  const double dev = lhs(flat, "talagrand-saturation");
  const Verdict* path = find(ou, "talagrand-path");
  const bool ok = dev <= kSaturationRel && path && path->margin > 0.0 && ou.pass() && flat.pass();
  return {11, "talagrand", ok,
          fmt("flat: both sides within %.2e of 2|beta|^2 T^2 (<= 2%%); OU margin %.3g > 0; "
              "entropy identity gap %.2e",
              dev, path ? path->margin : NAN, lhs(ou, "entropy-identity")) +
              failures(flat) + failures(ou)};
}

CriterionResult marginal(Suite& s) {
  const auto flat = s.run("flat-marginal");
  const auto ou = s.run("ou-marginal");
  std::string detail;
  double doubling = 0.0;
  for (const auto* r : {&flat, &ou})
    for (const CheckOutcome& c : r->checks)
      for (const Verdict& v : c.verdicts) {
        detail += " " + r->scenario.name + "/" + v.theorem_id + fmt(" margin %.3g;", v.margin);
        for (const auto& [k, x] : v.diagnostics)
          if (k == "doubling_change") doubling = std::max(doubling, x);
      }
  const bool ok = flat.pass() && ou.pass() && doubling < kDoublingTol;
  return {12, "marginal-transport", ok,
          fmt("quantile doubling change %.1e < 1e-6;", doubling) + detail + failures(flat) +
              failures(ou)};
}

CriterionResult psi(Suite& s) {
  const auto c = s.run("psi-constant");
  const auto sine = s.run("psi-sine");
  const bool ok = c.pass() && sine.pass() && find(c, "psi-time-change");
  return {13, "psi-extension", ok,
          fmt("psi = 2 vs time change: |diff| - 3 SE = %.2e; sine margins %.3g, %.3g",
              lhs(c, "psi-time-change"),
              find(sine, "psi-talagrand") ? find(sine, "psi-talagrand")->margin : NAN,
              find(sine, "psi-contraction") ? find(sine, "psi-contraction")->margin : NAN) +
              failures(c) + failures(sine)};
}

CriterionResult nonconvex(Suite& s, double& extra_seconds) {
  const auto r = s.run("disk-exterior-nonconvex");
  extra_seconds = r.seconds;
  const Verdict* sw = find(r, "conformal-sandwich");
  const double pairs = sw ? sw->diagnostic("pairs") : 0.0;
  const bool ok = r.pass() && find(r, "conformal-admissible") && find(r, "conformal-talagrand") &&
                  find(r, "conformal-contraction") && pairs == kSandwichPairs;
  const Verdict* adm = find(r, "conformal-admissible");
  return {14, "nonconvex-extension", ok,
          fmt("admissible (boundary margin %.3g), sandwich on %.0f pairs, max violation %.1e <= 0",
              adm ? adm->diagnostic("boundary_margin") : NAN, pairs, sw ? sw->lhs : NAN) +
              failures(r)};
}

// Engineering: determinism, worker invariance, exit codes, smoke time.
CriterionResult engineering(const Execution& exec, std::ostream* log) {
  std::string detail;
  bool ok = true;
  const auto note = [&](bool cond, const std::string& what) {
    ok = ok && cond;
    detail += (cond ? " ok:" : " FAILED:") + what + ";";
  };

  Scenario smoke = builtin_scenario("smoke");
  const auto t0 = Clock::now();
  const ScenarioReport first = run_scenario(smoke, exec);
  const double smoke_seconds = since(t0);
  note(smoke_seconds < kSmokeSeconds, fmt(" smoke %.2f s < 5 s", smoke_seconds));
  const std::string json = report_json(first);
  note(report_json(run_scenario(smoke, exec)) == json, " identical reports on rerun");
  bool same = true;
  for (int w : {1, 4, 8}) same = same && report_json(run_scenario(smoke, Execution{w, false})) == json;
  same = same && report_json(run_scenario(smoke, Execution{1, true})) == json;
  note(same, " identical reports for workers 1, 4, 8 and serial");

  namespace fs = std::filesystem;
  const fs::path dir = fs::current_path() / "acceptance_tmp";
  fs::create_directories(dir);
  const auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  };
  const std::string bound = write("false_bound.cfg", R"([scenario]
name = false-bound
flow = expression
T = 1
steps = 50
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
  const std::string bad = write("bad_horizon.cfg", R"([scenario]
name = bad-horizon
flow = shrinking-sphere
T = 6
steps = 50
paths = 100
x0 = 0.1 0.1
checks = check_norm_bound

[flow]
r0 = 2
rate = 0.2
)");
  const auto cli = [&](std::vector<std::string> args, std::string* err_text = nullptr) {
    args.insert(args.begin(), "pathflow");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    if (err_text) *err_text = err.str();
    return code;
  };
  const std::string out_file = (dir / "report.json").string();
  std::string err_text;
  const int pass_code = cli({"run", "ou-contraction", "--out", out_file});
  const int fail_code = cli({"run", bound, "--out", out_file});
  const int config_code = cli({"run", bad, "--out", out_file}, &err_text);
  const int io_code = cli({"run", "smoke", "--out", (dir / "missing" / "r.json").string()});
  note(pass_code == 0, fmt(" exit %.0f for a passing run", pass_code));
  note(fail_code == 1, fmt(" exit %.0f for a false curvature bound", fail_code));
  note(config_code == 2 && err_text.find("'T'") != std::string::npos,
       fmt(" exit %.0f for T beyond the horizon, error names 'T'", config_code));
  note(io_code == 3, fmt(" exit %.0f for an unwritable --out", io_code));
  fs::remove_all(dir);
  if (log) *log << "  engineering checks done\n";
  return {15, "engineering", ok, detail.substr(1)};
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const Execution& exec, std::ostream* log) {
  Suite suite(exec, log);
  std::vector<CriterionResult> out;
  const auto t0 = Clock::now();
  const auto timed = [&](std::function<CriterionResult()> f) {
    const auto tc = Clock::now();
    CriterionResult r;
    try {
      r = f();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = since(tc);
    r.id = static_cast<int>(out.size() + 1);
    if (r.name.empty()) r.name = kNames[out.size()];
    out.push_back(r);
    if (log) *log << format_criterion(r) << "\n" << std::flush;
  };
  double unused = 0.0;
  timed([&] { return q_closed_form(suite); });
  timed([&] { return cocycle(suite); });
  timed([&] { return norm_bound(suite); });
  timed([&] { return penalized(suite); });
  timed([&] { return bismut(suite); });
  timed([&] { return gradient(suite); });
  timed([&] { return ibp(suite); });
  timed([&] { return clark_ocone(suite); });
  timed([&] { return lsi(suite); });
  timed([&] { return contraction(suite); });
  timed([&] { return talagrand(suite); });
  timed([&] { return marginal(suite); });
  timed([&] { return psi(suite); });
  timed([&] { return nonconvex(suite, unused); });
  timed([&] { return engineering(exec, log); });
  // Criterion 14 also bounds the whole suite's runtime.
  const double total = since(t0);
  CriterionResult& c14 = out[13];
  c14.pass = c14.pass && total < kSuiteSeconds;
  c14.detail += fmt("; suite %.1f s < 600 s", total);
  return out;
}

std::string format_criterion(const CriterionResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "[%s] %02d %s: ", r.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str());
  return head + r.detail + fmt(" (%.1f s)", r.seconds);
}

}  // namespace pathflow
