#include "pathflow/harness.hpp"

#include "checks.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/flows.hpp"
#include "pathflow/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <sstream>

namespace pathflow {

namespace {

using Json = nlohmann::ordered_json;

const std::vector<std::string> kScenarioKeys{"name", "description", "flow", "T", "steps",
                                             "paths", "seed", "x0", "y0", "checks"};

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<int>(i)) = v[i];
  return out;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text + ",") {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EnsembleSpec ensemble_of(const Scenario& s, const Execution& exec) {
  EnsembleSpec spec;
  spec.T = s.T;
  spec.steps = s.steps;
  spec.n_paths = s.n_paths;
  spec.seed = s.seed;
  spec.exec = exec;
  return spec;
}

std::shared_ptr<const MetricFlow> build_flow(const Scenario& s) {
  const int flow_line = s.line_of("flow");
  if (s.flow == "expression") return ExpressionFlow::from_section(s.flow_section);
  FlowParams params;
  for (const ConfigEntry& e : s.flow_section.entries)
    params[e.key] = s.flow_section.get_double(e.key, 0.0);
  try {
    return make_flow(s.flow, params);
  } catch (const ConfigError& e) {
    if (e.line() > 0) throw;
    // Point at the [flow] key the message names, else at 'flow ='.
    const std::string msg = e.what();
    for (const ConfigEntry& k : s.flow_section.entries)
      if (msg.find("'" + k.key + "'") != std::string::npos) throw ConfigError(msg, k.line);
    throw ConfigError(msg, flow_line);
  }
}

/// Number when the text is one, else the text.
Json echo_value(const std::string& text) {
  std::istringstream in(text);
  double v = 0.0;
  if (in >> v && (in >> std::ws).eof()) return v;
  return text;
}

Json echo_section(const ConfigSection& s) {
  Json out = Json::object();
  for (const ConfigEntry& e : s.entries) out[e.key] = echo_value(e.value);
  return out;
}

Json vec_json(const Vec& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

/// Non-finite numbers become strings so the report stays valid JSON.
Json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Json verdict_json(const Verdict& v) {
  Json out;
  out["theorem_id"] = v.theorem_id;
  out["pass"] = v.pass;
  out["lhs"] = number(v.lhs);
  out["rhs"] = number(v.rhs);
  out["margin"] = number(v.margin);
  out["slack"] = number(v.slack);
  out["se"] = number(v.se);
  out["n_paths"] = v.n_paths;
  out["note"] = v.note;
  Json diag = Json::object();
  for (const auto& [k, x] : v.diagnostics) diag[k] = number(x);
  out["diagnostics"] = diag;
  return out;
}

}  // namespace

int Scenario::line_of(const std::string& key) const {
  const auto it = lines.find(key);
  return it == lines.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------------------
// Registry

const std::vector<CheckInfo>& check_registry() {
  static const std::vector<CheckInfo> all{
      {"check_q_closed_form", "Q_{0,k} against exp(-int_0^s K) I when R^Z = K(t) g",
       "For R^Z = K(t) g along the path the multiplicative functional is scalar: "
       "Q_{0,s} = exp(-int_0^s K) I. Verdict: sup_k |Q_{0,k} - exp(-int K) I| <= q_tol "
       "(default 1e-4) over q_paths paths (default 4).",
       {"q_tol", "q_paths"}},
      {"check_cocycle", "Q_{r,t} = Q_{r,s} Q_{s,t} path by path",
       "Cocycle identity of the multiplicative functional, each factor evolved from its own "
       "base. Triples (0, N/4, N), (N/4, N/2, 3N/4), (0, N/2, N), (N/3, 2N/3, N). Max defect "
       "<= 1e-8 without boundary, <= 5 dt with boundary.",
       {}},
      {"check_norm_bound", "|Q_{0,t}| <= exp(-int K - int sigma dl)",
       "Norm bound of the multiplicative functional under R^Z >= K and II >= sigma. Verdict: "
       "zero grid indices with |Q| > bound (1 + 10 dt), over all paths.",
       {}},
      {"check_penalized_limit", "penalized Q converges to the projected Q as eps -> 0",
       "Replacing the projection at boundary hits by exp(-P dl / eps) gives a penalized "
       "functional converging to the projected one. Verdict: sup_k |Q_eps - Q| decreases "
       "strictly along eps_list on at least 95% of the paths that touch the boundary.",
       {"eps_list"}},
      {"check_bismut", "Bismut derivative formula for grad P_T f",
       "Derivative formula d_{x0} E f(X_T) = E[Q_{0,T} u_T^{-1} grad f(X_T)] = "
       "(1/sqrt 2) E[f(X_T) int xi' Q_{0,s} dB_s], xi(s) = s/T. Oracles: exp(-lambda T) v for "
       "f = <v, x> on euclid and ou; reflection principle on half-line. Verdict per form: "
       "max_j |estimate - target| - 3 SE <= bias (default dt max(1, |target|), plus "
       "0.3 sqrt(dt) with a boundary). Weighted and plain forms must also agree.",
       {"f", "v", "bias"}},
      {"check_gradient_formula", "x0-gradient of E F by the Q-gradient formula",
       "grad_{x0} E F = sum_i E[Q_{0,t_i} u_{t_i}^{-1} grad_i f] for a cylindrical F, against "
       "central finite differences in x0 with common noise. Verdict: relative error <= rel_tol "
       "(default 0.05).",
       {"functional", "v", "w", "s", "f", "delta", "rel_tol", "c", "scale"}},
      {"check_ibp", "integration by parts E D_h F = E[F int <h', dB>]",
       "Three estimates of the derivative of E F along h(t) = t w: flow finite differences, "
       "sqrt(2) E D0_h F, and E[F int <h', dB>]. Verdict: pairwise |gap| <= 3 SE + c_delta, "
       "c_delta = (dt + eps_min) max(1, |pairing|). On euclid with F = <v, X_T> all three "
       "also hit sqrt(2) T <v, w>.",
       {"functional", "v", "w", "s", "f", "eps_list", "c", "scale"}},
      {"check_clark_ocone", "martingale representation with the damped gradient",
       "F = E F + sum <phi_k, dB_k> with phi = sqrt(2) E[D'_k F | F_{s_k}] by polynomial "
       "regression of the given degree. Verdict: residual variance / Var F <= ratio_tol "
       "(default 0.05).",
       {"functional", "v", "w", "s", "f", "degree", "ratio_tol", "c", "scale"}},
      {"check_lsi", "log-Sobolev inequality on path space",
       "Ent(F^2) <= 2 E|D0 F|^2_H from a point mass. With sd > 0 the path starts from "
       "N(x0, sd^2 I) and the constant is 2 v 2 sd^2 with the initial gradient included. "
       "Verdict: entropy <= constant form + 3 SE + 2 dt |rhs|.",
       {"functional", "v", "w", "s", "f", "sd", "c", "scale"}},
      {"check_martingale", "E Q_{0,s} u_s^{-1} grad P_{s,T} f (X_s) is constant in s",
       "For f = <v, x> on euclid and ou, grad P_{s,T} f = exp(-lambda (T - s)) v. Compared at "
       "s = 0, T/2, T. Verdict: worst |difference| / (3 SE + dt scale) <= 1.",
       {"v"}},
      {"check_contraction", "coupling contraction (E rho_T^p)^{1/p} <= exp(-int K) rho_0",
       "Parallel displacement coupling from point masses x0, y0 bounds the Wasserstein "
       "distance: W_p(delta_x0 P_T, delta_y0 P_T) <= (E rho_T^p)^{1/p} <= exp(-int_0^T K) "
       "rho_0(x0, y0). Verdict slack 10 dt rhs + 3 SE. On euclid and ou the estimate must "
       "also lie within bias (default max(1e-3, lambda^2 T dt rho_0)) + 3 SE of exp(-lambda T) rho_0.",
       {"p", "bias", "tol_z", "tol_rel"}, true},
      {"check_talagrand", "Talagrand inequality on path space under the uniform distance",
       "Transportation-cost inequality W_2(F P, P)^2 <= 4 C(0, T, K) Ent(F) for the uniform "
       "path distance, with F the constant-beta Girsanov tilt and C(0, T, K) = "
       "sup_t int_0^t exp(-2 int_s^t K) ds. The coupling gives E max rho^2 as the left side. "
       "Also checks E log F = |beta|^2 T / 2 within 3 SE and zero path-wise violations of "
       "the synchronous distance bound. On euclid both sides equal 2 |beta|^2 T^2 within 2%.",
       {"beta", "tol_z", "tol_rel"}},
      {"check_talagrand_initial", "Talagrand inequality with a Gaussian initial law",
       "mu = N(x0, sd^2 I), F = G(X_0) R_beta. W_2 <= 2 sqrt(C Ent) + exp(-int K) "
       "W_{2,0}(mu_F, mu) and the squared form with the Gaussian constant 2 sd^2.",
       {"sd", "a", "beta", "tol_z", "tol_rel"}},
      {"check_marginal_transport", "marginal entropy and Fisher forms by exact quantile W2",
       "For the law at T from x at time S on the line and f = exp(a y - b y^2 / 2): "
       "W_2^2 <= 4 c Ent and W_2^2 <= 4 c^2 Fisher with c = int_S^T exp(-2 int_u^T K) du, "
       "plus the lemma mu(h^2) <= sqrt(mu(h'^2)) W / eps + |h''| W^2 / (2 eps) at eps.",
       {"S", "tilt_a", "tilt_b", "eps"}},
      {"check_psi_transport", "Talagrand and contraction for L = psi^2 (Delta + Z)",
       "E max rho^2 <= C(T, psi) Ent and sqrt(E max rho^2) <= 2 exp(int (K_psi + |grad psi|)) "
       "rho_0, sup-norms scanned on `region`. For constant psi = c the run must match the "
       "unit diffusion at time c^2 T with tilt beta / c within 3 SE.",
       {"psi", "region", "beta", "tol_z", "tol_rel"}, true},
      {"check_nonconvex_transport", "non-convex boundary made convex by g~ = phi^{-2} g",
       "Admissibility of phi (phi >= 1 and II + N log phi >= 0 on the boundary), the metric "
       "sandwich rho~ <= rho <= sup phi rho~ on sampled pairs, E max rho^2 <= sup phi^2 "
       "C(T, phi) Ent and sqrt(E max rho^2) <= 2 sup phi exp(int (K_phi + |grad phi|)) rho_0.",
       {"phi", "phi_top", "phi_k", "region", "pairs", "beta", "tol_z", "tol_rel"}, true},
  };
  return all;
}

const CheckInfo* find_check(const std::string& name) {
  for (const CheckInfo& c : check_registry())
    if (c.name == name) return &c;
  return nullptr;
}

const std::vector<std::string>& known_params() {
  static const std::vector<std::string> all = [] {
    std::set<std::string> keys;
    for (const CheckInfo& c : check_registry()) keys.insert(c.params.begin(), c.params.end());
    return std::vector<std::string>(keys.begin(), keys.end());
  }();
  return all;
}

Scenario builtin_scenario(const std::string& name) {
  for (const BuiltinScenario& b : builtin_scenarios())
    if (b.name == name) return scenario_from_config(ConfigDocument::parse(b.text), "builtin");
  throw ConfigError("unknown scenario '" + name + "'");
}

std::string describe(const std::string& name) {
  std::ostringstream out;
  if (const CheckInfo* c = find_check(name)) {
    out << c->name << ": " << c->summary << "\n\n" << c->statement << "\n\nparams:";
    if (c->params.empty()) out << " none";
    for (const auto& p : c->params) out << " " << p;
    out << "\n" << (c->needs_y0 ? "needs y0\n" : "");
    return out.str();
  }
  for (const BuiltinScenario& b : builtin_scenarios())
    if (b.name == name) return b.text;
  throw ConfigError("unknown check or scenario '" + name + "'");
}

// ---------------------------------------------------------------------------------------
// Config

Scenario scenario_from_config(const ConfigDocument& doc, const std::string& source) {
  for (const ConfigSection& s : doc.sections) {
    if (s.name.empty()) {
      if (!s.entries.empty())
        throw ConfigError("key '" + s.entries[0].key + "' appears before any section",
                          s.entries[0].line);
      continue;
    }
    if (s.name != "scenario" && s.name != "flow" && s.name != "params")
      throw ConfigError("unknown section [" + s.name + "] (scenario, flow, params)", s.line);
  }
  const ConfigSection* sec = doc.find("scenario");
  if (!sec) throw ConfigError("missing [scenario] section");
  sec->reject_unknown(kScenarioKeys);

  Scenario s;
  s.source = source;
  for (const ConfigEntry& e : sec->entries) s.lines[e.key] = e.line;
  s.name = sec->require_string("name");
  s.description = sec->get_string("description", "");
  s.flow = sec->require_string("flow");
  s.T = sec->require_double("T");
  const long long steps = sec->get_int("steps", 100);
  const long long paths = sec->get_int("paths", 1000);
  const long long seed = sec->get_int("seed", 1);
  if (steps < 10) throw ConfigError("'steps' must be >= 10", s.line_of("steps"));
  if (paths < 100) throw ConfigError("'paths' must be >= 100", s.line_of("paths"));
  if (seed < 0) throw ConfigError("'seed' must be >= 0", s.line_of("seed"));
  s.steps = static_cast<std::size_t>(steps);
  s.n_paths = static_cast<std::size_t>(paths);
  s.seed = static_cast<std::uint64_t>(seed);
  const auto x0 = sec->get_doubles("x0", {});
  if (x0.empty()) throw ConfigError("section [scenario] is missing 'x0'", sec->line);
  s.x0 = to_vec(x0);
  if (sec->has("y0")) s.y0 = to_vec(sec->get_doubles("y0", {}));
  s.checks = split_names(sec->require_string("checks"));

  if (const ConfigSection* f = doc.find("flow")) s.flow_section = *f;
  s.flow_section.name = "flow";
  if (const ConfigSection* p = doc.find("params")) {
    p->reject_unknown(known_params());
    s.params = *p;
  }
  s.params.name = "params";
  validate_scenario(s);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  return scenario_from_config(ConfigDocument::load(path), path);
}

std::shared_ptr<const MetricFlow> validate_scenario(const Scenario& s) {
  if (s.name.empty()) throw ConfigError("'name' must not be empty", s.line_of("name"));
  if (!(std::isfinite(s.T) && s.T > 0.0))
    throw ConfigError("'T' must be positive and finite", s.line_of("T"));
  if (s.steps < 10) throw ConfigError("'steps' must be >= 10", s.line_of("steps"));
  if (s.n_paths < 100) throw ConfigError("'paths' must be >= 100", s.line_of("paths"));
  if (s.checks.empty()) throw ConfigError("'checks' must name at least one check", s.line_of("checks"));
  std::set<std::string> seen;
  for (const auto& c : s.checks) {
    if (!find_check(c)) throw ConfigError("unknown check '" + c + "'", s.line_of("checks"));
    if (!seen.insert(c).second)
      throw ConfigError("check '" + c + "' is listed twice", s.line_of("checks"));
  }

  const auto flow = build_flow(s);
  if (!(s.T < flow->horizon())) {
    std::ostringstream os;
    os << "'T' = " << s.T << " must be below the horizon " << flow->horizon() << " of flow '"
       << flow->name() << "'";
    throw ConfigError(os.str(), s.line_of("T"));
  }
  const auto check_point = [&](const Vec& x, const std::string& key) {
    if (x.size() != flow->dim())
      throw ConfigError("'" + key + "' has " + std::to_string(x.size()) +
                            " components but the flow has dimension " +
                            std::to_string(flow->dim()),
                        s.line_of(key));
    if (!flow->in_chart(0.0, x))
      throw ConfigError("'" + key + "' lies outside the chart of flow '" + flow->name() + "'",
                        s.line_of(key));
    if (flow->has_boundary() && flow->boundary()->value(x) < 0.0)
      throw ConfigError("'" + key + "' lies outside the manifold (b < 0)", s.line_of(key));
  };
  check_point(s.x0, "x0");
  if (s.y0.size() > 0) check_point(s.y0, "y0");
  for (const auto& c : s.checks)
    if (find_check(c)->needs_y0 && s.y0.size() == 0)
      throw ConfigError(c + " needs 'y0'", s.line_of("checks"));

  // Parse every check's parameters now so bad values fail before any simulation.
  const detail::CheckContext ctx{s, flow, ensemble_of(s, {})};
  for (const auto& c : s.checks) detail::plan_check(c, ctx);
  return flow;
}

// ---------------------------------------------------------------------------------------
// Running

bool CheckOutcome::pass() const {
  return !errored && !verdicts.empty() &&
         std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

bool ScenarioReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.pass(); });
}

bool ScenarioReport::errored() const {
  return std::any_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.errored; });
}

int exit_code(const ScenarioReport& r) {
  if (r.errored()) return kExitRuntime;
  return r.pass() ? kExitPass : kExitFail;
}

ScenarioReport run_scenario(const Scenario& s, const Execution& exec) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto flow = validate_scenario(s);
  ScenarioReport report;
  report.scenario = s;
  const detail::CheckContext ctx{report.scenario, flow, ensemble_of(s, exec)};
  for (const auto& name : s.checks) {
    CheckOutcome out;
    out.check = name;
    const auto tc = std::chrono::steady_clock::now();
    const auto fail = [&](const char* type, const std::exception& e) {
      out.errored = true;
      out.error_type = type;
      out.error_message = e.what();
      out.verdicts.clear();
    };
    try {
      out.verdicts = detail::plan_check(name, ctx)();
      for (Verdict& v : out.verdicts) v.scenario = s.name;
    } catch (const TruncationError& e) {
      fail("truncation", e);
    } catch (const CouplingError& e) {
      fail("coupling", e);
    } catch (const NumericError& e) {
      fail("numeric", e);
    } catch (const DomainError& e) {
      fail("domain", e);
    } catch (const ArgumentError& e) {
      fail("argument", e);
    } catch (const ConfigError& e) {
      fail("config", e);
    } catch (const std::exception& e) {
      fail("runtime", e);
    }
    out.seconds = seconds_since(tc);
    report.checks.push_back(std::move(out));
  }
  report.seconds = seconds_since(t0);
  return report;
}

// ---------------------------------------------------------------------------------------
// Output

std::string report_json(const ScenarioReport& r) {
  const Scenario& s = r.scenario;
  Json j;
  j["scenario"] = s.name;
  j["description"] = s.description;
  j["pass"] = r.pass();
  j["exit_code"] = exit_code(r);
  Json cfg;
  cfg["flow"] = s.flow;
  cfg["flow_params"] = echo_section(s.flow_section);
  cfg["T"] = s.T;
  cfg["steps"] = s.steps;
  cfg["paths"] = s.n_paths;
  cfg["seed"] = s.seed;
  cfg["x0"] = vec_json(s.x0);
  if (s.y0.size() > 0) cfg["y0"] = vec_json(s.y0);
  cfg["checks"] = s.checks;
  cfg["params"] = echo_section(s.params);
  j["config"] = cfg;
  Json rng;
  rng["generator"] = "Philox4x32-10";
  rng["seed"] = s.seed;
  rng["key"] = "path index";
  rng["counter"] = "(step, stream, seed_lo, seed_hi)";
  rng["streams"] = {{"brownian", stream::kBrownian},
                    {"boundary", stream::kBoundary},
                    {"initial", stream::kInitial},
                    {"aux", stream::kAux}};
  rng["reduction"] = "pairwise tree in path-index order";
  j["rng"] = rng;
  Json checks = Json::array();
  for (const CheckOutcome& c : r.checks) {
    Json cj;
    cj["check"] = c.check;
    cj["status"] = c.errored ? "error" : (c.pass() ? "pass" : "fail");
    if (c.errored) cj["error"] = {{"type", c.error_type}, {"message", c.error_message}};
    Json vs = Json::array();
    for (const Verdict& v : c.verdicts) vs.push_back(verdict_json(v));
    cj["verdicts"] = vs;
    checks.push_back(cj);
  }
  j["checks"] = checks;
  return j.dump(2) + "\n";
}

std::string timing_json(const ScenarioReport& r) {
  Json j;
  j["scenario"] = r.scenario.name;
  j["wall_seconds"] = r.seconds;
  Json checks = Json::object();
  for (const CheckOutcome& c : r.checks) checks[c.check] = c.seconds;
  j["checks"] = checks;
  return j.dump(2) + "\n";
}

void write_trace_csv(std::ostream& out, const ScenarioReport& r) {
  out << "scenario,check,s_k,value,se\n";
  char buf[96];
  for (const CheckOutcome& c : r.checks)
    for (const Verdict& v : c.verdicts)
      for (const TracePoint& p : v.trace) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", p.s, p.value, p.se);
        out << r.scenario.name << "," << c.check << "/" << v.theorem_id << "," << buf << "\n";
      }
}

}  // namespace pathflow
