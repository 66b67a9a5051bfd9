#include "checks.hpp"

#include "pathflow/errors.hpp"
#include "pathflow/expr.hpp"
#include "pathflow/flows.hpp"
#include "pathflow/malliavin.hpp"
#include "pathflow/multfunc.hpp"
#include "pathflow/quadrature.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>

namespace pathflow::detail {

namespace {

// ---------------------------------------------------------------------------------------
// Parameter access. Every failure is a ConfigError carrying the line of the key.

int line_of(const ConfigSection& p, const std::string& key) {
  const ConfigEntry* e = p.find(key);
  return e ? e->line : p.line;
}

Vec take(const std::vector<double>& pattern, int d) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = pattern[static_cast<std::size_t>(i)];
  return v;
}

Vec vec_param(const ConfigSection& p, const std::string& key, int d,
              const std::vector<double>& fallback) {
  if (!p.has(key)) return take(fallback, d);
  const auto v = p.get_doubles(key, {});
  if (static_cast<int>(v.size()) != d)
    throw ConfigError("'" + key + "' needs " + std::to_string(d) + " components, got " +
                          std::to_string(v.size()),
                      line_of(p, key));
  return take(v, d);
}

double positive(const ConfigSection& p, const std::string& key, double fallback) {
  const double v = p.get_double(key, fallback);
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError("'" + key + "' must be positive", line_of(p, key));
  return v;
}

std::optional<double> as_number(const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\t')) ++end;
  if (end == begin || *end != '\0' || errno == ERANGE) return std::nullopt;
  return v;
}

ScalarField field_param(const ConfigSection& p, const std::string& key, int d) {
  try {
    return ScalarField::from_expression(
        d, Expression::parse(p.require_string(key), flow_variables(d)));
  } catch (const ConfigError& e) {
    if (e.line() > 0) throw;
    throw ConfigError("'" + key + "': " + e.what(), line_of(p, key));
  }
}

const std::vector<double> kV{1.0, 0.5, 0.25, 0.125};
const std::vector<double> kW{0.3, -0.2, 0.1, 0.05};
const std::vector<double> kBeta{0.3, 0.2, 0.1, 0.1};
const std::vector<double> kA{0.5, -0.3, 0.2, 0.1};

Tolerance tolerance(const ConfigSection& p) {
  Tolerance t;
  t.z = positive(p, "tol_z", t.z);
  t.rel_per_dt = p.get_double("tol_rel", t.rel_per_dt);
  return t;
}

/// Curvature bounds the flow declares in closed form.
CurvatureBounds declared_bounds(const CheckContext& c, const std::string& check) {
  const auto b = c.flow->analytic_bounds();
  if (!b)
    throw ConfigError(check + " needs curvature bounds; flow '" + c.flow->name() +
                          "' declares none (set K in [flow])",
                      c.scenario.line_of("checks"));
  return *b;
}

/// Rate λ of the linear drift -λx for the built-in euclid and ou flows.
std::optional<double> linear_rate(const CheckContext& c) {
  if (c.scenario.flow == "euclid") return 0.0;
  if (c.scenario.flow == "ou") return c.scenario.flow_section.get_double("lambda", 1.0);
  return std::nullopt;
}

ConfigError needs(const CheckContext& c, const std::string& what) {
  return ConfigError(what, c.scenario.line_of("checks"));
}

std::size_t grid_index(const CheckContext& c, const std::string& key, double s) {
  const double k = s / c.spec.dt();
  if (!(s >= 0.0) || !(s < c.spec.T) || std::abs(k - std::round(k)) > 1e-9)
    throw ConfigError("'" + key + "' must be a grid time in [0, T)", line_of(c.scenario.params, key));
  return static_cast<std::size_t>(std::llround(k));
}

/// Terminal function x ↦ f(x) with its differential: the `f` expression evaluated at
/// t = T, or <v, x>.
struct Terminal {
  std::function<double(const Vec&)> f;
  std::function<Vec(const Vec&)> df;
  bool linear = false;
  Vec v;
};

Terminal terminal_param(const CheckContext& c) {
  const ConfigSection& p = c.scenario.params;
  const int d = c.flow->dim();
  const double T = c.spec.T;
  Terminal out;
  if (p.has("f")) {
    const ScalarField f = field_param(p, "f", d);
    out.f = [f, T](const Vec& x) { return f.value(T, x); };
    out.df = [f, T](const Vec& x) { return f.grad(T, x); };
    return out;
  }
  const Vec v = vec_param(p, "v", d, kV);
  out.f = [v](const Vec& x) { return v.dot(x); };
  out.df = [v](const Vec&) { return v; };
  out.linear = true;
  out.v = v;
  return out;
}

struct Functional {
  CylFunc f;
  std::string kind;
  Vec v;
};

Functional functional_param(const CheckContext& c, const std::string& fallback) {
  const ConfigSection& p = c.scenario.params;
  const int d = c.flow->dim();
  const double T = c.spec.T;
  const std::string kind = p.get_string("functional", p.has("f") ? "terminal" : fallback);
  const Vec v = vec_param(p, "v", d, kV);
  const Vec w = vec_param(p, "w", d, kW);
  const double s = p.get_double("s", 0.5 * T);
  if (kind == "constant") return {CylFunc::constant(p.get_double("c", 2.0), T), kind, v};
  if (kind == "linear") return {CylFunc::linear(v, T), kind, v};
  if (kind == "exp_linear")
    return {CylFunc::exp_linear(v, p.get_double("scale", 0.5), T), kind, v};
  if (kind == "product" || kind == "bounded_product") {
    grid_index(c, "s", s);
    if (kind == "product") return {CylFunc::product(v, s, w, T), kind, v};
    // (1.5 + sin <v, X_s>)(2 + cos <w, X_T>): bounded away from 0.
    CylFunc f(
        {s, T},
        [v, w](std::span<const Vec> q) {
          return (1.5 + std::sin(v.dot(q[0]))) * (2.0 + std::cos(w.dot(q[1])));
        },
        [v, w](std::span<const Vec> q, std::span<Vec> out) {
          const double a = v.dot(q[0]), b = w.dot(q[1]);
          out[0] = std::cos(a) * (2.0 + std::cos(b)) * v;
          out[1] = -(1.5 + std::sin(a)) * std::sin(b) * w;
        });
    return {f, kind, v};
  }
  if (kind == "terminal") {
    const Terminal t = terminal_param(c);
    return {CylFunc::terminal(t.f, t.df, T), kind, v};
  }
  throw ConfigError("unknown functional '" + kind +
                        "' (constant, linear, exp_linear, product, bounded_product, terminal)",
                    line_of(p, "functional"));
}

std::vector<double> eps_list_param(const ConfigSection& p, std::vector<double> fallback) {
  const auto eps = p.get_doubles("eps_list", std::move(fallback));
  for (std::size_t i = 0; i < eps.size(); ++i)
    if (!(eps[i] > 0.0) || (i > 0 && !(eps[i] < eps[i - 1])))
      throw ConfigError("'eps_list' must be positive and strictly decreasing",
                        line_of(p, "eps_list"));
  return eps;
}

ScanRegion box_region(int d, double a, double b, int n) {
  ScanRegion r;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Vec x(d);
    for (int j = 0; j < d; ++j) x(j) = a + (b - a) * idx[static_cast<std::size_t>(j)] / (n - 1);
    r.points.push_back(x);
    int j = 0;
    while (j < d && ++idx[static_cast<std::size_t>(j)] == n) idx[static_cast<std::size_t>(j++)] = 0;
    if (j == d) break;
  }
  std::ostringstream os;
  os << "[" << a << ", " << b << "]^" << d << ", " << n << " points per axis";
  r.description = os.str();
  return r;
}

/// `interval a b n`, `annulus r0 r1 nr ntheta` or `box a b n`.
ScanRegion region_param(const ConfigSection& p, int d) {
  const std::string fallback = d == 1 ? "interval -3.14159265358979 3.14159265358979 201"
                                      : "box -2 2 21";
  std::istringstream in(p.get_string("region", fallback));
  const int line = line_of(p, "region");
  std::string kind;
  in >> kind;
  std::vector<double> a;
  for (double x; in >> x;) a.push_back(x);
  if (!in.eof()) throw ConfigError("'region' has a non-numeric bound", line);
  try {
    if (kind == "interval" && a.size() == 3 && d == 1)
      return ScanRegion::interval(a[0], a[1], static_cast<int>(a[2]));
    if (kind == "annulus" && a.size() == 4 && d == 2)
      return ScanRegion::annulus(a[0], a[1], static_cast<int>(a[2]), static_cast<int>(a[3]));
    if (kind == "box" && a.size() == 3 && a[2] >= 2 && a[1] > a[0] &&
        std::pow(a[2], d) <= 1e6)
      return box_region(d, a[0], a[1], static_cast<int>(a[2]));
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("'region': ") + e.what(), line);
  }
  throw ConfigError("'region' must be 'interval a b n' (d = 1), 'annulus r0 r1 nr ntheta' "
                    "(d = 2) or 'box a b n'",
                    line);
}

Verdict make(const std::string& id, const CheckContext& c, double lhs, double rhs,
             double slack, double se, std::size_t n, std::string note = "") {
  Verdict v;
  v.theorem_id = id;
  v.scenario = c.scenario.name;
  v.lhs = lhs;
  v.rhs = rhs;
  v.slack = slack;
  v.se = se;
  v.n_paths = n;
  v.note = std::move(note);
  v.decide();
  return v;
}

std::vector<std::size_t> trace_steps(std::size_t steps) {
  const std::size_t stride = std::max<std::size_t>(1, steps / 100);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < steps; k += stride) out.push_back(k);
  out.push_back(steps);
  return out;
}

FramedPath path_of(const CheckContext& c, std::size_t i) {
  const Vec& x0 = c.scenario.x0;
  return simulate_path(*c.flow, x0, initial_frame(*c.flow, x0), c.spec.T, c.spec.steps,
                       c.spec.key(i), c.spec.sim);
}

// ---------------------------------------------------------------------------------------
// Multiplicative functional

CheckPlan q_closed_form(const CheckContext& c) {
  const CurvatureBounds bounds = declared_bounds(c, "check_q_closed_form");
  if (c.flow->has_boundary()) throw needs(c, "check_q_closed_form needs a flow without boundary");
  const ConfigSection& p = c.scenario.params;
  const double tol = positive(p, "q_tol", 1e-4);
  const std::size_t m = std::min<std::size_t>(c.spec.n_paths,
                                              static_cast<std::size_t>(positive(p, "q_paths", 4)));
  return [c, bounds, tol, m] {
    const std::size_t N = c.spec.steps;
    const double dt = c.spec.dt();
    const int d = c.flow->dim();
    const auto idx = trace_steps(N);
    struct Row {
      double err = 0.0, iso = 0.0;
      std::vector<double> sampled;
    };
    const auto rows = map_paths<Row>(m, c.spec.exec, [&](std::size_t i) {
      const FramedPath path = path_of(c, i);
      const LiftedForms forms = lift_forms(*c.flow, path);
      const QFunctional q = evolve_q(step_factors(forms, QScheme::Projected), 0);
      Row r;
      std::vector<double> err(N + 1, 0.0);
      double integral = 0.0;
      for (std::size_t k = 0; k <= N; ++k) {
        err[k] = op_norm(q.at(k) - std::exp(-integral) * identity(d));
        r.err = std::max(r.err, err[k]);
        if (k == N) break;
        const double s = path.times[k];
        const double K = bounds.K(s);
        r.iso = std::max(r.iso, op_norm(forms.r_u[k] - K * identity(d)) / (1.0 + std::abs(K)));
        integral += dt / 6.0 * (K + 4.0 * bounds.K(s + 0.5 * dt) + bounds.K(s + dt));
      }
      for (std::size_t k : idx) r.sampled.push_back(err[k]);
      return r;
    });
    double err = 0.0, iso = 0.0;
    for (const Row& r : rows) {
      err = std::max(err, r.err);
      iso = std::max(iso, r.iso);
    }
    if (iso > 1e-8)
      throw ArgumentError("R^Z is not K(t) g along the path, so Q has no closed form");
    Verdict v = make("q-closed-form", c, err, tol, 0.0, 0.0, m,
                     "sup_k |Q_{0,k} - exp(-int_0^{s_k} K) I|");
    v.diagnostics = {{"isotropy_defect", iso}, {"steps", static_cast<double>(N)}};
    for (std::size_t j = 0; j < idx.size(); ++j)
      v.trace.push_back({static_cast<double>(idx[j]) * dt, rows[0].sampled[j], 0.0});
    return std::vector<Verdict>{v};
  };
}

CheckPlan cocycle(const CheckContext& c) {
  return [c] {
    const std::size_t N = c.spec.steps;
    const double fr[4][3] = {{0, 0.25, 1}, {0.25, 0.5, 0.75}, {0, 0.5, 1}, {1.0 / 3, 2.0 / 3, 1}};
    struct Row {
      double defect = 0.0;
      bool hit = false;
    };
    const auto rows = map_paths<Row>(c.spec.n_paths, c.spec.exec, [&](std::size_t i) {
      const FramedPath path = path_of(c, i);
      const auto factors = step_factors(lift_forms(*c.flow, path), QScheme::Projected);
      Row r;
      for (const auto& t : fr) {
        const auto at = [N](double f) { return static_cast<std::size_t>(std::llround(f * N)); };
        r.defect = std::max(r.defect, cocycle_check(factors, at(t[0]), at(t[1]), at(t[2])));
      }
      r.hit = std::any_of(path.hit.begin(), path.hit.end(), [](auto h) { return h != 0; });
      return r;
    });
    double defect = 0.0, hits = 0.0;
    for (const Row& r : rows) {
      defect = std::max(defect, r.defect);
      hits += r.hit ? 1.0 : 0.0;
    }
    const bool boundary = c.flow->has_boundary();
    const double rhs = boundary ? 5.0 * c.spec.dt() : 1e-8;
    Verdict v = make("cocycle", c, defect, rhs, 0.0, 0.0, rows.size(),
                     boundary ? "max |Q_{r,t} - Q_{r,s} Q_{s,t}| <= 5 dt (boundary)"
                              : "max |Q_{r,t} - Q_{r,s} Q_{s,t}| <= 1e-8");
    v.diagnostics = {{"paths_with_hits", hits}};
    return std::vector<Verdict>{v};
  };
}

CheckPlan norm_bound_check(const CheckContext& c) {
  const CurvatureBounds bounds = declared_bounds(c, "check_norm_bound");
  return [c, bounds] {
    struct Row {
      double violations = 0.0, ratio = 0.0, local_time = 0.0;
    };
    const auto rows = map_paths<Row>(c.spec.n_paths, c.spec.exec, [&](std::size_t i) {
      const FramedPath path = path_of(c, i);
      const QFunctional q = evolve_q_projected(*c.flow, path, bounds, 0);
      const auto bound = norm_bound(path, bounds, 0);
      Row r;
      r.violations = static_cast<double>(count_bound_violations(q, path, bounds, 10.0));
      for (std::size_t k = 0; k < bound.size(); ++k)
        r.ratio = std::max(r.ratio, op_norm(q.at(k)) / bound[k]);
      r.local_time = path.local_time();
      return r;
    });
    double violations = 0.0, ratio = 0.0;
    std::vector<double> lt;
    for (const Row& r : rows) {
      violations += r.violations;
      ratio = std::max(ratio, r.ratio);
      lt.push_back(r.local_time);
    }
    Verdict v = make("norm-bound", c, violations, 0.0, 0.0, 0.0, rows.size(),
                     "violations of |Q_{0,k}| <= exp(-int K - int sigma dl)(1 + 10 dt)");
    v.diagnostics = {{"max_ratio", ratio}, {"mean_local_time", pairwise_sum(lt) / lt.size()}};
    return std::vector<Verdict>{v};
  };
}

CheckPlan penalized_limit(const CheckContext& c) {
  const CurvatureBounds bounds = declared_bounds(c, "check_penalized_limit");
  if (!c.flow->has_boundary()) throw needs(c, "check_penalized_limit needs a flow with boundary");
  const auto eps = eps_list_param(c.scenario.params, {0.1, 0.01, 0.001});
  return [c, bounds, eps] {
    struct Row {
      std::vector<double> diff;
      bool hit = false;
    };
    const auto rows = map_paths<Row>(c.spec.n_paths, c.spec.exec, [&](std::size_t i) {
      const FramedPath path = path_of(c, i);
      Row r;
      r.hit = std::any_of(path.hit.begin(), path.hit.end(), [](auto h) { return h != 0; });
      const QFunctional proj = evolve_q_projected(*c.flow, path, bounds, 0);
      for (double e : eps) {
        const QFunctional pen = evolve_q_penalized(*c.flow, path, bounds, 0, e);
        double sup = 0.0;
        for (std::size_t k = 0; k <= path.steps(); ++k)
          sup = std::max(sup, op_norm(pen.at(k) - proj.at(k)));
        r.diff.push_back(sup);
      }
      return r;
    });
    double hit = 0.0, bad = 0.0;
    std::vector<double> mean(eps.size(), 0.0);
    for (const Row& r : rows) {
      if (!r.hit) continue;
      hit += 1.0;
      bool decreasing = true;
      for (std::size_t j = 0; j < eps.size(); ++j) {
        mean[j] += r.diff[j];
        if (j > 0 && !(r.diff[j] < r.diff[j - 1])) decreasing = false;
      }
      if (!decreasing) bad += 1.0;
    }
    if (hit == 0.0) throw ArgumentError("no path touched the boundary; nothing to compare");
    Verdict v = make("penalized-limit", c, bad / hit, 0.05, 0.0, 0.0, rows.size(),
                     "fraction of boundary-touching paths where sup|Q_eps - Q| does not "
                     "decrease strictly along eps_list");
    v.diagnostics.push_back({"paths_with_hits", hit});
    for (std::size_t j = 0; j < eps.size(); ++j) {
      std::ostringstream key;
      key << "mean_sup_diff_eps_" << eps[j];
      v.diagnostics.push_back({key.str(), mean[j] / hit});
    }
    return std::vector<Verdict>{v};
  };
}

// ---------------------------------------------------------------------------------------
// Malliavin calculus

CheckPlan bismut(const CheckContext& c) {
  const Terminal fn = terminal_param(c);
  const ConfigSection& p = c.scenario.params;
  const auto rate = linear_rate(c);
  std::optional<Vec> target;
  const double T = c.spec.T, dt = c.spec.dt();
  if (fn.linear && rate) target = Vec(std::exp(-*rate * T) * fn.v);
  const bool half_line = c.scenario.flow == "half-line";
  const double bias_fallback = -1.0;
  const double bias_param = p.get_double("bias", bias_fallback);
  return [c, fn, target, half_line, bias_param, T, dt]() mutable {
    if (!target && half_line) {
      // Reflection principle: X_T = |x0 + √2 B_T|, so ∂_{x0} E f(X_T) = E f'(|y|) sign(y).
      const auto df = fn.df;
      const double oracle = gaussian_expectation(
          [&](double y) {
            Vec a(1);
            a(0) = std::abs(y);
            return df(a)(0) * (y >= 0.0 ? 1.0 : -1.0);
          },
          c.scenario.x0(0), std::sqrt(2.0 * T), 20000);
      target = Vec::Constant(1, oracle);
    }
    const BelReport rep = bel_gradient(*c.flow, c.scenario.x0, fn.f, fn.df,
                                       linear_schedule(c.spec.steps), c.spec);
    const int d = c.flow->dim();
    const double scale = target ? std::max(1.0, target->cwiseAbs().maxCoeff()) : 1.0;
    const double bias = bias_param >= 0.0
                            ? bias_param
                            : dt * scale + (c.flow->has_boundary() ? 0.3 * std::sqrt(dt) : 0.0);
    std::vector<Verdict> out;
    const auto compare = [&](const std::string& id, const VectorEstimate& est, const Vec& want,
                             const Vec& se, const std::string& note) {
      double worst = -INFINITY, worst_se = 0.0;
      for (int j = 0; j < d; ++j) {
        const double e = std::abs(est.mean(j) - want(j)) - 3.0 * se(j);
        if (e > worst) {
          worst = e;
          worst_se = se(j);
        }
      }
      Verdict v = make(id, c, worst, bias, 0.0, worst_se, c.spec.n_paths, note);
      for (int j = 0; j < d; ++j) {
        v.diagnostics.push_back({"mean_" + std::to_string(j + 1), est.mean(j)});
        v.diagnostics.push_back({"target_" + std::to_string(j + 1), want(j)});
        v.diagnostics.push_back({"se_" + std::to_string(j + 1), se(j)});
      }
      out.push_back(v);
    };
    if (target) {
      const std::string what = half_line ? "reflection-principle derivative" : "exp(-lambda T) v";
      compare("bismut-weighted", rep.weighted, *target, rep.weighted.se,
              "max_j |weighted - target| - 3 SE <= bias; target " + what);
      compare("bismut-plain", rep.plain, *target, rep.plain.se,
              "max_j |plain - target| - 3 SE <= bias; target " + what);
    }
    compare("bismut-agreement", rep.weighted, rep.plain.mean, rep.gap_se,
            "max_j |weighted - plain| - 3 SE(gap) <= bias");
    return out;
  };
}

CheckPlan gradient_formula(const CheckContext& c) {
  const Functional fn = functional_param(c, "product");
  const double delta = positive(c.scenario.params, "delta", 1e-3);
  const double tol = positive(c.scenario.params, "rel_tol", 0.05);
  return [c, fn, delta, tol] {
    const auto rep = gradient_formula_check(*c.flow, c.scenario.x0, fn.f, delta, c.spec);
    Verdict v = make("gradient-formula", c, rep.relative_error, tol, 0.0, 0.0, c.spec.n_paths,
                     "|fd - formula| / |formula| for the x0-gradient of E F");
    for (int j = 0; j < c.flow->dim(); ++j) {
      v.diagnostics.push_back({"fd_" + std::to_string(j + 1), rep.finite_difference.mean(j)});
      v.diagnostics.push_back({"formula_" + std::to_string(j + 1), rep.formula.mean(j)});
      v.diagnostics.push_back({"formula_se_" + std::to_string(j + 1), rep.formula.se(j)});
    }
    return std::vector<Verdict>{v};
  };
}

CheckPlan ibp(const CheckContext& c) {
  const Functional fn = functional_param(c, "linear");
  const ConfigSection& p = c.scenario.params;
  const Vec w = vec_param(p, "w", c.flow->dim(), kW);
  const auto eps = eps_list_param(p, {0.1, 0.05});
  const bool flat_target = c.scenario.flow == "euclid" && fn.kind == "linear";
  return [c, fn, w, eps, flat_target] {
    const auto h = CMVector::linear(w, c.spec.steps, c.spec.dt());
    const IbpReport rep = ibp_three_way(*c.flow, c.scenario.x0, fn.f, h, eps, c.spec);
    std::vector<Verdict> out;
    const auto gap = [&](const std::string& id, const Estimate& g) {
      Verdict v = make(id, c, std::abs(g.mean), rep.c_delta, 3.0 * g.se, g.se, c.spec.n_paths,
                       "|gap| <= c_delta + 3 SE, c_delta = (dt + eps_min) max(1, |pairing|)");
      v.diagnostics = {{"flow_fd", rep.flow_fd.mean},
                       {"pairing", rep.pairing.mean},
                       {"girsanov", rep.girsanov.mean}};
      out.push_back(v);
    };
    gap("ibp-fd-pairing", rep.gap_fd_pairing);
    gap("ibp-fd-girsanov", rep.gap_fd_girsanov);
    gap("ibp-pairing-girsanov", rep.gap_pairing_girsanov);
    if (flat_target) {
      const double target = std::sqrt(2.0) * c.spec.T * fn.v.dot(w);
      double worst = -INFINITY, worst_se = 0.0;
      for (const Estimate* e : {&rep.flow_fd, &rep.pairing, &rep.girsanov}) {
        const double dev = std::abs(e->mean - target) - 3.0 * e->se;
        if (dev > worst) {
          worst = dev;
          worst_se = e->se;
        }
      }
      Verdict v = make("ibp-flat-target", c, worst, rep.c_delta, 0.0, worst_se, c.spec.n_paths,
                       "max |estimate - sqrt(2) T <v, w>| - 3 SE <= c_delta");
      v.diagnostics = {{"target", target}};
      out.push_back(v);
    }
    return out;
  };
}

CheckPlan clark_ocone_check(const CheckContext& c) {
  const Functional fn = functional_param(c, "linear");
  const double degree = c.scenario.params.get_double("degree", 2);
  if (degree < 0 || degree > 4 || degree != std::floor(degree))
    throw ConfigError("'degree' must be an integer in 0..4", line_of(c.scenario.params, "degree"));
  const double tol = positive(c.scenario.params, "ratio_tol", 0.05);
  return [c, fn, degree, tol] {
    const auto rep = clark_ocone(*c.flow, c.scenario.x0, fn.f, c.spec, static_cast<int>(degree), tol);
    Verdict v = make("clark-ocone", c, rep.residual_ratio, tol, 0.0, 0.0, c.spec.n_paths,
                     "E(F - EF - sum <phi_k, dB_k>)^2 / Var F");
    v.diagnostics = {{"var_f", rep.var_f}, {"isometry", rep.isometry}, {"mean_f", rep.mean_f}};
    return std::vector<Verdict>{v};
  };
}

CheckPlan lsi(const CheckContext& c) {
  const Functional fn = functional_param(c, "exp_linear");
  const double sd = c.scenario.params.get_double("sd", 0.0);
  if (!(sd >= 0.0)) throw ConfigError("'sd' must be >= 0", line_of(c.scenario.params, "sd"));
  return [c, fn, sd] {
    const InitialLaw law = sd > 0.0 ? InitialLaw::gaussian(c.scenario.x0, sd)
                                    : InitialLaw::point(c.scenario.x0);
    const LsiReport rep = dirichlet_and_lsi(*c.flow, law, fn.f, c.spec);
    const double rhs = rep.constant * rep.form.mean;
    // Both sides carry O(Δ) Euler bias of opposite signs; 2Δ|rhs| covers it in the
    // Gaussian equality case.
    const double slack = 3.0 * rep.margin.se + 2.0 * c.spec.dt() * std::abs(rhs) + 1e-12;
    Verdict v = make(sd > 0.0 ? "lsi-free" : "lsi", c, rep.entropy.mean, rhs, slack,
                     rep.margin.se, c.spec.n_paths,
                     sd > 0.0 ? "Ent(F^2) <= (2 v C) E[|initial|^2 + 2|D0 F|^2]"
                              : "Ent(F^2) <= 2 E|D0 F|^2_H");
    v.diagnostics = {{"constant", rep.constant},
                     {"form", rep.form.mean},
                     {"entropy_se", rep.entropy.se},
                     {"floored", static_cast<double>(rep.floored)},
                     {"degenerate", rep.degenerate ? 1.0 : 0.0}};
    return std::vector<Verdict>{v};
  };
}

CheckPlan martingale(const CheckContext& c) {
  const auto rate = linear_rate(c);
  if (!rate) throw needs(c, "check_martingale needs the euclid or ou flow (closed-form P_{s,T} f)");
  const Vec v = vec_param(c.scenario.params, "v", c.flow->dim(), kV);
  const double lambda = *rate;
  return [c, v, lambda] {
    const double T = c.spec.T;
    const std::size_t N = c.spec.steps;
    const auto rep = martingale_check(
        *c.flow, c.scenario.x0,
        [&](double s, const Vec&) { return Vec(std::exp(-lambda * (T - s)) * v); },
        {0, N / 2, N}, c.spec);
    Verdict v2 = make("martingale", c, rep.worst_ratio, 1.0, 0.0, 0.0, c.spec.n_paths,
                      "max |E Q u^{-1} grad P f (X_s) - same at s'| / (3 SE + dt scale)");
    return std::vector<Verdict>{v2};
  };
}

// ---------------------------------------------------------------------------------------
// Transport

CheckPlan contraction(const CheckContext& c) {
  const CurvatureBounds bounds = declared_bounds(c, "check_contraction");
  const ConfigSection& p = c.scenario.params;
  const double pw = positive(p, "p", 2.0);
  const Tolerance tol = tolerance(p);
  const auto rate = linear_rate(c);
  const double bias_param = p.get_double("bias", -1.0);
  return [c, bounds, pw, tol, rate, bias_param] {
    std::vector<Verdict> out{check_contraction(*c.flow, c.scenario.x0, c.scenario.y0, bounds, pw,
                                               c.spec, c.scenario.name, tol)};
    if (rate) {
      const double rho0 = (c.scenario.x0 - c.scenario.y0).norm();
      const double want = std::exp(-*rate * c.spec.T) * rho0;
      // Euler bias of (1 - λΔ)^N against e^{-λT} is about λ² T Δ ρ_0 / 2.
      const double bias = bias_param >= 0.0
                              ? bias_param
                              : std::max(1e-3, *rate * *rate * c.spec.T * c.spec.dt() * rho0);
      Verdict v = make("contraction-oracle", c, std::abs(out[0].lhs - want), bias,
                       tol.z * out[0].se, out[0].se, c.spec.n_paths,
                       "|coupling estimate - exp(-lambda T) rho_0| <= bias + 3 SE");
      v.diagnostics = {{"oracle", want}, {"estimate", out[0].lhs}};
      out.push_back(v);
    }
    return out;
  };
}

CheckPlan talagrand(const CheckContext& c) {
  const CurvatureBounds bounds = declared_bounds(c, "check_talagrand");
  const Vec beta = vec_param(c.scenario.params, "beta", c.flow->dim(), kBeta);
  const Tolerance tol = tolerance(c.scenario.params);
  const bool flat = c.scenario.flow == "euclid";
  return [c, bounds, beta, tol, flat] {
    auto out = check_talagrand(*c.flow, c.scenario.x0, beta, bounds, c.spec, c.scenario.name, tol);
    if (flat) {
      const double T = c.spec.T;
      const double want = 2.0 * beta.squaredNorm() * T * T;
      const double dev =
          std::max(std::abs(out[0].lhs / want - 1.0), std::abs(out[0].rhs / want - 1.0));
      Verdict v = make("talagrand-saturation", c, dev, 0.02, 0.0, out[0].se / want, c.spec.n_paths,
                       "lhs and rhs both within 2% of 2|beta|^2 T^2");
      v.diagnostics = {{"target", want}};
      out.push_back(v);
    }
    return out;
  };
}

CheckPlan talagrand_initial(const CheckContext& c) {
  const CurvatureBounds bounds = declared_bounds(c, "check_talagrand_initial");
  if (!c.flow->spatially_flat())
    throw needs(c, "check_talagrand_initial needs a flow whose g_0 is the identity");
  const ConfigSection& p = c.scenario.params;
  const int d = c.flow->dim();
  const double sd = positive(p, "sd", 0.5);
  const Vec a = vec_param(p, "a", d, kA);
  const Vec beta = vec_param(p, "beta", d, kBeta);
  const Tolerance tol = tolerance(p);
  return [c, bounds, sd, a, beta, tol] {
    return check_talagrand_initial(*c.flow, c.scenario.x0, sd, a, beta, bounds, c.spec,
                                   c.scenario.name, tol);
  };
}

CheckPlan marginal(const CheckContext& c) {
  const CurvatureBounds bounds = declared_bounds(c, "check_marginal_transport");
  if (c.flow->dim() != 1) throw needs(c, "check_marginal_transport needs a one-dimensional flow");
  const ConfigSection& p = c.scenario.params;
  const double S = p.get_double("S", 0.0);
  if (!(S >= 0.0 && S < c.spec.T))
    throw ConfigError("'S' must lie in [0, T)", line_of(p, "S"));
  const double a = p.get_double("tilt_a", 0.6);
  const double b = p.get_double("tilt_b", 0.3);
  if (!(b >= 0.0)) throw ConfigError("'tilt_b' must be >= 0", line_of(p, "tilt_b"));
  const double eps = positive(p, "eps", 0.01);
  return [c, bounds, S, a, b, eps] {
    return check_marginal_transport(*c.flow, c.scenario.x0(0), bounds, S, c.spec.T, a, b, eps,
                                    c.scenario.name);
  };
}

CheckPlan psi(const CheckContext& c) {
  const ConfigSection& p = c.scenario.params;
  const int d = c.flow->dim();
  std::optional<double> constant = as_number(p.get_string("psi", "1"));
  if (constant && !(*constant > 0.0))
    throw ConfigError("'psi' must be positive", line_of(p, "psi"));
  const ScalarField field =
      constant ? ScalarField::constant(d, *constant) : field_param(p, "psi", d);
  const ScanRegion region = region_param(p, d);
  const Vec beta = vec_param(p, "beta", d, kBeta);
  const Tolerance tol = tolerance(p);
  return [c, constant, field, region, beta, tol] {
    auto out = check_psi_transport(*c.flow, field, c.scenario.x0, c.scenario.y0, beta, region,
                                   c.spec, c.scenario.name, tol);
    if (constant && c.flow->time_constant()) {
      // ψ ≡ c is the unit diffusion run c² times faster, with the tilt β/c.
      const double k = *constant;
      EnsembleSpec unit = c.spec;
      unit.T = k * k * c.spec.T;
      const auto ref = check_psi_transport(*c.flow, ScalarField::constant(c.flow->dim(), 1.0),
                                           c.scenario.x0, c.scenario.y0, beta / k, region, unit,
                                           c.scenario.name, tol);
      double worst = 0.0, se = 0.0;
      for (std::size_t j = 0; j < out.size(); ++j) {
        const double s = std::hypot(out[j].se, ref[j].se);
        const double dev = std::abs(out[j].lhs - ref[j].lhs) - 3.0 * s;
        if (j == 0 || dev > worst) {
          worst = dev;
          se = s;
        }
      }
      Verdict v = make("psi-time-change", c, worst, 1e-9, 0.0, se, c.spec.n_paths,
                       "psi = c matches the unit diffusion at time c^2 T with tilt beta/c "
                       "within 3 SE");
      v.diagnostics = {{"c", k}, {"reference_lhs", ref[0].lhs}, {"lhs", out[0].lhs}};
      out.push_back(v);
    }
    return out;
  };
}

CheckPlan nonconvex(const CheckContext& c) {
  const auto* conformal = dynamic_cast<const ConformalFlow*>(c.flow.get());
  if (!conformal) throw needs(c, "check_nonconvex_transport needs a conformally flat built-in flow");
  if (!c.flow->has_boundary()) throw needs(c, "check_nonconvex_transport needs a flow with boundary");
  const ConfigSection& p = c.scenario.params;
  const int d = c.flow->dim();
  const ScalarField phi =
      p.has("phi") ? field_param(p, "phi", d)
                   : disk_conformal_factor(positive(p, "phi_top", 1.5), positive(p, "phi_k", 2.5));
  if (!p.has("phi") && c.scenario.flow != "disk-exterior")
    throw needs(c, "the default conformal factor is for disk-exterior; set 'phi'");
  const ScanRegion region = d == 2 && !p.has("region") ? ScanRegion::annulus(1.0, 4.0, 31, 64)
                                                       : region_param(p, d);
  std::vector<Vec> samples;
  for (const Vec& x : region.points)
    if (std::abs(c.flow->boundary()->value(x)) <= 1e-9) samples.push_back(x);
  if (samples.empty())
    throw ConfigError("'region' contains no boundary points", line_of(p, "region"));
  const double pairs = p.get_double("pairs", 100);
  if (pairs < 1 || pairs != std::floor(pairs))
    throw ConfigError("'pairs' must be a positive integer", line_of(p, "pairs"));
  const Vec beta = vec_param(p, "beta", d, kBeta);
  const Tolerance tol = tolerance(p);
  return [c, conformal, phi, region, samples, pairs, beta, tol] {
    return check_nonconvex_transport(*conformal, phi, c.scenario.x0, c.scenario.y0, beta, region,
                                     samples, c.spec, static_cast<int>(pairs), c.scenario.name,
                                     tol);
  };
}

}  // namespace

CheckPlan plan_check(const std::string& name, const CheckContext& c) {
  if (name == "check_q_closed_form") return q_closed_form(c);
  if (name == "check_cocycle") return cocycle(c);
  if (name == "check_norm_bound") return norm_bound_check(c);
  if (name == "check_penalized_limit") return penalized_limit(c);
  if (name == "check_bismut") return bismut(c);
  if (name == "check_gradient_formula") return gradient_formula(c);
  if (name == "check_ibp") return ibp(c);
  if (name == "check_clark_ocone") return clark_ocone_check(c);
  if (name == "check_lsi") return lsi(c);
  if (name == "check_martingale") return martingale(c);
  if (name == "check_contraction") return contraction(c);
  if (name == "check_talagrand") return talagrand(c);
  if (name == "check_talagrand_initial") return talagrand_initial(c);
  if (name == "check_marginal_transport") return marginal(c);
  if (name == "check_psi_transport") return psi(c);
  if (name == "check_nonconvex_transport") return nonconvex(c);
  throw ConfigError("unknown check '" + name + "'", c.scenario.line_of("checks"));
}

}  // namespace pathflow::detail
