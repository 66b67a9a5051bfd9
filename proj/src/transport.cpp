#include "pathflow/transport.hpp"

#include "pathflow/errors.hpp"
#include "pathflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace pathflow {

void Verdict::decide() {
  margin = rhs - lhs;
  pass = std::isfinite(lhs) && std::isfinite(rhs) && lhs <= rhs + slack;
}

double Verdict::diagnostic(const std::string& key) const {
  for (const auto& [k, v] : diagnostics)
    if (k == key) return v;
  throw ArgumentError("verdict has no diagnostic '" + key + "'");
}

double CoupledPaths::sup_distance() const {
  return rho.empty() ? 0.0 : *std::max_element(rho.begin(), rho.end());
}

double flow_distance(const MetricFlow& flow, double t, const Vec& x, const Vec& y) {
  if (const auto closed = flow.closed_form_distance(t, x, y)) return *closed;
  return geodesic_and_transport(flow, t, x, y).distance;
}

CoupledPaths couple_paths(const MetricFlow& flow, const Vec& x0, const Vec& y0, double T,
                          std::size_t steps, RngKey key, const CouplingOptions& options) {
  require_in_chart(flow, 0.0, y0);
  if (const LevelSet* b = flow.boundary(); b != nullptr && b->value(y0) < 0.0)
    throw DomainError("coupled start lies outside the domain");
  if (options.beta.size() > 0 && options.beta.size() != flow.dim())
    throw ArgumentError("drift β has the wrong dimension");

  SimulationOptions sim;
  sim.renorm_every = options.renorm_every;
  sim.psi = options.psi;
  if (options.beta.size() > 0 && options.beta.squaredNorm() > 0.0) {
    const Vec beta = options.beta;
    sim.control = [beta](std::size_t, double, const Vec&) { return beta; };
  }

  CoupledPaths c;
  c.x = simulate_path(flow, x0, initial_frame(flow, x0), T, steps, key, sim);
  const MetricFlow& tf = options.transport_flow ? *options.transport_flow : flow;
  const bool same_metric = &tf == &flow;
  const double dt = c.x.dt;
  const double root2 = std::sqrt(2.0);
  const PathRng rng(key);

  c.y.reserve(steps + 1);
  c.rho.reserve(steps + 1);
  c.dl_y.reserve(steps);
  c.y.push_back(y0);
  Vec guess;
  for (std::size_t k = 0;; ++k) {
    const double s = c.x.times[k];
    const Vec& x = c.x.x[k];
    const Vec& y = c.y[k];
    GeodesicResult geo;
    try {
      geo = geodesic_and_transport(tf, s, x, y, guess.size() > 0 ? &guess : nullptr,
                                   options.geodesic);
    } catch (const NumericError& e) {
      throw CouplingError(std::string("coupling geodesic failed: ") + e.what(), k, e.residual());
    }
    guess = geo.velocity;
    c.rho.push_back(same_metric ? geo.distance : flow_distance(flow, s, x, y));
    if (k == steps) break;

    Mat frame = geo.transport * c.x.u[k];
    if (options.phi) frame *= options.phi->value(s, x) / options.phi->value(s, y);
    const double psi = options.psi ? options.psi->value(s, y) : 1.0;
    Vec next = y + (root2 * psi * (frame * c.x.dB[k]) + psi * psi * ito_drift(flow, s, y) * dt);
    if (!next.allFinite() || !flow.in_chart(s + dt, next))
      throw TruncationError("coupled path left the chart of flow '" + flow.name() + "'", k);
    double dl = 0.0;
    if (flow.has_boundary()) {
      // The same bridge uniform as X: reflection stays synchronous, and Y's law is
      // unaffected since the uniform is independent of the increments.
      const ReflectResult r = reflect_step(flow, s, y, next, 2.0 * psi * psi, dt,
                                           rng.uniform(k, stream::kBoundary));
      next = r.x;
      dl = r.dl;
    }
    c.y.push_back(std::move(next));
    c.dl_y.push_back(dl);
  }
  return c;
}

// ---------------------------------------------------------------------------------------

double integrate_k(const TimeFunction& K, double a, double b, int n) {
  if (b <= a) return 0.0;
  return simpson(K, a, b, n);
}

namespace {

std::vector<double> c_trajectory(const TimeFunction& K, double S, double T, int n) {
  if (!(T > S)) throw ArgumentError("C(S, T, K) needs T > S");
  const double h = (T - S) / n;
  std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
  double y = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = S + i * h;
    auto f = [&K](double s, double v) { return 1.0 - 2.0 * K(s) * v; };
    const double k1 = f(t, y);
    const double k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    const double k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    const double k4 = f(t + h, y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out[static_cast<std::size_t>(i) + 1] = y;
  }
  return out;
}

}  // namespace

double c_terminal(const TimeFunction& K, double S, double T, int n) {
  return c_trajectory(K, S, T, n).back();
}

double c_sup(const TimeFunction& K, double S, double T, int n) {
  const auto v = c_trajectory(K, S, T, n);
  return *std::max_element(v.begin(), v.end());
}

RInfimum r_infimum(double J, double g) {
  if (!(J >= 0.0) || !(g >= 0.0)) throw ArgumentError("r_infimum needs J >= 0 and g >= 0");
  if (g == 0.0) return {4.0 * J, std::numeric_limits<double>::infinity()};
  auto log_value = [J, g](double L) {
    const double R = std::pow(10.0, L);
    return std::log(4.0 * (1.0 + 1.0 / R) * J) + 8.0 * (1.0 + R) * g;
  };
  constexpr int kGrid = 61;
  int best = 0;
  double best_v = log_value(-3.0);
  for (int i = 1; i < kGrid; ++i) {
    const double v = log_value(-3.0 + 6.0 * i / (kGrid - 1));
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  const double lo = -3.0 + 6.0 * std::max(0, best - 1) / (kGrid - 1);
  const double hi = -3.0 + 6.0 * std::min(kGrid - 1, best + 1) / (kGrid - 1);
  const double L = golden_section(log_value, lo, hi, 1e-12);
  const double v = std::min(best_v, log_value(L));
  return {std::exp(v), std::pow(10.0, v == best_v ? -3.0 + 6.0 * best / (kGrid - 1) : L)};
}

ScanRegion ScanRegion::interval(double a, double b, int n) {
  if (n < 2 || !(b > a)) throw ArgumentError("interval region needs n >= 2 and b > a");
  ScanRegion r;
  for (int i = 0; i < n; ++i) {
    Vec x(1);
    x(0) = a + (b - a) * i / (n - 1);
    r.points.push_back(x);
  }
  std::ostringstream os;
  os << "[" << a << ", " << b << "], " << n << " points";
  r.description = os.str();
  return r;
}

ScanRegion ScanRegion::annulus(double r0, double r1, int nr, int ntheta) {
  if (nr < 2 || ntheta < 1 || !(r1 > r0) || !(r0 > 0.0))
    throw ArgumentError("annulus region needs 0 < r0 < r1, nr >= 2, ntheta >= 1");
  ScanRegion r;
  for (int i = 0; i < nr; ++i) {
    const double rad = r0 + (r1 - r0) * i / (nr - 1);
    for (int j = 0; j < ntheta; ++j) {
      const double th = 2.0 * std::numbers::pi * j / ntheta;
      Vec x(2);
      x << rad * std::cos(th), rad * std::sin(th);
      r.points.push_back(x);
    }
  }
  std::ostringstream os;
  os << r0 << " <= |x| <= " << r1 << ", " << nr << "x" << ntheta << " polar grid";
  r.description = os.str();
  return r;
}

namespace {

struct PointGeometry {
  Mat g, ginv;
  double k1 = 0.0;  // smallest eigenvalue of Ric - ∇Z relative to g
  double k2 = 0.0;  // largest eigenvalue of ∂_t g relative to g
};

PointGeometry geometry_at(const MetricFlow& flow, double t, const Vec& x) {
  PointGeometry p;
  p.g = flow.metric(t, x);
  p.ginv = p.g.inverse();
  const Mat G = flow.metric_dt(t, x);
  p.k1 = min_generalized_eigenvalue(ricci_zg(flow, t, x) + 0.5 * G, p.g);
  p.k2 = -min_generalized_eigenvalue(-G, p.g);
  return p;
}

std::vector<double> time_grid(double T, int n) {
  if (!(T > 0.0) || n < 2) throw ArgumentError("time grid needs T > 0 and at least 2 points");
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = T * i / (n - 1);
  return t;
}

// ∫_0^T w(s) e^{2∫_s^T k} ds for samples on a uniform grid. When both are constant the
// closed form is used, so the R-infimum reproduces hand values exactly.
double weighted_growth_integral(const std::vector<double>& w, const std::vector<double>& k,
                                double T) {
  const bool constant_w = std::all_of(w.begin(), w.end(), [&](double v) { return v == w[0]; });
  const bool constant_k = std::all_of(k.begin(), k.end(), [&](double v) { return v == k[0]; });
  if (constant_w && constant_k) {
    const double a = 2.0 * k[0];
    return w[0] * (std::abs(a * T) < 1e-12 ? T : std::expm1(a * T) / a);
  }
  const std::size_t n = w.size();
  const double h = T / static_cast<double>(n - 1);
  std::vector<double> tail(n, 0.0);  // ∫_{t_i}^T k
  for (std::size_t i = n - 1; i-- > 0;) tail[i] = tail[i + 1] + 0.5 * h * (k[i] + k[i + 1]);
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = w[i] * std::exp(2.0 * tail[i]);
  return trapezoid(f, h);
}

double grid_integral(const std::vector<double>& v, double T) {
  return trapezoid(v, T / static_cast<double>(v.size() - 1));
}

}  // namespace

PsiConstants psi_constants(const MetricFlow& flow, const ScalarField& psi, double T,
                           const ScanRegion& region, int time_points) {
  if (region.points.empty()) throw ArgumentError("psi_constants: empty scan region");
  PsiConstants c;
  c.region = region.description;
  const bool constant = flow.time_constant() && psi.time_constant;
  c.t = constant ? std::vector<double>{0.0, T} : time_grid(T, time_points);
  const int d = flow.dim();
  std::vector<double> sp2, sg_t;
  for (double t : c.t) {
    double k1 = INFINITY, k2 = -INFINITY, sp = 0.0, sg = 0.0, sz = 0.0;
    for (const Vec& x : region.points) {
      if (!flow.in_chart(t, x)) continue;
      const PointGeometry p = geometry_at(flow, t, x);
      const double v = psi.value(t, x);
      if (!(v > 0.0) || !std::isfinite(v))
        throw ArgumentError("psi must be finite and strictly positive on the region");
      const Vec dpsi = psi.grad(t, x);
      const Vec z = flow.drift(t, x);
      k1 = std::min(k1, p.k1);
      k2 = std::max(k2, p.k2);
      sp = std::max(sp, std::abs(v));
      sg = std::max(sg, std::sqrt(std::max(0.0, dpsi.dot(p.ginv * dpsi))));
      sz = std::max(sz, std::sqrt(std::max(0.0, z.dot(p.g * z))));
    }
    if (!std::isfinite(k1) || !std::isfinite(sp + sg + sz))
      throw ArgumentError("psi_constants: unbounded scan on the region");
    c.k1.push_back(k1);
    c.k2.push_back(k2);
    c.k_psi.push_back((d - 1) * sg * sg + std::max(0.0, -k1) * sp * sp + 2.0 * sz * sp * sg + k2);
    c.sup_psi = std::max(c.sup_psi, sp);
    c.sup_grad = std::max(c.sup_grad, sg);
    c.sup_z = std::max(c.sup_z, sz);
    sp2.push_back(sp * sp);
    sg_t.push_back(sg);
  }
  c.J = weighted_growth_integral(sp2, c.k_psi, T);
  const RInfimum inf = r_infimum(c.J, c.sup_grad);
  c.c = inf.value;
  c.r_opt = inf.r;
  std::vector<double> kg(c.k_psi.size());
  for (std::size_t i = 0; i < kg.size(); ++i) kg[i] = c.k_psi[i] + sg_t[i];
  c.int_k_grad = grid_integral(kg, T);
  return c;
}

ConformalConstants conformal_constants(const MetricFlow& flow, const ScalarField& phi, double T,
                                       const ScanRegion& region,
                                       const std::vector<Vec>& boundary_samples,
                                       int time_points) {
  if (region.points.empty()) throw ArgumentError("conformal_constants: empty scan region");
  if (!flow.has_boundary()) throw ArgumentError("conformal_constants: flow has no boundary");
  ConformalConstants c;
  c.region = region.description;
  const bool constant = flow.time_constant() && phi.time_constant;
  c.t = constant ? std::vector<double>{0.0, T} : time_grid(T, time_points);
  const int d = flow.dim();
  c.inf_phi = INFINITY;
  c.boundary_margin = INFINITY;
  double inf_k1_value = INFINITY;
  std::vector<double> sg_t;

  for (double t : c.t) {
    // Boundary conditions and the boundary feet join the φ scan.
    std::vector<Vec> points = region.points;
    for (const Vec& xb : boundary_samples) {
      const BoundaryPoint bp = boundary_point(flow, t, xb);
      points.push_back(bp.foot);
      const double ii = min_second_fundamental(flow, t, bp);
      const double n_log_phi = phi.grad(t, bp.foot).dot(bp.normal) / phi.value(t, bp.foot);
      const double m = std::isfinite(ii) ? ii + n_log_phi : INFINITY;
      if (m < c.boundary_margin) {
        c.boundary_margin = m;
        c.argmin_boundary = bp.foot;
      }
    }
    double k1 = INFINITY, k2 = -INFINITY;
    for (const Vec& x : points) {
      if (!flow.in_chart(t, x)) continue;
      const PointGeometry p = geometry_at(flow, t, x);
      k1 = std::min(k1, p.k1);
      k2 = std::max(k2, p.k2);
    }
    double kp1 = INFINITY, dtlog = -INFINITY, sp = 0.0, sg = 0.0, mixed = 0.0;
    Vec arg_kp1;
    for (const Vec& x : points) {
      if (!flow.in_chart(t, x)) continue;
      const Mat g = flow.metric(t, x);
      const Mat ginv = g.inverse();
      const double f = phi.value(t, x);
      if (!(f > 0.0) || !std::isfinite(f))
        throw ArgumentError("phi must be finite and strictly positive on the region");
      const Vec df = phi.grad(t, x);
      const Mat H = phi.hess(t, x);
      const Vec z = flow.drift(t, x);
      const Vec df2 = 2.0 * f * df;
      const Mat H2 = 2.0 * (f * H + df * df.transpose());
      Vec gamma_trace = Vec::Zero(d);
      if (!flow.spatially_flat()) gamma_trace = flow.christoffel_symbols(t, x).trace_with(ginv);
      const double L = (ginv * H2).trace() - gamma_trace.dot(df2) + z.dot(df2);
      const double grad_norm = std::sqrt(std::max(0.0, df.dot(ginv * df)));
      const double z_norm = std::sqrt(std::max(0.0, z.dot(g * z)));
      const double v = f * k1 + 0.5 * L - 2.0 * f * grad_norm * z_norm -
                       (d - 2) * grad_norm * grad_norm;
      if (v < kp1) {
        kp1 = v;
        arg_kp1 = x;
      }
      dtlog = std::max(dtlog, -2.0 * phi.dt(t, x) / f);
      sp = std::max(sp, f);
      sg = std::max(sg, grad_norm);
      const Vec w = f * z + (d - 2) * (ginv * df);
      mixed = std::max(mixed, std::sqrt(std::max(0.0, w.dot(g * w))));
      if (f < c.inf_phi) {
        c.inf_phi = f;
        c.argmin_phi = x;
      }
    }
    if (!std::isfinite(kp1)) throw ArgumentError("conformal_constants: unbounded scan");
    if (kp1 < inf_k1_value) {
      inf_k1_value = kp1;
      c.argmin_k_phi1 = arg_kp1;
    }
    const double kp2 = dtlog + k2;
    c.k_phi1.push_back(kp1);
    c.k_phi2.push_back(kp2);
    c.k_phi.push_back((d - 1) * sg * sg + std::max(0.0, -kp1) + 2.0 * mixed * sg + kp2);
    c.sup_phi = std::max(c.sup_phi, sp);
    c.sup_grad = std::max(c.sup_grad, sg);
    sg_t.push_back(sg);
  }

  std::ostringstream why;
  if (std::abs(c.inf_phi - 1.0) > 1e-6) why << "inf phi = " << c.inf_phi << " (must be 1); ";
  if (c.boundary_margin < -1e-10)
    why << "II + N log phi = " << c.boundary_margin << " < 0 on the boundary; ";
  c.reason = why.str();
  c.admissible = c.reason.empty();

  c.J = weighted_growth_integral(std::vector<double>(c.k_phi.size(), 1.0), c.k_phi, T);
  const RInfimum inf = r_infimum(c.J, c.sup_grad);
  c.c = inf.value;
  c.r_opt = inf.r;
  std::vector<double> kg(c.k_phi.size());
  for (std::size_t i = 0; i < kg.size(); ++i) kg[i] = c.k_phi[i] + sg_t[i];
  c.int_k_grad = grid_integral(kg, T);
  return c;
}

ScalarField disk_conformal_factor(double top, double k) {
  if (!(top > 1.0) || !(k > 0.0)) throw ArgumentError("disk_conformal_factor needs top > 1, k > 0");
  const double a = top - 1.0;
  return ScalarField::radial(
      2, [top, a, k](double r) { return top - a * std::exp(-k * (r - 1.0)); },
      [a, k](double r) { return a * k * std::exp(-k * (r - 1.0)); },
      [a, k](double r) { return -a * k * k * std::exp(-k * (r - 1.0)); });
}

// ---------------------------------------------------------------------------------------

namespace {

struct PairSummary {
  double terminal = 0.0;
  double sup = 0.0;
  std::vector<double> sampled;  // ρ at the trace indices
};

// At most ~100 trace times, always including both ends.
std::vector<std::size_t> trace_indices(std::size_t steps) {
  const std::size_t stride = std::max<std::size_t>(1, steps / 100);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < steps; k += stride) out.push_back(k);
  out.push_back(steps);
  return out;
}

std::vector<TracePoint> trace_of(const std::vector<std::vector<double>>& rows,
                                 const std::vector<std::size_t>& idx, double dt) {
  std::vector<TracePoint> out;
  std::vector<double> col(rows.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][j];
    const Estimate e = mc_reduce(col);
    out.push_back({static_cast<double>(idx[j]) * dt, e.mean, e.se});
  }
  return out;
}

Estimate sqrt_estimate(const std::vector<double>& v) {
  const Estimate m = mc_reduce(v);
  const double root = std::sqrt(std::max(0.0, m.mean));
  std::vector<double> influence(v.size(), 0.0);
  if (root > 0.0)
    for (std::size_t i = 0; i < v.size(); ++i) influence[i] = (v[i] - m.mean) / (2.0 * root);
  return delta_estimate(root, influence);
}

double slack_of(const Tolerance& tol, double rhs, double se, double dt) {
  return tol.rel_per_dt * dt * std::abs(rhs) + tol.abs + tol.z * se;
}

}  // namespace

Verdict check_contraction(const MetricFlow& flow, const Vec& x0, const Vec& y0,
                          const CurvatureBounds& bounds, double p, const EnsembleSpec& spec,
                          const std::string& scenario, const Tolerance& tol) {
  if (!(p >= 1.0)) throw ArgumentError("contraction order p must be >= 1");
  CouplingOptions opt;
  opt.renorm_every = spec.sim.renorm_every;
  const auto idx = trace_indices(spec.steps);
  const auto pairs = map_paths<PairSummary>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const CoupledPaths c = couple_paths(flow, x0, y0, spec.T, spec.steps, spec.key(i), opt);
    PairSummary s{c.terminal_distance(), c.sup_distance(), {}};
    for (std::size_t k : idx) s.sampled.push_back(c.rho[k]);
    return s;
  });
  std::vector<double> term(pairs.size()), sup(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    term[i] = std::pow(pairs[i].terminal, p);
    sup[i] = std::pow(pairs[i].sup, p);
  }
  const Estimate mt = mc_reduce(term);
  const double lhs = std::pow(std::max(0.0, mt.mean), 1.0 / p);
  std::vector<double> influence(term.size(), 0.0);
  if (lhs > 0.0)
    for (std::size_t i = 0; i < term.size(); ++i)
      influence[i] = (term[i] - mt.mean) * lhs / (p * mt.mean);
  const Estimate e = delta_estimate(lhs, influence);

  const double rho0 = flow_distance(flow, 0.0, x0, y0);
  const double factor = std::exp(-integrate_k(bounds.K, 0.0, spec.T));
  Verdict v;
  v.theorem_id = "contraction";
  v.scenario = scenario;
  v.lhs = lhs;
  v.rhs = factor * rho0;
  v.se = e.se;
  v.n_paths = spec.n_paths;
  v.slack = slack_of(tol, v.rhs, v.se, spec.dt());
  v.diagnostics = {{"rho0", rho0},
                   {"factor", factor},
                   {"p", p},
                   {"sup_moment_root", std::pow(mc_reduce(sup).mean, 1.0 / p)}};
  v.note = "terminal-distance moment; sup-distance moment is a diagnostic";
  std::vector<std::vector<double>> rows(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) rows[i] = pairs[i].sampled;
  v.trace = trace_of(rows, idx, spec.dt());
  v.decide();
  return v;
}

namespace {

struct TiltSummary {
  double sup2 = 0.0;
  double log_f = 0.0;
  double violations = 0.0;
  std::vector<double> sampled;  // ρ² at the trace indices
};

// Synchronous-coupling bound on ρ_{s_k}: e^{-E(s)} √2 |β| ∫_0^s e^{E(u)} du, E = ∫_0 K.
std::vector<double> domination_bound(const TimeFunction& K, double beta_norm, double dt,
                                     std::size_t steps) {
  std::vector<double> E(steps + 1, 0.0), acc(steps + 1, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double a = k * dt, b = (k + 1) * dt;
    E[k + 1] = E[k] + dt / 6.0 * (K(a) + 4.0 * K(0.5 * (a + b)) + K(b));
    acc[k + 1] = acc[k] + 0.5 * dt * (std::exp(E[k]) + std::exp(E[k + 1]));
  }
  std::vector<double> out(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    out[k] = std::exp(-E[k]) * std::sqrt(2.0) * beta_norm * acc[k];
  return out;
}

}  // namespace

std::vector<Verdict> check_talagrand(const MetricFlow& flow, const Vec& x0, const Vec& beta,
                                     const CurvatureBounds& bounds, const EnsembleSpec& spec,
                                     const std::string& scenario, const Tolerance& tol) {
  CouplingOptions opt;
  opt.beta = beta;
  opt.renorm_every = spec.sim.renorm_every;
  const double dt = spec.dt();
  const auto bound = domination_bound(bounds.K, beta.norm(), dt, spec.steps);
  const double half_b2 = 0.5 * beta.squaredNorm();
  const auto idx = trace_indices(spec.steps);
  const auto rows = map_paths<TiltSummary>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const CoupledPaths c = couple_paths(flow, x0, x0, spec.T, spec.steps, spec.key(i), opt);
    TiltSummary s;
    const double sup = c.sup_distance();
    s.sup2 = sup * sup;
    // Increments are Brownian under Q; log F = Σ<β, dB̃> + ½|β|²T.
    for (const Vec& db : c.x.dB) s.log_f += beta.dot(db);
    s.log_f += half_b2 * spec.T;
    for (std::size_t k = 0; k <= spec.steps; ++k)
      if (c.rho[k] > bound[k] * (1.0 + tol.rel_per_dt * dt) + 1e-9) s.violations += 1.0;
    for (std::size_t k : idx) s.sampled.push_back(c.rho[k] * c.rho[k]);
    return s;
  });
  std::vector<double> sup2(rows.size()), logf(rows.size()), viol(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sup2[i] = rows[i].sup2;
    logf[i] = rows[i].log_f;
    viol[i] = rows[i].violations;
  }
  const double ent = half_b2 * spec.T;
  const double C = c_sup(bounds.K, 0.0, spec.T);
  const Estimate l = mc_reduce(sup2);
  const Estimate root = sqrt_estimate(sup2);

  Verdict t;
  t.theorem_id = "talagrand-path";
  t.scenario = scenario;
  t.lhs = l.mean;
  t.rhs = 4.0 * C * ent;
  t.se = l.se;
  t.n_paths = spec.n_paths;
  t.slack = slack_of(tol, t.rhs, t.se, dt);
  t.diagnostics = {{"C", C},
                   {"entropy", ent},
                   {"unsquared_lhs", root.mean},
                   {"unsquared_margin", t.rhs - root.mean}};
  t.note = "E max rho^2 over the coupling bounds W2^2 from above";
  std::vector<std::vector<double>> sampled(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) sampled[i] = rows[i].sampled;
  t.trace = trace_of(sampled, idx, dt);
  t.decide();

  const Estimate le = mc_reduce(logf);
  Verdict e;
  e.theorem_id = "entropy-identity";
  e.scenario = scenario;
  e.lhs = std::abs(le.mean - ent);
  e.rhs = 0.0;
  e.se = le.se;
  e.n_paths = spec.n_paths;
  e.slack = tol.z * le.se + 1e-12;
  e.diagnostics = {{"estimate", le.mean}, {"exact", ent}};
  e.note = "lhs = |estimate - exact|";
  e.decide();

  Verdict d;
  d.theorem_id = "distance-domination";
  d.scenario = scenario;
  d.lhs = pairwise_sum(viol);
  d.rhs = 0.0;
  d.n_paths = spec.n_paths;
  d.slack = 0.0;
  d.diagnostics = {{"terminal_bound", bound.back()}};
  d.note = "lhs = number of path-wise violations beyond the step allowance";
  d.decide();
  return {t, e, d};
}

std::vector<Verdict> check_talagrand_initial(const MetricFlow& flow, const Vec& m, double s,
                                             const Vec& a, const Vec& beta,
                                             const CurvatureBounds& bounds,
                                             const EnsembleSpec& spec,
                                             const std::string& scenario,
                                             const Tolerance& tol) {
  if (!(s > 0.0)) throw ArgumentError("initial law needs sd > 0");
  if (!flow.spatially_flat() || !flow.metric(0.0, m).isApprox(identity(flow.dim())))
    throw ArgumentError("initial-law check needs g_0 = I in the chart");
  CouplingOptions opt;
  opt.beta = beta;
  opt.renorm_every = spec.sim.renorm_every;
  const InitialLaw tilted_law = InitialLaw::gaussian(m + a * s * s, s);
  const auto sup2 = map_paths<double>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const Vec x0 = tilted_law.sample(spec.key(i));
    const Vec y0 = x0 - a * s * s;
    const double r = couple_paths(flow, x0, y0, spec.T, spec.steps, spec.key(i), opt)
                         .sup_distance();
    return r * r;
  });
  const double C = c_sup(bounds.K, 0.0, spec.T);
  const double factor = std::exp(-integrate_k(bounds.K, 0.0, spec.T));
  const double w0 = a.norm() * s * s;
  const double ent = 0.5 * a.squaredNorm() * s * s + 0.5 * beta.squaredNorm() * spec.T;
  const double c_mu = 2.0 * s * s;
  const Estimate sq = mc_reduce(sup2);
  const Estimate root = sqrt_estimate(sup2);

  Verdict u;
  u.theorem_id = "talagrand-initial";
  u.scenario = scenario;
  u.lhs = root.mean;
  u.rhs = 2.0 * std::sqrt(C * ent) + factor * w0;
  u.se = root.se;
  u.n_paths = spec.n_paths;
  u.slack = slack_of(tol, u.rhs, u.se, spec.dt());
  u.diagnostics = {{"C", C}, {"entropy", ent}, {"W2_initial", w0}, {"factor", factor}};
  u.decide();

  Verdict q;
  q.theorem_id = "talagrand-initial-squared";
  q.scenario = scenario;
  q.lhs = sq.mean;
  const double k = 2.0 * std::sqrt(C) + std::sqrt(c_mu) * factor;
  q.rhs = k * k * ent;
  q.se = sq.se;
  q.n_paths = spec.n_paths;
  q.slack = slack_of(tol, q.rhs, q.se, spec.dt());
  q.diagnostics = {{"C", C}, {"C_mu", c_mu}, {"entropy", ent}};
  q.note = "squared left side";
  q.decide();
  return {u, q};
}

// ---------------------------------------------------------------------------------------

Law1d transition_law_1d(const MetricFlow& flow, double x, double S, double T) {
  if (flow.dim() != 1 || !flow.spatially_flat() || !flow.time_constant())
    throw ArgumentError("transition_law_1d needs a flat time-constant flow on the line");
  if (!(T > S)) throw ArgumentError("transition_law_1d needs T > S");
  if (flow.metric(0.0, Vec::Zero(1))(0, 0) != 1.0)
    throw ArgumentError("transition_law_1d needs the unit metric");
  const double tau = T - S;
  const Vec zero = Vec::Zero(1);
  const double lambda = -flow.drift_jacobian(0.0, zero)(0, 0);
  Vec probe(1);
  probe(0) = 1.7;
  if (std::abs(flow.drift(0.0, zero)(0)) > 1e-12 ||
      std::abs(flow.drift(0.0, probe)(0) + lambda * 1.7) > 1e-9)
    throw ArgumentError("transition_law_1d needs a linear drift -λx");
  const double mean = lambda == 0.0 ? x : x * std::exp(-lambda * tau);
  const double var = lambda == 0.0 ? 2.0 * tau : -std::expm1(-2.0 * lambda * tau) / lambda;
  const double sd = std::sqrt(var);
  auto gauss = [sd](double y) {
    return std::exp(-0.5 * y * y / (sd * sd)) / (sd * std::sqrt(2.0 * std::numbers::pi));
  };
  if (flow.has_boundary()) {
    if (lambda != 0.0) throw ArgumentError("reflected transition law needs λ = 0");
    return {[gauss, mean](double y) { return y < 0.0 ? 0.0 : gauss(y - mean) + gauss(y + mean); },
            0.0, mean + 12.0 * sd};
  }
  return {[gauss, mean](double y) { return gauss(y - mean); }, mean - 12.0 * sd,
          mean + 12.0 * sd};
}

Law1d tilted(const Law1d& p, const std::function<double(double)>& f) {
  const auto dens = p.density;
  return {[dens, f](double y) { return f(y) * dens(y); }, p.lo, p.hi};
}

namespace {

struct Cdf {
  double lo = 0.0, h = 0.0;
  std::vector<double> lower;  // mass of [lo, x_j]
  std::vector<double> upper;  // mass of [x_j, hi]

  explicit Cdf(const Law1d& law, int grid) : lo(law.lo) {
    if (!(law.hi > law.lo) || grid < 16) throw ArgumentError("bad law support or grid");
    const std::size_t n = static_cast<std::size_t>(grid);
    h = (law.hi - law.lo) / static_cast<double>(n);
    std::vector<double> f(n + 1);
    for (std::size_t j = 0; j <= n; ++j) f[j] = law.density(lo + h * static_cast<double>(j));
    lower.assign(n + 1, 0.0);
    upper.assign(n + 1, 0.0);
    for (std::size_t j = 0; j < n; ++j) lower[j + 1] = lower[j] + 0.5 * h * (f[j] + f[j + 1]);
    for (std::size_t j = n; j-- > 0;) upper[j] = upper[j + 1] + 0.5 * h * (f[j] + f[j + 1]);
    const double total = lower.back();
    if (!(total > 0.0) || !std::isfinite(total)) throw NumericError("law has no mass");
    for (double& v : lower) v /= total;
    for (double& v : upper) v /= total;
  }

  double x_at(double j) const { return lo + h * j; }

  // Quantile by the lower table for small levels and the upper table for large ones, so
  // neither tail loses precision.
  double quantile_lower(double q) const {
    const auto it = std::lower_bound(lower.begin(), lower.end(), q);
    if (it == lower.begin()) return x_at(0);
    if (it == lower.end()) return x_at(static_cast<double>(lower.size() - 1));
    const std::size_t j = static_cast<std::size_t>(it - lower.begin());
    const double a = lower[j - 1], b = lower[j];
    const double w = b > a ? (q - a) / (b - a) : 0.5;
    return x_at(static_cast<double>(j - 1) + w);
  }

  double quantile_upper(double q) const {
    // upper is decreasing; find the first j with upper[j] <= q.
    const auto it = std::lower_bound(upper.begin(), upper.end(), q,
                                     [](double v, double target) { return v > target; });
    if (it == upper.begin()) return x_at(0);
    if (it == upper.end()) return x_at(static_cast<double>(upper.size() - 1));
    const std::size_t j = static_cast<std::size_t>(it - upper.begin());
    const double a = upper[j - 1], b = upper[j];
    const double w = a > b ? (a - q) / (a - b) : 0.5;
    return x_at(static_cast<double>(j - 1) + w);
  }
};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double quantile_w2(const Law1d& p, const Law1d& q, int nodes, int grid) {
  if (nodes < 16) throw ArgumentError("quantile_w2 needs at least 16 nodes");
  const Cdf a(p, grid), b(q, grid);
  constexpr double kZ = 7.0;
  const double hz = 2.0 * kZ / (nodes - 1);
  std::vector<double> terms(static_cast<std::size_t>(nodes));
  std::vector<double> weights(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    const double z = -kZ + hz * i;
    double qa, qb;
    if (z < 0.0) {
      const double level = normal_cdf(z);
      qa = a.quantile_lower(level);
      qb = b.quantile_lower(level);
    } else {
      const double level = normal_cdf(-z);
      qa = a.quantile_upper(level);
      qb = b.quantile_upper(level);
    }
    const double w = std::exp(-0.5 * z * z) * ((i == 0 || i == nodes - 1) ? 0.5 : 1.0);
    weights[static_cast<std::size_t>(i)] = w;
    terms[static_cast<std::size_t>(i)] = w * (qa - qb) * (qa - qb);
  }
  return pairwise_sum(terms) / pairwise_sum(weights);
}

std::pair<double, double> entropy_and_fisher(const Law1d& p,
                                             const std::function<double(double)>& f,
                                             const std::function<double(double)>& df,
                                             int grid) {
  const std::size_t n = static_cast<std::size_t>(grid);
  const double h = (p.hi - p.lo) / static_cast<double>(n);
  std::vector<double> mass(n + 1), ent(n + 1), fis(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    const double y = p.lo + h * static_cast<double>(j);
    const double w = p.density(y);
    const double v = f(y);
    mass[j] = w;
    ent[j] = v > 0.0 ? w * v * std::log(v) : 0.0;
    fis[j] = v > 0.0 ? w * df(y) * df(y) / v : 0.0;
  }
  const double total = trapezoid(mass, h);
  return {trapezoid(ent, h) / total, trapezoid(fis, h) / total};
}

std::vector<Verdict> check_marginal_transport(const MetricFlow& flow, double x,
                                              const CurvatureBounds& bounds, double S,
                                              double T, double a, double b, double eps,
                                              const std::string& scenario) {
  if (b < 0.0) throw ArgumentError("marginal check needs b >= 0");
  const Law1d law = transition_law_1d(flow, x, S, T);
  const std::size_t n = 200000;
  const double h = (law.hi - law.lo) / static_cast<double>(n);
  auto raw = [a, b](double y) { return std::exp(a * y - 0.5 * b * y * y); };
  std::vector<double> mass(n + 1), tilt(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    const double y = law.lo + h * static_cast<double>(j);
    mass[j] = law.density(y);
    tilt[j] = mass[j] * raw(y);
  }
  const double z = trapezoid(tilt, h) / trapezoid(mass, h);
  auto f = [raw, z](double y) { return raw(y) / z; };
  auto df = [raw, z, a, b](double y) { return (a - b * y) * raw(y) / z; };

  auto w2_checked = [](const Law1d& p, const Law1d& q) {
    const double w = quantile_w2(p, q, 10000);
    const double w_fine = quantile_w2(p, q, 20000);
    if (std::abs(w - w_fine) > 1e-6)
      throw NumericError("quantile W2 did not converge under node doubling", std::abs(w - w_fine));
    return std::pair{w, std::abs(w - w_fine)};
  };

  const auto [w2, change] = w2_checked(law, tilted(law, f));
  const auto [ent, fisher] = entropy_and_fisher(law, f, df);
  const double I = c_terminal(bounds.K, S, T);
  constexpr double kQuadratureSlack = 1e-7;

  Verdict e;
  e.theorem_id = "marginal-entropy";
  e.scenario = scenario;
  e.lhs = w2;
  e.rhs = 4.0 * I * ent;
  e.slack = kQuadratureSlack;
  e.diagnostics = {{"I", I}, {"entropy", ent}, {"doubling_change", change}};
  e.note = "exact quantile coupling";
  e.decide();

  Verdict g;
  g.theorem_id = "marginal-fisher";
  g.scenario = scenario;
  g.lhs = w2;
  g.rhs = 4.0 * I * I * fisher;
  g.slack = kQuadratureSlack;
  g.diagnostics = {{"I", I}, {"fisher", fisher}, {"doubling_change", change}};
  g.note = "exact quantile coupling";
  g.decide();

  // Lemma check with h = sin - μ(sin), ‖h''‖ = 1.
  std::vector<double> s(n + 1);
  for (std::size_t j = 0; j <= n; ++j) s[j] = mass[j] * std::sin(law.lo + h * static_cast<double>(j));
  const double mean_sin = trapezoid(s, h) / trapezoid(mass, h);
  auto hf = [mean_sin](double y) { return std::sin(y) - mean_sin; };
  auto dh = [](double y) { return std::cos(y); };
  std::vector<double> h2(n + 1), dh2(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    const double y = law.lo + h * static_cast<double>(j);
    h2[j] = mass[j] * hf(y) * hf(y);
    dh2[j] = mass[j] * dh(y) * dh(y);
  }
  const double total = trapezoid(mass, h);
  const double var = trapezoid(h2, h) / total;
  const double grad2 = trapezoid(dh2, h) / total;
  const auto [w2e, change_e] =
      w2_checked(law, tilted(law, [hf, eps](double y) { return 1.0 + eps * hf(y); }));
  const double W = std::sqrt(w2e);
  Verdict o;
  o.theorem_id = "ow-lemma";
  o.scenario = scenario;
  o.lhs = var;
  o.rhs = std::sqrt(grad2) * W / eps + W * W / (2.0 * eps);
  o.slack = kQuadratureSlack;
  o.diagnostics = {{"epsilon", eps}, {"W", W}, {"doubling_change", change_e}};
  o.decide();
  return {e, g, o};
}

// ---------------------------------------------------------------------------------------

std::vector<Verdict> check_psi_transport(const MetricFlow& flow, const ScalarField& psi,
                                         const Vec& x0, const Vec& y0, const Vec& beta,
                                         const ScanRegion& region, const EnsembleSpec& spec,
                                         const std::string& scenario, const Tolerance& tol) {
  const PsiConstants k = psi_constants(flow, psi, spec.T, region);
  CouplingOptions opt;
  opt.beta = beta;
  opt.psi = &psi;
  opt.renorm_every = spec.sim.renorm_every;
  const auto tilt = map_paths<double>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const double r =
        couple_paths(flow, x0, x0, spec.T, spec.steps, spec.key(i), opt).sup_distance();
    return r * r;
  });
  CouplingOptions plain = opt;
  plain.beta = Vec();
  const auto pair = map_paths<double>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const double r =
        couple_paths(flow, x0, y0, spec.T, spec.steps, spec.key(i), plain).sup_distance();
    return r * r;
  });
  const double ent = 0.5 * beta.squaredNorm() * spec.T;
  const Estimate l = mc_reduce(tilt);
  const auto common = std::vector<std::pair<std::string, double>>{
      {"C_psi", k.c},         {"R_opt", k.r_opt},       {"sup_psi", k.sup_psi},
      {"sup_grad_psi", k.sup_grad}, {"int_K_psi_plus_grad", k.int_k_grad}};

  Verdict t;
  t.theorem_id = "psi-talagrand";
  t.scenario = scenario;
  t.lhs = l.mean;
  t.rhs = k.c * ent;
  t.se = l.se;
  t.n_paths = spec.n_paths;
  t.slack = slack_of(tol, t.rhs, t.se, spec.dt());
  t.diagnostics = common;
  t.diagnostics.emplace_back("entropy", ent);
  t.note = "region: " + k.region;
  t.decide();

  const Estimate r = sqrt_estimate(pair);
  const double rho0 = flow_distance(flow, 0.0, x0, y0);
  Verdict c;
  c.theorem_id = "psi-contraction";
  c.scenario = scenario;
  c.lhs = r.mean;
  c.rhs = 2.0 * std::exp(k.int_k_grad) * rho0;
  c.se = r.se;
  c.n_paths = spec.n_paths;
  c.slack = slack_of(tol, c.rhs, c.se, spec.dt());
  c.diagnostics = common;
  c.diagnostics.emplace_back("rho0", rho0);
  c.note = "region: " + k.region;
  c.decide();
  return {t, c};
}

std::vector<Verdict> check_nonconvex_transport(const ConformalFlow& flow, const ScalarField& phi,
                                               const Vec& x0, const Vec& y0, const Vec& beta,
                                               const ScanRegion& region,
                                               const std::vector<Vec>& boundary_samples,
                                               const EnsembleSpec& spec, int pairs,
                                               const std::string& scenario,
                                               const Tolerance& tol) {
  const ConformalConstants k =
      conformal_constants(flow, phi, spec.T, region, boundary_samples);
  Verdict adm;
  adm.theorem_id = "conformal-admissible";
  adm.scenario = scenario;
  adm.lhs = std::max(-k.boundary_margin, std::abs(k.inf_phi - 1.0) - 1e-6);
  adm.rhs = 0.0;
  adm.slack = 1e-10;
  adm.diagnostics = {{"inf_phi", k.inf_phi},
                     {"boundary_margin", k.boundary_margin},
                     {"K_phi1_min", *std::min_element(k.k_phi1.begin(), k.k_phi1.end())},
                     {"K_phi2_max", *std::max_element(k.k_phi2.begin(), k.k_phi2.end())},
                     {"K_phi_max", *std::max_element(k.k_phi.begin(), k.k_phi.end())},
                     {"sup_phi", k.sup_phi},
                     {"sup_grad_phi", k.sup_grad}};
  adm.note = "region: " + k.region + (k.admissible ? "" : "; " + k.reason);
  adm.decide();
  if (!k.admissible) return {adm};

  const auto tilde = conformal_change(flow, phi);

  // Sandwich on pairs of region points whose chord clears the obstacle by a margin, drawn
  // with the auxiliary stream. Staying on the region keeps sup φ meaningful.
  Verdict sw;
  sw.theorem_id = "conformal-sandwich";
  sw.scenario = scenario;
  sw.rhs = 0.0;
  sw.slack = 1e-8;
  {
    const PathRng rng(RngKey{spec.seed, 0});
    const auto n_points = static_cast<double>(region.points.size());
    const LevelSet* b = flow.boundary();
    double worst = -INFINITY;
    int accepted = 0;
    for (std::uint64_t draw = 0; accepted < pairs && draw < 100000; ++draw) {
      const auto [ux, uy] = rng.uniform_pair(draw, stream::kAux);
      const Vec& x = region.points[static_cast<std::size_t>(ux * n_points)];
      const Vec& y = region.points[static_cast<std::size_t>(uy * n_points)];
      if ((x - y).norm() == 0.0) continue;
      if (!flow.in_chart(0.0, x) || !flow.in_chart(0.0, y)) continue;
      if (b && (b->value(x) < 0.0 || b->value(y) < 0.0)) continue;
      bool clear = true;
      for (int j = 0; j <= 32 && clear; ++j) {
        const Vec c = x + (y - x) * (j / 32.0);
        if (b && b->value(c) < 0.02) clear = false;
      }
      if (!clear) continue;
      ++accepted;
      const double rho = flow_distance(flow, 0.0, x, y);
      const double rt = geodesic_and_transport(*tilde, 0.0, x, y).distance;
      worst = std::max({worst, rt - rho, rho - k.sup_phi * rt});
    }
    sw.lhs = worst;
    sw.n_paths = static_cast<std::size_t>(accepted);
    sw.diagnostics = {{"pairs", static_cast<double>(accepted)}, {"sup_phi", k.sup_phi}};
    sw.note = "lhs = max(rho~ - rho, rho - sup phi rho~)";
    sw.decide();
  }

  CouplingOptions opt;
  opt.beta = beta;
  opt.transport_flow = tilde.get();
  opt.phi = &phi;
  opt.renorm_every = spec.sim.renorm_every;
  const auto tilt = map_paths<double>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const double r =
        couple_paths(flow, x0, x0, spec.T, spec.steps, spec.key(i), opt).sup_distance();
    return r * r;
  });
  CouplingOptions plain = opt;
  plain.beta = Vec();
  const auto pair = map_paths<double>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const double r =
        couple_paths(flow, x0, y0, spec.T, spec.steps, spec.key(i), plain).sup_distance();
    return r * r;
  });
  const double ent = 0.5 * beta.squaredNorm() * spec.T;
  const auto common = std::vector<std::pair<std::string, double>>{
      {"C_phi", k.c},
      {"R_opt", k.r_opt},
      {"sup_phi", k.sup_phi},
      {"sup_grad_phi", k.sup_grad},
      {"int_K_phi_plus_grad", k.int_k_grad}};

  const Estimate l = mc_reduce(tilt);
  Verdict t;
  t.theorem_id = "conformal-talagrand";
  t.scenario = scenario;
  t.lhs = l.mean;
  t.rhs = k.sup_phi * k.sup_phi * k.c * ent;
  t.se = l.se;
  t.n_paths = spec.n_paths;
  t.slack = slack_of(tol, t.rhs, t.se, spec.dt());
  t.diagnostics = common;
  t.diagnostics.emplace_back("entropy", ent);
  t.note = "region: " + k.region;
  t.decide();

  const Estimate r = sqrt_estimate(pair);
  const double rho0 = flow_distance(flow, 0.0, x0, y0);
  Verdict c;
  c.theorem_id = "conformal-contraction";
  c.scenario = scenario;
  c.lhs = r.mean;
  c.rhs = 2.0 * k.sup_phi * std::exp(k.int_k_grad) * rho0;
  c.se = r.se;
  c.n_paths = spec.n_paths;
  c.slack = slack_of(tol, c.rhs, c.se, spec.dt());
  c.diagnostics = common;
  c.diagnostics.emplace_back("rho0", rho0);
  c.note = "region: " + k.region;
  c.decide();
  return {adm, sw, t, c};
}

}  // namespace pathflow
