#include "pathflow/malliavin.hpp"

#include "pathflow/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pathflow {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kEntropyFloor = 1e-12;

VectorEstimate reduce_vectors(const std::vector<Vec>& rows) {
  const int d = static_cast<int>(rows.front().size());
  VectorEstimate out{Vec(d), Vec(d)};
  std::vector<double> col(rows.size());
  for (int j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i](j);
    const Estimate e = mc_reduce(col);
    out.mean(j) = e.mean;
    out.se(j) = e.se;
  }
  return out;
}

Estimate reduce(const std::vector<double>& v) { return mc_reduce(v); }

// Frame coordinates at (0, x0) to a coordinate differential: d = g u e.
Vec frame_to_differential(const MetricFlow& flow, const Vec& x0, const Mat& u0, const Vec& e) {
  return flow.metric(0.0, x0) * (u0 * e);
}

}  // namespace

CylFunc::CylFunc(std::vector<double> times, Value f, Differential df)
    : times_(std::move(times)), f_(std::move(f)), df_(std::move(df)) {
  if (times_.empty()) throw ArgumentError("cylindrical functional needs at least one slot");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (times_[i] < 0.0) throw ArgumentError("slot times must be nonnegative");
    if (i > 0 && !(times_[i] > times_[i - 1])) throw ArgumentError("slot times must increase");
  }
  if (!f_) throw ArgumentError("cylindrical functional needs an evaluator");
}

CylFunc CylFunc::constant(double c, double t) {
  return {{t}, [c](std::span<const Vec>) { return c; },
          [](std::span<const Vec> p, std::span<Vec> out) { out[0] = Vec::Zero(p[0].size()); }};
}

CylFunc CylFunc::linear(const Vec& v, double t) {
  return {{t}, [v](std::span<const Vec> p) { return v.dot(p[0]); },
          [v](std::span<const Vec>, std::span<Vec> out) { out[0] = v; }};
}

CylFunc CylFunc::exp_linear(const Vec& v, double a, double t) {
  return {{t}, [v, a](std::span<const Vec> p) { return std::exp(a * v.dot(p[0])); },
          [v, a](std::span<const Vec> p, std::span<Vec> out) {
            out[0] = a * std::exp(a * v.dot(p[0])) * v;
          }};
}

CylFunc CylFunc::product(const Vec& v, double s, const Vec& w, double t) {
  return {{s, t}, [v, w](std::span<const Vec> p) { return v.dot(p[0]) * w.dot(p[1]); },
          [v, w](std::span<const Vec> p, std::span<Vec> out) {
            out[0] = w.dot(p[1]) * v;
            out[1] = v.dot(p[0]) * w;
          }};
}

CylFunc CylFunc::terminal(std::function<double(const Vec&)> f, std::function<Vec(const Vec&)> df,
                          double t) {
  Differential d;
  if (df) d = [df](std::span<const Vec> p, std::span<Vec> out) { out[0] = df(p[0]); };
  return {{t}, [f](std::span<const Vec> p) { return f(p[0]); }, d};
}

std::vector<Vec> CylFunc::finite_difference_differential(std::span<const Vec> points) const {
  std::vector<Vec> out;
  std::vector<Vec> p(points.begin(), points.end());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int d = static_cast<int>(p[i].size());
    Vec g(d);
    const double h = fd_step(p[i]);
    for (int j = 0; j < d; ++j) {
      const double keep = p[i](j);
      p[i](j) = keep + h;
      const double up = f_(p);
      p[i](j) = keep - h;
      const double down = f_(p);
      p[i](j) = keep;
      g(j) = (up - down) / (2.0 * h);
    }
    out.push_back(g);
  }
  return out;
}

std::vector<Vec> CylFunc::differential(std::span<const Vec> points) const {
  if (!df_) return finite_difference_differential(points);
  std::vector<Vec> out(points.size());
  df_(points, out);
  return out;
}

std::vector<std::size_t> CylFunc::slot_indices(const FramedPath& path) const {
  std::vector<std::size_t> idx;
  for (double t : times_) {
    const double k = t / path.dt;
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-9 * std::max(1.0, k))
      throw ArgumentError("slot time " + std::to_string(t) + " is not on the grid");
    if (r > static_cast<double>(path.steps())) throw ArgumentError("slot time beyond the path");
    idx.push_back(static_cast<std::size_t>(r));
  }
  return idx;
}

std::vector<Vec> CylFunc::points(const FramedPath& path) const {
  std::vector<Vec> p;
  for (std::size_t k : slot_indices(path)) p.push_back(path.x[k]);
  return p;
}

double CylFunc::eval(const FramedPath& path) const { return f_(points(path)); }

CylFunc CylFunc::compose(std::function<double(double)> phi,
                         std::function<double(double)> dphi) const {
  const CylFunc inner = *this;
  return {times_, [inner, phi](std::span<const Vec> p) { return phi(inner(p)); },
          [inner, dphi](std::span<const Vec> p, std::span<Vec> out) {
            const double s = dphi(inner(p));
            const std::vector<Vec> g = inner.differential(p);
            for (std::size_t i = 0; i < g.size(); ++i) out[i] = s * g[i];
          }};
}

double DampedGradient::h0_norm2() const {
  double s = 0.0;
  for (const Vec& v : d) s += v.squaredNorm() * dt;
  return s;
}

namespace {

// Slot terms u^{-1} ∇_i f = uᵀ df_i gathered by grid index.
std::vector<Vec> slot_terms(const CylFunc& f, const FramedPath& path) {
  const auto idx = f.slot_indices(path);
  std::vector<Vec> pts;
  for (std::size_t k : idx) pts.push_back(path.x[k]);
  const std::vector<Vec> df = f.differential(pts);
  const int d = static_cast<int>(path.x.front().size());
  std::vector<Vec> add(path.x.size(), Vec::Zero(d));
  for (std::size_t i = 0; i < idx.size(); ++i) add[idx[i]] += path.u[idx[i]].transpose() * df[i];
  return add;
}

}  // namespace

DampedGradient damped_gradient(const CylFunc& f, const FramedPath& path,
                               const std::vector<Mat>& factors) {
  const std::size_t n = path.steps();
  if (factors.size() != n) throw ArgumentError("step factors do not match the path");
  const std::vector<Vec> add = slot_terms(f, path);
  DampedGradient g;
  g.dt = path.dt;
  g.d.resize(n);
  Vec v = Vec::Zero(add.front().size());
  for (std::size_t k = n; k-- > 0;) {
    v = factors[k] * (v + add[k + 1]);
    g.d[k] = v;
  }
  g.initial = (n > 0 ? g.d[0] : Vec::Zero(v.size())) + add[0];
  return g;
}

DampedGradient damped_gradient(const MetricFlow& flow, const CylFunc& f, const FramedPath& path) {
  return damped_gradient(f, path, step_factors(lift_forms(flow, path), QScheme::Projected));
}

DampedGradient damped_gradient_fresh(const CylFunc& f, const FramedPath& path,
                                     const std::vector<Mat>& factors) {
  const std::size_t n = path.steps();
  if (factors.size() != n) throw ArgumentError("step factors do not match the path");
  const std::vector<Vec> add = slot_terms(f, path);
  DampedGradient g;
  g.dt = path.dt;
  g.d.assign(n, Vec::Zero(add.front().size()));
  for (std::size_t k = 0; k < n; ++k) {
    const QFunctional q = evolve_q(factors, k);
    for (std::size_t j = k + 1; j <= n; ++j)
      if (add[j].squaredNorm() > 0.0) g.d[k] += q.at(j) * add[j];
  }
  g.initial = (n > 0 ? g.d[0] : Vec::Zero(add.front().size())) + add[0];
  return g;
}

double directional_derivative(const DampedGradient& g, const CMVector& h) {
  if (h.hdot.size() != g.d.size()) throw ArgumentError("CMVector grid does not match the path");
  double s = 0.0;
  for (std::size_t k = 0; k < g.d.size(); ++k) s += g.d[k].dot(h.hdot[k]);
  return s * g.dt;
}

FramedPath ensemble_path(const MetricFlow& flow, const InitialLaw& law, const EnsembleSpec& spec,
                         std::size_t i) {
  const Vec x0 = law.sample(spec.key(i));
  return simulate_path(flow, x0, initial_frame(flow, x0), spec.T, spec.steps, spec.key(i),
                       spec.sim);
}

IbpReport ibp_three_way(const MetricFlow& flow, const Vec& x0, const CylFunc& f,
                        const CMVector& h, std::vector<double> eps_list,
                        const EnsembleSpec& spec) {
  if (eps_list.empty()) throw ArgumentError("ibp_three_way needs at least one eps");
  for (double e : eps_list)
    if (!(e > 0.0)) throw ArgumentError("eps values must be positive");
  std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
  const Mat u0 = initial_frame(flow, x0);
  struct Row {
    double a, b, c;
  };
  const auto rows = map_paths<Row>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const FramedPath p = simulate_path(flow, x0, u0, spec.T, spec.steps, spec.key(i), spec.sim);
    const double fx = f.eval(p);
    std::vector<double> central;
    for (double e : eps_list) {
      const double up =
          f.eval(simulate_perturbed(flow, x0, u0, h, e, spec.T, spec.steps, spec.key(i), spec.sim));
      const double down = f.eval(
          simulate_perturbed(flow, x0, u0, h, -e, spec.T, spec.steps, spec.key(i), spec.sim));
      central.push_back((up - down) / (2.0 * e));
    }
    double a = central.back();
    if (central.size() >= 2) {
      // Central differences carry an ε² error; pair the two smallest ε to cancel it.
      const double e1 = eps_list[eps_list.size() - 2], e2 = eps_list.back();
      const double c1 = central[central.size() - 2], c2 = central.back();
      a = (e1 * e1 * c2 - e2 * e2 * c1) / (e1 * e1 - e2 * e2);
    }
    const double b = kSqrt2 * directional_derivative(damped_gradient(flow, f, p), h);
    double noise = 0.0;
    for (std::size_t k = 0; k < p.steps(); ++k) noise += h.hdot[k].dot(p.dB[k]);
    return Row{a, b, fx * noise};
  });
  std::vector<double> a, b, c, ab, ac, bc;
  for (const Row& r : rows) {
    a.push_back(r.a);
    b.push_back(r.b);
    c.push_back(r.c);
    ab.push_back(r.a - r.b);
    ac.push_back(r.a - r.c);
    bc.push_back(r.b - r.c);
  }
  IbpReport rep;
  rep.flow_fd = reduce(a);
  rep.pairing = reduce(b);
  rep.girsanov = reduce(c);
  rep.gap_fd_pairing = reduce(ab);
  rep.gap_fd_girsanov = reduce(ac);
  rep.gap_pairing_girsanov = reduce(bc);
  rep.c_delta = (spec.dt() + eps_list.back()) * std::max(1.0, std::abs(rep.pairing.mean));
  auto ok = [&](const Estimate& g) { return std::abs(g.mean) <= 3.0 * g.se + rep.c_delta; };
  rep.pass = ok(rep.gap_fd_pairing) && ok(rep.gap_fd_girsanov) && ok(rep.gap_pairing_girsanov);
  return rep;
}

std::vector<double> linear_schedule(std::size_t steps) {
  std::vector<double> xi(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    xi[k] = static_cast<double>(k) / static_cast<double>(steps);
  return xi;
}

BelReport bel_gradient(const MetricFlow& flow, const Vec& x0,
                       const std::function<double(const Vec&)>& f,
                       const std::function<Vec(const Vec&)>& df, const std::vector<double>& xi,
                       const EnsembleSpec& spec) {
  if (xi.size() != spec.steps + 1) throw ArgumentError("weight schedule does not match the grid");
  if (std::abs(xi.front()) > 1e-12 || std::abs(xi.back() - 1.0) > 1e-12)
    throw ArgumentError("weight schedule must satisfy xi(0) = 0 and xi(T) = 1");
  const Mat u0 = initial_frame(flow, x0);
  const double f0 = f(x0);
  struct Row {
    Vec w, p;
  };
  const auto rows = map_paths<Row>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const FramedPath path =
        simulate_path(flow, x0, u0, spec.T, spec.steps, spec.key(i), spec.sim);
    const auto a = step_factors(lift_forms(flow, path), QScheme::Projected);
    const int d = flow.dim();
    Mat q = identity(d);
    Vec acc = Vec::Zero(d);
    for (std::size_t k = 0; k < path.steps(); ++k) {
      const double slope = (xi[k + 1] - xi[k]) / path.dt;
      acc += slope * (q * path.dB[k]);
      q = q * a[k];
    }
    const Vec& xt = path.x.back();
    // f(x0) is a constant control variate: E Σ ξ' Q dB = 0.
    const Vec weighted = (f(xt) - f0) / kSqrt2 * acc;
    const Vec plain = q * (path.u.back().transpose() * df(xt));
    return Row{frame_to_differential(flow, x0, u0, weighted),
               frame_to_differential(flow, x0, u0, plain)};
  });
  std::vector<Vec> w, p, gap;
  for (const Row& r : rows) {
    w.push_back(r.w);
    p.push_back(r.p);
    gap.push_back(r.w - r.p);
  }
  BelReport rep;
  rep.weighted = reduce_vectors(w);
  rep.plain = reduce_vectors(p);
  const VectorEstimate g = reduce_vectors(gap);
  rep.gap_se = g.se;
  rep.agree = ((g.mean.array().abs() <= 3.0 * g.se.array() + 1e-12)).all();
  return rep;
}

GradientCheckReport gradient_formula_check(const MetricFlow& flow, const Vec& x0,
                                           const CylFunc& f, double delta,
                                           const EnsembleSpec& spec) {
  if (!(delta > 0.0)) throw ArgumentError("finite-difference step must be positive");
  const int d = flow.dim();
  const Mat u0 = initial_frame(flow, x0);
  std::vector<Vec> lo(d), hi(d);
  std::vector<Mat> u_lo(d), u_hi(d);
  for (int j = 0; j < d; ++j) {
    lo[j] = x0;
    hi[j] = x0;
    lo[j](j) -= delta;
    hi[j](j) += delta;
    u_lo[j] = initial_frame(flow, lo[j]);
    u_hi[j] = initial_frame(flow, hi[j]);
  }
  struct Row {
    Vec fd, formula;
  };
  const auto rows = map_paths<Row>(spec.n_paths, spec.exec, [&](std::size_t i) {
    Vec fd(d);
    for (int j = 0; j < d; ++j) {
      const double up =
          f.eval(simulate_path(flow, hi[j], u_hi[j], spec.T, spec.steps, spec.key(i), spec.sim));
      const double down =
          f.eval(simulate_path(flow, lo[j], u_lo[j], spec.T, spec.steps, spec.key(i), spec.sim));
      fd(j) = (up - down) / (2.0 * delta);
    }
    const FramedPath p = simulate_path(flow, x0, u0, spec.T, spec.steps, spec.key(i), spec.sim);
    const DampedGradient g = damped_gradient(flow, f, p);
    return Row{fd, frame_to_differential(flow, x0, u0, g.initial)};
  });
  std::vector<Vec> fd, formula, gap;
  for (const Row& r : rows) {
    fd.push_back(r.fd);
    formula.push_back(r.formula);
    gap.push_back(r.fd - r.formula);
  }
  GradientCheckReport rep;
  rep.finite_difference = reduce_vectors(fd);
  rep.formula = reduce_vectors(formula);
  const VectorEstimate g = reduce_vectors(gap);
  const double scale = rep.formula.mean.norm();
  rep.relative_error = scale > 0.0 ? g.mean.norm() / scale : g.mean.norm();
  const bool within_se = (g.mean.array().abs() <= 3.0 * g.se.array() + 1e-12).all();
  rep.pass = rep.relative_error <= 0.05 || within_se;
  return rep;
}

namespace {

// Monomials of degree 1..degree in x (the constant column is added by the caller).
void monomials(const Vec& x, int degree, std::vector<double>& out) {
  const int d = static_cast<int>(x.size());
  for (int i = 0; i < d; ++i) out.push_back(x(i));
  if (degree >= 2)
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) out.push_back(x(i) * x(j));
  if (degree >= 3)
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j)
        for (int l = j; l < d; ++l) out.push_back(x(i) * x(j) * x(l));
}

}  // namespace

ClarkOconeReport clark_ocone(const MetricFlow& flow, const Vec& x0, const CylFunc& f,
                             const EnsembleSpec& spec, int degree, double tolerance) {
  if (degree < 1 || degree > 3) throw ArgumentError("regression degree must be 1, 2 or 3");
  const std::size_t n = spec.n_paths;
  const std::size_t steps = spec.steps;
  const int d = flow.dim();
  const Mat u0 = initial_frame(flow, x0);
  struct Row {
    double f;
    std::vector<Vec> x, dB, dprime;
  };
  const auto rows = map_paths<Row>(n, spec.exec, [&](std::size_t i) {
    FramedPath p = simulate_path(flow, x0, u0, spec.T, steps, spec.key(i), spec.sim);
    DampedGradient g = damped_gradient(flow, f, p);
    return Row{f.eval(p), std::move(p.x), std::move(p.dB), std::move(g.d)};
  });
  // Slot indices are the same for every path.
  FramedPath grid;
  grid.dt = spec.dt();
  grid.dB.resize(steps);
  const auto slots = f.slot_indices(grid);

  std::vector<std::vector<Vec>> phi(n, std::vector<Vec>(steps));
  std::vector<Vec> mean_phi(steps, Vec::Zero(d));
  for_each_path(steps, spec.exec, [&](std::size_t k) {
    std::vector<double> feats;
    auto features = [&](const Row& r) {
      feats.clear();
      feats.push_back(1.0);
      monomials(r.x[k], degree, feats);
      for (std::size_t s : slots)
        if (s <= k && s > 0)
          for (int j = 0; j < d; ++j) feats.push_back(r.x[s](j));
    };
    features(rows[0]);
    const std::size_t cols = feats.size();
    if (cols >= n) throw NumericError("regression basis is not smaller than the ensemble");
    Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), d);
    for (std::size_t i = 0; i < n; ++i) {
      features(rows[i]);
      for (std::size_t c = 0; c < cols; ++c) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = feats[c];
      for (int j = 0; j < d; ++j) y(static_cast<Eigen::Index>(i), j) = rows[i].dprime[k](j);
    }
    // Columns can be collinear (at k = 0 every path sits at x0); the complete orthogonal
    // decomposition returns the minimum-norm least-squares fit in that case.
    const Eigen::MatrixXd coef = a.completeOrthogonalDecomposition().solve(y);
    const Eigen::MatrixXd fit = a * coef;
    Vec m = Vec::Zero(d);
    for (std::size_t i = 0; i < n; ++i) {
      Vec v(d);
      for (int j = 0; j < d; ++j) v(j) = kSqrt2 * fit(static_cast<Eigen::Index>(i), j);
      phi[i][k] = v;
      m += v;
    }
    mean_phi[k] = m / static_cast<double>(n);
  });

  std::vector<double> fv(n), energy(n);
  for (std::size_t i = 0; i < n; ++i) {
    fv[i] = rows[i].f;
    double e = 0.0;
    for (std::size_t k = 0; k < steps; ++k) e += phi[i][k].squaredNorm() * spec.dt();
    energy[i] = e;
  }
  ClarkOconeReport rep;
  const Estimate fe = reduce(fv);
  rep.mean_f = fe.mean;
  rep.var_f = fe.se * fe.se * static_cast<double>(n);
  rep.isometry = reduce(energy).mean;
  std::vector<double> resid2(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = rows[i].f - rep.mean_f;
    for (std::size_t k = 0; k < steps; ++k) r -= phi[i][k].dot(rows[i].dB[k]);
    resid2[i] = r * r;
  }
  rep.residual_var = reduce(resid2).mean;
  rep.residual_ratio = rep.var_f > 0.0 ? rep.residual_var / rep.var_f : 0.0;
  rep.mean_integrand = std::move(mean_phi);
  rep.pass = rep.residual_ratio <= tolerance;
  return rep;
}

LsiReport dirichlet_and_lsi(const MetricFlow& flow, const InitialLaw& law, const CylFunc& f,
                            const EnsembleSpec& spec) {
  const bool free_path = !law.is_point();
  struct Row {
    double f2, form;
    bool floored;
  };
  const auto rows = map_paths<Row>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const FramedPath p = ensemble_path(flow, law, spec, i);
    const DampedGradient g = damped_gradient(flow, f, p);
    const double v = f.eval(p);
    const double raw = v * v;
    double form = 2.0 * g.h0_norm2();
    if (free_path) form += g.initial.squaredNorm();
    return Row{std::max(raw, kEntropyFloor), form, raw < kEntropyFloor};
  });
  const std::size_t n = rows.size();
  std::vector<double> f2(n), form(n);
  LsiReport rep;
  for (std::size_t i = 0; i < n; ++i) {
    f2[i] = rows[i].f2;
    form[i] = rows[i].form;
    rep.floored += rows[i].floored ? 1 : 0;
  }
  rep.constant = free_path ? std::max(2.0, law.lsi_constant()) : 2.0;
  const double m = pairwise_sum(f2) / static_cast<double>(n);
  std::vector<double> a(n), infl(n), margin_infl(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = f2[i] * std::log(f2[i]);
  const double ent = pairwise_sum(a) / static_cast<double>(n) - m * std::log(m);
  for (std::size_t i = 0; i < n; ++i) {
    infl[i] = a[i] - (std::log(m) + 1.0) * f2[i];
    margin_infl[i] = rep.constant * form[i] - infl[i];
  }
  rep.entropy = delta_estimate(ent, infl);
  rep.form = reduce(form);
  rep.margin = delta_estimate(rep.constant * rep.form.mean - ent, margin_infl);
  const auto [lo, hi] = std::minmax_element(f2.begin(), f2.end());
  rep.degenerate = *hi - *lo <= 1e-14 * std::max(1.0, *hi);
  rep.pass = rep.degenerate || rep.margin.mean >= -3.0 * rep.margin.se;
  return rep;
}

MartingaleReport martingale_check(const MetricFlow& flow, const Vec& x0,
                                  const std::function<Vec(double, const Vec&)>& grad_p,
                                  const std::vector<std::size_t>& indices,
                                  const EnsembleSpec& spec) {
  if (indices.size() < 2) throw ArgumentError("martingale check needs at least two times");
  for (std::size_t k : indices)
    if (k > spec.steps) throw ArgumentError("martingale index beyond the grid");
  const Mat u0 = initial_frame(flow, x0);
  const auto rows = map_paths<std::vector<Vec>>(spec.n_paths, spec.exec, [&](std::size_t i) {
    const FramedPath p = simulate_path(flow, x0, u0, spec.T, spec.steps, spec.key(i), spec.sim);
    const QFunctional q =
        evolve_q(step_factors(lift_forms(flow, p), QScheme::Projected), 0);
    std::vector<Vec> out;
    for (std::size_t k : indices)
      out.push_back(q.at(k) * (p.u[k].transpose() * grad_p(p.times[k], p.x[k])));
    return out;
  });
  MartingaleReport rep;
  rep.indices = indices;
  std::vector<Vec> col(rows.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][j];
    rep.values.push_back(reduce_vectors(col));
  }
  for (std::size_t a = 0; a < indices.size(); ++a)
    for (std::size_t b = a + 1; b < indices.size(); ++b) {
      for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][a] - rows[i][b];
      const VectorEstimate g = reduce_vectors(col);
      const double scale = std::max({1.0, rep.values[a].mean.norm(), rep.values[b].mean.norm()});
      for (int c = 0; c < g.mean.size(); ++c) {
        const double allowed = 3.0 * g.se(c) + spec.dt() * scale;
        rep.worst_ratio = std::max(rep.worst_ratio, std::abs(g.mean(c)) / allowed);
      }
    }
  rep.pass = rep.worst_ratio <= 1.0;
  return rep;
}

}  // namespace pathflow
