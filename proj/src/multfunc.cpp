#include "pathflow/multfunc.hpp"

#include "pathflow/errors.hpp"

#include <cmath>

namespace pathflow {

LiftedForms lift_forms(const MetricFlow& flow, const FramedPath& path) {
  const std::size_t n = path.steps();
  const int d = flow.dim();
  LiftedForms f;
  f.dt = path.dt;
  f.dl = path.dl;
  f.hit = path.hit;
  f.r_u.reserve(n);
  f.ii_u.assign(n + 1, Mat());
  f.p_u.assign(n + 1, Mat());
  // Ric^Z vanishes identically for flat, time-constant flows without drift, but drift is
  // virtual, so always evaluate.
  for (std::size_t k = 0; k < n; ++k) {
    const Mat& u = path.u[k];
    f.r_u.push_back(symmetrize(u.transpose() * ricci_zg(flow, path.times[k], path.x[k]) * u));
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!path.hit[k]) continue;
    const double t = path.times[k + 1];
    const BoundaryPoint bp = boundary_point(flow, t, path.x[k + 1]);
    const Mat g = flow.metric(t, bp.foot);
    const Mat& u = path.u[k + 1];
    const Vec n_u = u.transpose() * g * bp.normal;
    const Mat pi = identity(d) - bp.normal * bp.normal.transpose() * g;
    const Mat piu = pi * u;
    f.p_u[k + 1] = n_u * n_u.transpose() / n_u.squaredNorm();
    f.ii_u[k + 1] = symmetrize(piu.transpose() * bp.second_fundamental * piu);
  }
  return f;
}

std::vector<Mat> step_factors(const LiftedForms& forms, QScheme scheme, double eps) {
  if (scheme == QScheme::Penalized && !(eps > 0.0))
    throw ArgumentError("penalized scheme needs eps > 0");
  const std::size_t n = forms.r_u.size();
  std::vector<Mat> a;
  a.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Mat& r = forms.r_u[k];
    const int d = static_cast<int>(r.rows());
    if (!forms.hit[k]) {
      a.push_back(cayley(r * forms.dt));
      continue;
    }
    const Mat& ii = forms.ii_u[k + 1];
    const Mat& p = forms.p_u[k + 1];
    const double dl = forms.dl[k];
    if (scheme == QScheme::Projected)
      a.push_back(cayley(r * forms.dt + ii * dl) * (identity(d) - p));
    else
      a.push_back(cayley(r * forms.dt) * expm_symmetric_neg((p / eps + ii) * dl));
  }
  return a;
}

const Mat& QFunctional::at(std::size_t k) const {
  if (k < base || k - base >= q.size()) throw ArgumentError("index outside the functional");
  return q[k - base];
}

QFunctional evolve_q(const std::vector<Mat>& factors, std::size_t r, QScheme scheme,
                     double eps) {
  if (r > factors.size()) throw ArgumentError("base index beyond the path");
  QFunctional q;
  q.base = r;
  q.scheme = scheme;
  q.eps = eps;
  q.q.reserve(factors.size() - r + 1);
  const int d = factors.empty() ? 1 : static_cast<int>(factors.front().rows());
  q.q.push_back(identity(d));
  for (std::size_t k = r; k < factors.size(); ++k) q.q.push_back(q.q.back() * factors[k]);
  return q;
}

QFunctional evolve_q_projected(const MetricFlow& flow, const FramedPath& path,
                               const CurvatureBounds& bounds, std::size_t r) {
  QFunctional q = evolve_q(step_factors(lift_forms(flow, path), QScheme::Projected), r);
  attach_bound(q, path, bounds);
  return q;
}

QFunctional evolve_q_penalized(const MetricFlow& flow, const FramedPath& path,
                               const CurvatureBounds& bounds, std::size_t r, double eps) {
  QFunctional q =
      evolve_q(step_factors(lift_forms(flow, path), QScheme::Penalized, eps), r,
               QScheme::Penalized, eps);
  attach_bound(q, path, bounds);
  return q;
}

std::vector<double> norm_bound(const FramedPath& path, const CurvatureBounds& bounds,
                               std::size_t r) {
  if (r > path.steps()) throw ArgumentError("base index beyond the path");
  std::vector<double> out{1.0};
  double exponent = 0.0;
  for (std::size_t j = r; j < path.steps(); ++j) {
    exponent += bounds.K(path.times[j]) * path.dt;
    if (path.dl[j] > 0.0) exponent += bounds.sigma(path.times[j + 1]) * path.dl[j];
    out.push_back(std::exp(-exponent));
  }
  return out;
}

void attach_bound(QFunctional& q, const FramedPath& path, const CurvatureBounds& bounds) {
  const std::vector<double> b = norm_bound(path, bounds, q.base);
  q.bound_margin.resize(q.q.size());
  for (std::size_t j = 0; j < q.q.size(); ++j) q.bound_margin[j] = op_norm(q.q[j]) - b[j];
}

std::size_t count_bound_violations(const QFunctional& q, const FramedPath& path,
                                   const CurvatureBounds& bounds, double slack_per_dt) {
  const std::vector<double> b = norm_bound(path, bounds, q.base);
  const double slack = 1.0 + slack_per_dt * path.dt;
  std::size_t bad = 0;
  for (std::size_t j = 0; j < q.q.size(); ++j)
    if (op_norm(q.q[j]) > b[j] * slack) ++bad;
  return bad;
}

double cocycle_check(const std::vector<Mat>& factors, std::size_t r, std::size_t s,
                     std::size_t t) {
  if (!(r <= s && s <= t && t <= factors.size()))
    throw ArgumentError("cocycle indices must satisfy r <= s <= t <= N");
  const QFunctional from_r = evolve_q(factors, r);
  const QFunctional from_s = evolve_q(factors, s);
  return op_norm(from_r.at(t) - from_r.at(s) * from_s.at(t));
}

}  // namespace pathflow
