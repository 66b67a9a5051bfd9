#include "pathflow/metric_flow.hpp"

#include "pathflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pathflow {

CurvatureBounds CurvatureBounds::constant(double k, double s) {
  return {[k](double) { return k; }, [s](double) { return s; }, Provenance::Analytic};
}

CurvatureBounds CurvatureBounds::from_grid(std::vector<double> t_grid, std::vector<double> k,
                                           std::vector<double> s) {
  auto lookup = [t_grid](const std::vector<double>& v) {
    return [t_grid, v](double t) {
      const auto it = std::upper_bound(t_grid.begin(), t_grid.end(), t);
      if (it == t_grid.begin()) return v.front();
      if (it == t_grid.end()) return v.back();
      const std::size_t hi = static_cast<std::size_t>(it - t_grid.begin());
      if (t_grid[hi - 1] == t) return v[hi - 1];
      return std::min(v[hi - 1], v[hi]);
    };
  };
  return {lookup(k), lookup(s), Provenance::Scanned};
}

MetricFlow::MetricFlow(std::string name, int dim, double horizon)
    : name_(std::move(name)), dim_(dim), horizon_(horizon) {
  if (dim < 1 || dim > kMaxDim) throw ArgumentError("flow dimension must be in 1..4");
  if (!(horizon > 0.0)) throw ArgumentError("flow horizon must be positive");
}

bool MetricFlow::in_chart(double, const Vec& x) const { return x.allFinite(); }

Mat MetricFlow::metric_dt(double t, const Vec& x) const {
  const double h = 1e-5 * (1.0 + std::abs(t));
  return (metric(t + h, x) - metric(t - h, x)) / (2.0 * h);
}

std::array<Mat, kMaxDim> MetricFlow::metric_dx(double t, const Vec& x) const {
  std::array<Mat, kMaxDim> dg{};
  const double h = fd_step(x);
  for (int k = 0; k < dim_; ++k) {
    Vec xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    dg[k] = (metric(t, xp) - metric(t, xm)) / (2.0 * h);
  }
  return dg;
}

Christoffel MetricFlow::christoffel_symbols(double t, const Vec& x) const {
  const auto dg = metric_dx(t, x);
  const Mat ginv = metric(t, x).inverse();
  Christoffel c = Christoffel::zero(dim_);
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j <= i; ++j) {
      // Lowered symbol Γ_{ij,l} = (∂_i g_jl + ∂_j g_il - ∂_l g_ij) / 2.
      Vec lowered(dim_);
      for (int l = 0; l < dim_; ++l)
        lowered(l) = 0.5 * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
      const Vec raised = ginv * lowered;
      for (int k = 0; k < dim_; ++k) c.upper[k](i, j) = c.upper[k](j, i) = raised(k);
    }
  }
  return c;
}

Mat MetricFlow::ricci(double t, const Vec& x) const {
  const int d = dim_;
  const double h = fd_step(x);
  const Christoffel c = christoffel_symbols(t, x);
  // dc[m].upper[k](i, j) = ∂_m Γ^k_ij
  std::array<Christoffel, kMaxDim> dc{};
  for (int m = 0; m < d; ++m) {
    Vec xp = x, xm = x;
    xp(m) += h;
    xm(m) -= h;
    const Christoffel cp = christoffel_symbols(t, xp);
    const Christoffel cm = christoffel_symbols(t, xm);
    dc[m] = Christoffel::zero(d);
    for (int k = 0; k < d; ++k) dc[m].upper[k] = (cp.upper[k] - cm.upper[k]) / (2.0 * h);
  }
  Mat r = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        s += dc[k].upper[k](i, j) - dc[j].upper[k](i, k);
        for (int l = 0; l < d; ++l)
          s += c.upper[k](k, l) * c.upper[l](i, j) - c.upper[k](j, l) * c.upper[l](i, k);
      }
      r(i, j) = s;
    }
  }
  return symmetrize(r);
}

Vec MetricFlow::drift(double, const Vec&) const { return Vec::Zero(dim_); }

Mat MetricFlow::drift_jacobian(double t, const Vec& x) const {
  const double h = fd_step(x);
  Mat j(dim_, dim_);
  for (int c = 0; c < dim_; ++c) {
    Vec xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    j.col(c) = (drift(t, xp) - drift(t, xm)) / (2.0 * h);
  }
  return j;
}

void require_in_chart(const MetricFlow& flow, double t, const Vec& x) {
  if (x.size() != flow.dim() || !flow.in_chart(t, x))
    throw DomainError("point outside the chart of flow '" + flow.name() + "'");
}

Christoffel christoffel(const MetricFlow& flow, double t, const Vec& x) {
  require_in_chart(flow, t, x);
  if (flow.spatially_flat()) return Christoffel::zero(flow.dim());
  return flow.christoffel_symbols(t, x);
}

Mat drift_cov_deriv(const MetricFlow& flow, double t, const Vec& x) {
  require_in_chart(flow, t, x);
  Mat a = flow.drift_jacobian(t, x);
  if (!flow.spatially_flat()) {
    const Christoffel c = flow.christoffel_symbols(t, x);
    const Vec z = flow.drift(t, x);
    // (∇_j Z)^i gains Γ^i_{jk} Z^k.
    a += c.contract(z);
  }
  return a;
}

Mat ricci_zg(const MetricFlow& flow, double t, const Vec& x) {
  require_in_chart(flow, t, x);
  const Mat g = flow.metric(t, x);
  const Mat nabla_z = drift_cov_deriv(flow, t, x);
  // <∇_X Z, Y> = Y^T g A X, so the bilinear form is g A, symmetrized.
  Mat r = symmetrize(g * nabla_z);
  Mat out = -r - 0.5 * flow.metric_dt(t, x);
  if (!flow.spatially_flat()) out += flow.ricci(t, x);
  return symmetrize(out);
}

BoundaryPoint boundary_point(const MetricFlow& flow, double t, const Vec& x) {
  const LevelSet* b = flow.boundary();
  if (b == nullptr) throw ArgumentError("flow '" + flow.name() + "' has no boundary");
  Vec y = x;
  for (int it = 0; it < 60; ++it) {
    const double v = b->value(y);
    if (std::abs(v) < 1e-14) break;
    const Vec grad = b->grad(y);
    const double n2 = grad.squaredNorm();
    if (!(n2 > 0.0)) throw NumericError("degenerate boundary gradient", std::abs(v));
    y -= v / n2 * grad;
  }
  const double residual = std::abs(b->value(y));
  if (residual > 1e-10) throw NumericError("boundary projection did not converge", residual);
  const Mat g = flow.metric(t, y);
  const Vec db = b->grad(y);
  const Vec raised = g.inverse() * db;
  const double norm = std::sqrt(db.dot(raised));
  Mat hess = b->hess(y);
  if (!flow.spatially_flat()) {
    const Christoffel c = flow.christoffel_symbols(t, y);
    for (int k = 0; k < flow.dim(); ++k) hess -= c.upper[k] * db(k);
  }
  BoundaryPoint bp;
  bp.foot = y;
  bp.normal = raised / norm;
  bp.second_fundamental = symmetrize(-hess / norm);
  bp.grad_norm = norm;
  return bp;
}

double min_second_fundamental(const MetricFlow& flow, double t, const BoundaryPoint& bp) {
  const int d = flow.dim();
  if (d == 1) return std::numeric_limits<double>::infinity();
  const Mat g = flow.metric(t, bp.foot);
  // g-orthonormal basis of the tangent space: Gram-Schmidt on (N, e_1, ..., e_d), keeping
  // the d - 1 vectors after N that survive.
  std::vector<Vec> basis{bp.normal};
  for (int i = 0; i < d && static_cast<int>(basis.size()) < d; ++i) {
    Vec v = Vec::Unit(d, i);
    for (const Vec& e : basis) v -= e * e.dot(g * v);
    const double n = std::sqrt(v.dot(g * v));
    if (n > 1e-8) basis.push_back(v / n);
  }
  Mat tangent(d, d - 1);
  for (int i = 1; i < d; ++i) tangent.col(i - 1) = basis[static_cast<std::size_t>(i)];
  const Mat form = symmetrize(tangent.transpose() * bp.second_fundamental * tangent);
  if (d - 1 == 1) return form(0, 0);
  Eigen::SelfAdjointEigenSolver<Mat> es(form, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

CurvatureBounds scan_bounds(const MetricFlow& flow, const std::vector<double>& t_grid,
                            const std::vector<Vec>& samples,
                            const std::vector<Vec>& boundary_samples) {
  if (t_grid.empty() || samples.empty()) throw ArgumentError("scan_bounds needs samples");
  std::vector<double> k(t_grid.size()), s(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    double kmin = std::numeric_limits<double>::infinity();
    for (const Vec& x : samples)
      kmin = std::min(kmin, min_generalized_eigenvalue(ricci_zg(flow, t, x), flow.metric(t, x)));
    double smin = std::numeric_limits<double>::infinity();
    for (const Vec& x : boundary_samples)
      smin = std::min(smin, min_second_fundamental(flow, t, boundary_point(flow, t, x)));
    k[i] = kmin;
    // No tangent directions (d = 1) or no boundary: II imposes nothing.
    s[i] = std::isfinite(smin) ? smin : 0.0;
  }
  return CurvatureBounds::from_grid(t_grid, std::move(k), std::move(s));
}

}  // namespace pathflow
