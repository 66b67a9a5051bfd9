#include "pathflow/sde.hpp"

#include "pathflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace pathflow {

double FramedPath::local_time() const {
  double l = 0.0;
  for (double v : dl) l += v;
  return l;
}

CMVector CMVector::linear(const Vec& w, std::size_t steps, double dt) {
  return from_slope([w](double) { return w; }, steps, dt);
}

CMVector CMVector::from_slope(const std::function<Vec(double)>& slope, std::size_t steps,
                              double dt) {
  if (steps == 0 || !(dt > 0.0)) throw ArgumentError("CMVector needs steps > 0 and dt > 0");
  CMVector h;
  h.dt = dt;
  h.hdot.reserve(steps);
  h.h.reserve(steps + 1);
  for (std::size_t k = 0; k < steps; ++k) h.hdot.push_back(slope(static_cast<double>(k) * dt));
  h.h.push_back(Vec::Zero(h.hdot.front().size()));
  for (std::size_t k = 0; k < steps; ++k) h.h.push_back(h.h.back() + h.hdot[k] * dt);
  return h;
}

double CMVector::norm2() const {
  double s = 0.0;
  for (const Vec& v : hdot) s += v.squaredNorm() * dt;
  return s;
}

CMVector CMVector::scaled(double a) const {
  CMVector out = *this;
  for (Vec& v : out.h) v *= a;
  for (Vec& v : out.hdot) v *= a;
  return out;
}

Vec ito_drift(const MetricFlow& flow, double s, const Vec& x) {
  Vec b = flow.drift(s, x);
  if (!flow.spatially_flat()) {
    const Christoffel c = flow.christoffel_symbols(s, x);
    b -= c.trace_with(flow.metric(s, x).inverse());
  }
  return b;
}

namespace {

// Signed g-distance proxy b / |∇b|_g.
double normal_coordinate(const MetricFlow& flow, const LevelSet& b, double s, const Vec& x) {
  const Vec db = b.grad(x);
  const double n = std::sqrt(db.dot(flow.metric(s, x).inverse() * db));
  if (!(n > 0.0)) throw NumericError("degenerate boundary gradient");
  return b.value(x) / n;
}

}  // namespace

ReflectResult reflect_step(const MetricFlow& flow, double s, const Vec& x, const Vec& x_pred,
                           double sigma2, double dt, double u) {
  const LevelSet* b = flow.boundary();
  if (b == nullptr) return {x_pred, 0.0};
  const double a = std::max(0.0, normal_coordinate(flow, *b, s, x));
  const double w = normal_coordinate(flow, *b, s, x_pred) - a;
  // Minimum of a bridge from 0 to w: P(min < m) = exp(-2 m (m - w) / (σ² Δ)).
  const double m = 0.5 * (w - std::sqrt(w * w - 2.0 * sigma2 * dt * std::log(u)));
  const double push = std::max(0.0, -(a + m));
  if (push == 0.0) return {x_pred, 0.0};
  const BoundaryPoint foot = boundary_point(flow, s, x_pred);
  ReflectResult r{x_pred + push * foot.normal, push};
  if (b->value(r.x) < 0.0) {
    // Strongly curved boundary: the push overshot the tangent plane approximation.
    const BoundaryPoint back = boundary_point(flow, s, r.x);
    const Vec gap = back.foot - r.x;
    r.dl += std::sqrt(gap.dot(flow.metric(s, back.foot) * gap));
    r.x = back.foot;
  }
  return r;
}

Mat update_frame(const MetricFlow& flow, double s, double dt, const Vec& x, const Vec& x_next,
                 const Mat& u, bool renormalize) {
  const bool flat = flow.spatially_flat();
  const bool constant = flow.time_constant();
  if (flat && constant) return u;
  Mat v = u;
  const Vec mid = 0.5 * (x + x_next);
  if (!flat) {
    // Subdivide the chord when one Cayley step would rotate too far (large coordinate
    // steps near the edge of a chart).
    const Vec dx = x_next - x;
    const Mat a = flow.christoffel_symbols(s, mid).contract(dx);
    const int pieces = std::min(64, 1 + static_cast<int>(op_norm(a) / 0.02));
    if (pieces == 1) {
      v = cayley(a) * v;
    } else {
      const double h = 1.0 / pieces;
      for (int i = 0; i < pieces; ++i) {
        const Vec y = x + (i + 0.5) * h * dx;
        v = cayley(flow.christoffel_symbols(s, y).contract(h * dx)) * v;
      }
    }
  }
  if (!constant) {
    // For g-orthonormal v, v·G_v = g^{-1} ∂_t g · v, so the correction can use the frame
    // free endomorphism and stays second order.
    const double tm = s + 0.5 * dt;
    const Mat e = flow.metric(tm, mid).ldlt().solve(flow.metric_dt(tm, mid));
    v = cayley(0.5 * dt * e) * v;
  }
  if (renormalize) {
    const Mat g = flow.metric(s + dt, x_next);
    if (!is_spd(g)) throw NumericError("metric lost positive definiteness along the path");
    v = gram_schmidt(v, g);
  }
  return v;
}

Vec InitialLaw::sample(RngKey key) const {
  if (is_point()) return mean;
  const int d = static_cast<int>(mean.size());
  double z[kMaxDim];
  PathRng(key).normals(0, stream::kInitial, z, d);
  Vec x = mean;
  for (int i = 0; i < d; ++i) x(i) += sd * z[i];
  return x;
}

Mat initial_frame(const MetricFlow& flow, const Vec& x0) {
  require_in_chart(flow, 0.0, x0);
  return gram_schmidt(identity(flow.dim()), flow.metric(0.0, x0));
}

FramedPath simulate_path(const MetricFlow& flow, const Vec& x0, const Mat& u0, double T,
                         std::size_t steps, RngKey key, const SimulationOptions& options) {
  const int d = flow.dim();
  if (steps == 0 || !(T > 0.0)) throw ArgumentError("simulate_path needs steps > 0 and T > 0");
  if (T > flow.horizon()) throw ArgumentError("T exceeds the flow horizon");
  if (u0.rows() != d || u0.cols() != d) throw ArgumentError("frame has the wrong shape");
  require_in_chart(flow, 0.0, x0);
  if (const LevelSet* b = flow.boundary(); b != nullptr && b->value(x0) < 0.0)
    throw DomainError("initial point lies outside the domain");

  const double dt = T / static_cast<double>(steps);
  const double sqdt = std::sqrt(dt);
  const double root2 = std::sqrt(2.0);
  const PathRng rng(key);
  const int renorm = std::max(1, options.renorm_every);

  FramedPath p;
  p.dt = dt;
  p.key = key;
  p.times.resize(steps + 1);
  p.x.reserve(steps + 1);
  p.u.reserve(steps + 1);
  p.dB.reserve(steps);
  p.dl.reserve(steps);
  p.hit.reserve(steps);
  p.x.push_back(x0);
  p.u.push_back(u0);
  for (std::size_t k = 0; k <= steps; ++k) p.times[k] = static_cast<double>(k) * dt;

  double z[kMaxDim];
  for (std::size_t k = 0; k < steps; ++k) {
    const double s = p.times[k];
    const Vec& x = p.x[k];
    const Mat& u = p.u[k];
    rng.normals(k, stream::kBrownian, z, d);
    Vec db(d);
    for (int i = 0; i < d; ++i) db(i) = sqdt * z[i];
    const double psi = options.psi ? options.psi->value(s, x) : 1.0;

    Vec step = root2 * psi * (u * db) + psi * psi * ito_drift(flow, s, x) * dt;
    if (options.control) step += root2 * psi * (u * options.control(k, s, x)) * dt;
    Vec x_next = x + step;
    if (!x_next.allFinite() || !flow.in_chart(s + dt, x_next))
      throw TruncationError("path left the chart of flow '" + flow.name() + "'", k);

    double dl = 0.0;
    if (flow.has_boundary()) {
      const ReflectResult r = reflect_step(flow, s, x, x_next, 2.0 * psi * psi, dt,
                                           rng.uniform(k, stream::kBoundary));
      x_next = r.x;
      dl = r.dl;
      if (!flow.in_chart(s + dt, x_next))
        throw TruncationError("reflected path left the chart", k);
    }

    const bool renormalize = (k + 1) % static_cast<std::size_t>(renorm) == 0 || k + 1 == steps;
    p.u.push_back(update_frame(flow, s, dt, x, x_next, u, renormalize));
    p.x.push_back(std::move(x_next));
    p.dB.push_back(std::move(db));
    p.dl.push_back(dl);
    p.hit.push_back(dl > 0.0 ? 1 : 0);
  }
  return p;
}

FramedPath simulate_perturbed(const MetricFlow& flow, const Vec& x0, const Mat& u0,
                              const CMVector& h, double eps, double T, std::size_t steps,
                              RngKey key, const SimulationOptions& options) {
  if (eps == 0.0) return simulate_path(flow, x0, u0, T, steps, key, options);
  if (h.hdot.size() != steps) throw ArgumentError("CMVector grid does not match the path grid");
  SimulationOptions o = options;
  const Control base = options.control;
  o.control = [&h, eps, base](std::size_t k, double s, const Vec& x) {
    Vec c = eps * h.hdot[k];
    if (base) c += base(k, s, x);
    return c;
  };
  return simulate_path(flow, x0, u0, T, steps, key, o);
}

double girsanov_log_weight(const FramedPath& path, const std::vector<Vec>& beta) {
  if (beta.size() != path.steps()) throw ArgumentError("drift grid does not match the path");
  double s = 0.0;
  for (std::size_t k = 0; k < beta.size(); ++k)
    s += beta[k].dot(path.dB[k]) - 0.5 * beta[k].squaredNorm() * path.dt;
  return s;
}

double girsanov_weight(const FramedPath& path, const std::vector<Vec>& beta) {
  return std::exp(girsanov_log_weight(path, beta));
}

void write_path_csv(std::ostream& out, const FramedPath& path) {
  if (path.x.empty()) return;
  const int d = static_cast<int>(path.x.front().size());
  out << "k,s";
  for (int i = 1; i <= d; ++i) out << ",x" << i;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) out << ",u" << i << j;
  for (int i = 1; i <= d; ++i) out << ",dB" << i;
  out << ",dl\n";
  out.precision(17);
  for (std::size_t k = 0; k < path.x.size(); ++k) {
    out << k << ',' << path.times[k];
    for (int i = 0; i < d; ++i) out << ',' << path.x[k](i);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out << ',' << (k < path.u.size() ? path.u[k](i, j) : 0.0);
    for (int i = 0; i < d; ++i) {
      out << ',';
      if (k < path.dB.size()) out << path.dB[k](i);
    }
    out << ',';
    if (k < path.dl.size()) out << path.dl[k];
    out << '\n';
  }
}

}  // namespace pathflow
