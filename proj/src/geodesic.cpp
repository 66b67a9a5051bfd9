#include "pathflow/geodesic.hpp"

#include "pathflow/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pathflow {

namespace {

struct State {
  Vec pos;
  Vec vel;
  Mat frame;  // vectors being transported, one per column
};

State derivative(const MetricFlow& flow, double t, const State& s, bool with_frame) {
  const Christoffel c = flow.christoffel_symbols(t, s.pos);
  const Mat a = c.contract(s.vel);  // a(k, j) = Γ^k_ij v^i
  State d;
  d.pos = s.vel;
  d.vel = -a * s.vel;
  if (with_frame) d.frame = -a * s.frame;
  return d;
}

State axpy(const State& s, double h, const State& d, bool with_frame) {
  State out;
  out.pos = s.pos + h * d.pos;
  out.vel = s.vel + h * d.vel;
  if (with_frame) out.frame = s.frame + h * d.frame;
  return out;
}

}  // namespace

Vec shoot(const MetricFlow& flow, double t, const Vec& x, const Vec& v, int substeps,
          Mat* transport) {
  const bool with_frame = transport != nullptr;
  State s{x, v, with_frame ? identity(flow.dim()) : Mat()};
  const double h = 1.0 / substeps;
  for (int i = 0; i < substeps; ++i) {
    if (!flow.in_chart(t, s.pos)) throw NumericError("geodesic left the chart", s.pos.norm());
    const State k1 = derivative(flow, t, s, with_frame);
    const State k2 = derivative(flow, t, axpy(s, 0.5 * h, k1, with_frame), with_frame);
    const State k3 = derivative(flow, t, axpy(s, 0.5 * h, k2, with_frame), with_frame);
    const State k4 = derivative(flow, t, axpy(s, h, k3, with_frame), with_frame);
    s.pos += h / 6.0 * (k1.pos + 2.0 * k2.pos + 2.0 * k3.pos + k4.pos);
    s.vel += h / 6.0 * (k1.vel + 2.0 * k2.vel + 2.0 * k3.vel + k4.vel);
    if (with_frame) s.frame += h / 6.0 * (k1.frame + 2.0 * k2.frame + 2.0 * k3.frame + k4.frame);
  }
  if (with_frame) *transport = s.frame;
  return s.pos;
}

namespace {

Vec shoot_with_velocity(const MetricFlow& flow, double t, const Vec& x, const Vec& v,
                        int substeps, Vec& end_velocity) {
  State s{x, v, Mat()};
  const double h = 1.0 / substeps;
  for (int i = 0; i < substeps; ++i) {
    const State k1 = derivative(flow, t, s, false);
    const State k2 = derivative(flow, t, axpy(s, 0.5 * h, k1, false), false);
    const State k3 = derivative(flow, t, axpy(s, 0.5 * h, k2, false), false);
    const State k4 = derivative(flow, t, axpy(s, h, k3, false), false);
    s.pos += h / 6.0 * (k1.pos + 2.0 * k2.pos + 2.0 * k3.pos + k4.pos);
    s.vel += h / 6.0 * (k1.vel + 2.0 * k2.vel + 2.0 * k3.vel + k4.vel);
  }
  end_velocity = s.vel;
  return s.pos;
}

GeodesicResult geodesic_and_transport_impl(const MetricFlow& flow, double t, const Vec& x,
                                           const Vec& y, const Vec* guess,
                                           const GeodesicOptions& options, bool reverse_pass) {
  require_in_chart(flow, t, x);
  require_in_chart(flow, t, y);
  const int d = flow.dim();
  GeodesicResult r;
  if (flow.spatially_flat()) {
    r.velocity = y - x;
    r.transport = identity(d);
    const auto closed = flow.closed_form_distance(t, x, y);
    r.distance = closed ? *closed : std::sqrt(r.velocity.dot(flow.metric(t, x) * r.velocity));
    return r;
  }
  if ((x - y).norm() == 0.0) {
    r.velocity = Vec::Zero(d);
    r.transport = identity(d);
    return r;
  }

  auto solve = [&](const Vec& target, Vec& v, int& iterations) {
    const double scale = 1.0 + target.norm();
    auto residual_of = [&](const Vec& vel) {
      return Vec(shoot(flow, t, x, vel, options.substeps) - target);
    };
    Vec f = residual_of(v);
    double err = f.norm();
    for (iterations = 0; iterations < options.max_iterations && err > options.tolerance * scale;
         ++iterations) {
      Mat jac(d, d);
      const double h = 1e-7 * (1.0 + v.norm());
      for (int j = 0; j < d; ++j) {
        Vec vp = v, vm = v;
        vp(j) += h;
        vm(j) -= h;
        jac.col(j) = (residual_of(vp) - residual_of(vm)) / (2.0 * h);
      }
      const Vec step = jac.partialPivLu().solve(f);
      // Backtracking keeps Newton stable when the initial guess is poor.
      double lambda = 1.0;
      Vec trial_v, trial_f;
      double trial_err = INFINITY;
      for (int back = 0; back < 20; ++back) {
        trial_v = v - lambda * step;
        try {
          trial_f = residual_of(trial_v);
          trial_err = trial_f.norm();
        } catch (const NumericError&) {
          trial_err = INFINITY;
        }
        if (trial_err < err) break;
        lambda *= 0.5;
      }
      if (!(trial_err < err)) break;
      v = trial_v;
      f = trial_f;
      err = trial_err;
    }
    return err <= options.tolerance * scale ? 0.0 : err;
  };

  Vec v;
  int it = 0;
  double err = INFINITY;
  if (guess) {
    v = *guess;
    err = solve(y, v, it);
  }
  if (err != 0.0) {
    // Continuation along the chart segment from x to y: each intermediate target is close
    // to the previous one, so Newton follows the minimal branch instead of jumping to a
    // longer geodesic through the same end points.
    const Vec delta = y - x;
    const double rough = delta.norm() * std::sqrt(std::max(
        {op_norm(flow.metric(t, x)), op_norm(flow.metric(t, y)),
         op_norm(flow.metric(t, 0.5 * (x + y)))}));
    const int base_pieces = std::max(1, static_cast<int>(std::ceil(rough / 0.25)));
    // Finer continuation for targets whose chart segment passes close to the cut locus.
    for (int refine = 0; refine < 3 && err != 0.0; ++refine) {
      const int pieces = base_pieces << (2 * refine);
      v = delta / pieces;
      for (int j = 1; j <= pieces; ++j) {
        if (j > 1) v *= static_cast<double>(j) / (j - 1);
        err = solve(x + delta * (static_cast<double>(j) / pieces), v, it);
        if (err != 0.0) break;
      }
    }
    if (err != 0.0) throw NumericError("geodesic shooting did not converge", err);
  }
  // Continuation can still land on a longer geodesic when the chart segment crosses the
  // cut locus of x. Solving from the other end and reversing gives a second candidate;
  // keep the shorter one.
  if (!guess && !reverse_pass) {
    try {
      const GeodesicResult back = geodesic_and_transport_impl(flow, t, y, x, nullptr, options, true);
      if (back.distance < std::sqrt(v.dot(flow.metric(t, x) * v)) * (1.0 - 1e-9)) {
        Vec end_velocity;
        shoot_with_velocity(flow, t, y, back.velocity, options.substeps, end_velocity);
        Vec w = -end_velocity;
        int reuse = 0;
        if (solve(y, w, reuse) == 0.0) v = w;
      }
    } catch (const NumericError&) {
      // The forward solution stands on its own.
    }
  }
  err = (shoot(flow, t, x, v, options.substeps) - y).norm();
  r.velocity = v;
  r.iterations = it;
  r.residual = err;
  shoot(flow, t, x, v, options.substeps, &r.transport);
  r.distance = std::sqrt(v.dot(flow.metric(t, x) * v));
  return r;
}

}  // namespace

GeodesicResult geodesic_and_transport(const MetricFlow& flow, double t, const Vec& x,
                                      const Vec& y, const Vec* guess,
                                      const GeodesicOptions& options) {
  return geodesic_and_transport_impl(flow, t, x, y, guess, options, false);
}

}  // namespace pathflow
