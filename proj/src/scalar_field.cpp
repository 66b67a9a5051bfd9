#include "pathflow/scalar_field.hpp"

#include <cmath>
#include <vector>

namespace pathflow {

double fd_step(const Vec& x) { return 1e-5 * (1.0 + x.norm()); }

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x) {
  const int d = static_cast<int>(x.size());
  const double h = fd_step(x);
  Vec g(d);
  for (int i = 0; i < d; ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x) {
  const int d = static_cast<int>(x.size());
  // Second differences need a larger step than first differences to stay above
  // round-off.
  const double h = 1e-4 * (1.0 + x.norm());
  Mat m(d, d);
  const double f0 = f(x);
  for (int i = 0; i < d; ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    m(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
    for (int j = 0; j < i; ++j) {
      Vec pp = x, pm = x, mp = x, mm = x;
      pp(i) += h, pp(j) += h;
      pm(i) += h, pm(j) -= h;
      mp(i) -= h, mp(j) += h;
      mm(i) -= h, mm(j) -= h;
      m(i, j) = m(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return m;
}

ScalarField ScalarField::constant(int dim, double c) {
  ScalarField s;
  s.dim = dim;
  s.value = [c](double, const Vec&) { return c; };
  s.grad = [dim](double, const Vec&) { return Vec(Vec::Zero(dim)); };
  s.hess = [dim](double, const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  s.dt = [](double, const Vec&) { return 0.0; };
  s.spatially_constant = true;
  s.time_constant = true;
  return s;
}

ScalarField ScalarField::radial(int dim, std::function<double(double)> h,
                                std::function<double(double)> dh,
                                std::function<double(double)> d2h) {
  ScalarField s;
  s.dim = dim;
  s.value = [h](double, const Vec& x) { return h(x.norm()); };
  s.grad = [dh](double, const Vec& x) {
    const double r = x.norm();
    return Vec(r > 0.0 ? Vec(dh(r) / r * x) : Vec(Vec::Zero(x.size())));
  };
  s.hess = [dh, d2h, dim](double, const Vec& x) {
    const double r = x.norm();
    if (r == 0.0) return Mat(d2h(0.0) * identity(dim));
    const Vec e = x / r;
    const Mat radial = e * e.transpose();
    return Mat(d2h(r) * radial + dh(r) / r * (identity(dim) - radial));
  };
  s.dt = [](double, const Vec&) { return 0.0; };
  return s;
}

ScalarField ScalarField::of_time(int dim, std::function<double(double)> a,
                                 std::function<double(double)> da) {
  ScalarField s;
  s.dim = dim;
  s.value = [a](double t, const Vec&) { return a(t); };
  s.grad = [dim](double, const Vec&) { return Vec(Vec::Zero(dim)); };
  s.hess = [dim](double, const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  s.dt = [da](double t, const Vec&) { return da(t); };
  s.spatially_constant = true;
  s.time_constant = false;
  return s;
}

ScalarField ScalarField::from_function(int dim, Value f, bool time_constant) {
  ScalarField s;
  s.dim = dim;
  s.value = f;
  s.grad = [f](double t, const Vec& x) {
    return fd_gradient([&](const Vec& y) { return f(t, y); }, x);
  };
  s.hess = [f](double t, const Vec& x) {
    return fd_hessian([&](const Vec& y) { return f(t, y); }, x);
  };
  if (time_constant) {
    s.dt = [](double, const Vec&) { return 0.0; };
  } else {
    s.dt = [f](double t, const Vec& x) {
      const double h = 1e-5 * (1.0 + std::abs(t));
      return (f(t + h, x) - f(t - h, x)) / (2.0 * h);
    };
  }
  s.time_constant = time_constant;
  return s;
}

ScalarField ScalarField::from_expression(int dim, const Expression& e) {
  auto f = [e, dim](double t, const Vec& x) {
    double buf[kMaxDim + 1];
    buf[0] = t;
    for (int i = 0; i < dim; ++i) buf[i + 1] = x(i);
    return e.eval(std::span<const double>(buf, static_cast<std::size_t>(dim) + 1));
  };
  return from_function(dim, f, false);
}

ScalarField ScalarField::negated_log() const {
  const ScalarField base = *this;
  ScalarField s;
  s.dim = dim;
  s.value = [base](double t, const Vec& x) { return -std::log(base.value(t, x)); };
  s.grad = [base](double t, const Vec& x) {
    return Vec(-base.grad(t, x) / base.value(t, x));
  };
  s.hess = [base](double t, const Vec& x) {
    const double v = base.value(t, x);
    const Vec g = base.grad(t, x);
    return Mat(-base.hess(t, x) / v + g * g.transpose() / (v * v));
  };
  s.dt = [base](double t, const Vec& x) { return -base.dt(t, x) / base.value(t, x); };
  s.spatially_constant = spatially_constant;
  s.time_constant = time_constant;
  return s;
}

}  // namespace pathflow
