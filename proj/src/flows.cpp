#include "pathflow/flows.hpp"

#include "pathflow/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace pathflow {

namespace {

constexpr double kNoHorizon = std::numeric_limits<double>::infinity();

}  // namespace

ConformalFlow::ConformalFlow(std::string name, int dim, double horizon, Parts parts)
    : MetricFlow(std::move(name), dim, horizon), parts_(std::move(parts)) {}

bool ConformalFlow::in_chart(double t, const Vec& x) const {
  if (!x.allFinite()) return false;
  return !parts_.chart || parts_.chart(t, x);
}

Mat ConformalFlow::metric(double t, const Vec& x) const {
  const double w = parts_.potential.value(t, x);
  return std::exp(2.0 * w) * identity(dim());
}

Mat ConformalFlow::metric_dt(double t, const Vec& x) const {
  if (parts_.potential.time_constant) return Mat::Zero(dim(), dim());
  const double w = parts_.potential.value(t, x);
  return 2.0 * parts_.potential.dt(t, x) * std::exp(2.0 * w) * identity(dim());
}

std::array<Mat, kMaxDim> ConformalFlow::metric_dx(double t, const Vec& x) const {
  std::array<Mat, kMaxDim> dg{};
  const double e2w = std::exp(2.0 * parts_.potential.value(t, x));
  const Vec dw = parts_.potential.grad(t, x);
  for (int k = 0; k < dim(); ++k) dg[k] = 2.0 * dw(k) * e2w * identity(dim());
  return dg;
}

Christoffel ConformalFlow::christoffel_symbols(double t, const Vec& x) const {
  const int d = dim();
  Christoffel c = Christoffel::zero(d);
  if (parts_.potential.spatially_constant) return c;
  const Vec dw = parts_.potential.grad(t, x);
  for (int k = 0; k < d; ++k) {
    Mat& gk = c.upper[k];
    for (int i = 0; i < d; ++i) {
      gk(k, i) += dw(i);
      gk(i, k) += dw(i);
      gk(i, i) -= dw(k);
    }
  }
  return c;
}

Mat ConformalFlow::ricci(double t, const Vec& x) const {
  const int d = dim();
  if (parts_.potential.spatially_constant) return Mat::Zero(d, d);
  const Vec dw = parts_.potential.grad(t, x);
  const Mat h = parts_.potential.hess(t, x);
  const double dm2 = static_cast<double>(d - 2);
  return symmetrize(-dm2 * (h - dw * dw.transpose()) -
                    (h.trace() + dm2 * dw.squaredNorm()) * identity(d));
}

Vec ConformalFlow::drift(double t, const Vec& x) const {
  return parts_.drift ? parts_.drift->value(t, x) : Vec(Vec::Zero(dim()));
}

Mat ConformalFlow::drift_jacobian(double t, const Vec& x) const {
  return parts_.drift ? parts_.drift->jacobian(t, x) : Mat(Mat::Zero(dim(), dim()));
}

std::optional<double> ConformalFlow::closed_form_distance(double t, const Vec& x,
                                                          const Vec& y) const {
  if (parts_.distance) return parts_.distance(t, x, y);
  if (parts_.potential.spatially_constant)
    return std::exp(parts_.potential.value(t, x)) * (x - y).norm();
  return std::nullopt;
}

std::shared_ptr<const ConformalFlow> conformal_change(const ConformalFlow& base,
                                                      const ScalarField& phi) {
  ConformalFlow::Parts parts = base.parts();
  const ScalarField w = base.parts().potential;
  const ScalarField minus_log_phi = phi.negated_log();
  ScalarField sum;
  sum.dim = w.dim;
  sum.value = [w, minus_log_phi](double t, const Vec& x) {
    return w.value(t, x) + minus_log_phi.value(t, x);
  };
  sum.grad = [w, minus_log_phi](double t, const Vec& x) {
    return Vec(w.grad(t, x) + minus_log_phi.grad(t, x));
  };
  sum.hess = [w, minus_log_phi](double t, const Vec& x) {
    return Mat(w.hess(t, x) + minus_log_phi.hess(t, x));
  };
  sum.dt = [w, minus_log_phi](double t, const Vec& x) {
    return w.dt(t, x) + minus_log_phi.dt(t, x);
  };
  sum.spatially_constant = w.spatially_constant && phi.spatially_constant;
  sum.time_constant = w.time_constant && phi.time_constant;
  parts.potential = sum;
  parts.bounds.reset();
  parts.distance = nullptr;
  return std::make_shared<ConformalFlow>(base.name() + "~conformal", base.dim(), base.horizon(),
                                         std::move(parts));
}

double disk_exterior_distance(const Vec& x, const Vec& y) {
  const double rx = x.norm();
  const double ry = y.norm();
  if (rx < 1.0 - 1e-12 || ry < 1.0 - 1e-12)
    throw DomainError("disk-exterior distance: point inside the disk");
  const double cos_theta = std::clamp(x.dot(y) / (rx * ry), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const double ax = std::acos(std::min(1.0, 1.0 / rx));
  const double ay = std::acos(std::min(1.0, 1.0 / ry));
  if (theta <= ax + ay) return (x - y).norm();
  return std::sqrt(std::max(0.0, rx * rx - 1.0)) + std::sqrt(std::max(0.0, ry * ry - 1.0)) +
         (theta - ax - ay);
}

// ---------------------------------------------------------------------------------------
// Expression flows

ExpressionFlow::ExpressionFlow(std::string name, int dim, double horizon)
    : MetricFlow(std::move(name), dim, horizon) {}

double ExpressionFlow::eval(const Expression& e, double t, const Vec& x) const {
  double buf[kMaxDim + 1];
  buf[0] = t;
  for (int i = 0; i < dim(); ++i) buf[i + 1] = x(i);
  return e.eval(std::span<const double>(buf, static_cast<std::size_t>(dim()) + 1));
}

std::shared_ptr<const ExpressionFlow> ExpressionFlow::from_section(const ConfigSection& s) {
  const long long d = s.get_int("dim", 0);
  if (d < 1 || d > kMaxDim) throw ConfigError("'dim' must be in 1..4", s.line);
  const int dim = static_cast<int>(d);
  const double horizon = s.get_double("horizon", kNoHorizon);
  if (!(horizon > 0.0)) throw ConfigError("'horizon' must be positive", s.line);
  std::shared_ptr<ExpressionFlow> flow(
      new ExpressionFlow(s.get_string("name", "custom"), dim, horizon));
  const auto vars = flow_variables(dim);
  auto parse = [&](const ConfigEntry& e, const std::vector<std::string>& v) {
    try {
      return Expression::parse(e.value, v);
    } catch (const ConfigError& err) {
      throw ConfigError(err.what(), e.line);
    }
  };

  std::vector<std::string> known{"name", "dim", "horizon", "boundary", "domain", "K", "sigma", "type"};
  flow->metric_.assign(static_cast<std::size_t>(dim * dim), Expression::parse("0", vars));
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      const std::string key = "metric." + std::to_string(i + 1) + std::to_string(j + 1);
      known.push_back(key);
      const ConfigEntry* e = s.find(key);
      if (e == nullptr) {
        if (i == j) throw ConfigError("missing diagonal entry '" + key + "'", s.line);
        continue;
      }
      const Expression ex = parse(*e, vars);
      flow->metric_[static_cast<std::size_t>(i * dim + j)] = ex;
      flow->metric_[static_cast<std::size_t>(j * dim + i)] = ex;
    }
  }
  for (int i = 0; i < dim; ++i) {
    const std::string key = "drift." + std::to_string(i + 1);
    known.push_back(key);
    const ConfigEntry* e = s.find(key);
    flow->drift_.push_back(e ? parse(*e, vars) : Expression::parse("0", vars));
  }
  s.reject_unknown(known);

  if (const ConfigEntry* e = s.find("domain")) flow->domain_ = parse(*e, vars);
  if (const ConfigEntry* e = s.find("boundary")) {
    const Expression b = parse(*e, vars);
    auto value = [b, dim](const Vec& x) {
      double buf[kMaxDim + 1];
      buf[0] = 0.0;
      for (int i = 0; i < dim; ++i) buf[i + 1] = x(i);
      return b.eval(std::span<const double>(buf, static_cast<std::size_t>(dim) + 1));
    };
    flow->boundary_ = LevelSet{value, [value](const Vec& x) { return fd_gradient(value, x); },
                               [value](const Vec& x) { return fd_hessian(value, x); }};
  }
  if (s.has("K") || s.has("sigma")) {
    const std::vector<std::string> tvars{"t"};
    const Expression k = s.has("K") ? parse(*s.find("K"), tvars) : Expression::parse("0", tvars);
    const Expression sg =
        s.has("sigma") ? parse(*s.find("sigma"), tvars) : Expression::parse("0", tvars);
    flow->bounds_ = CurvatureBounds{
        [k](double t) { return k.eval(std::span<const double>(&t, 1)); },
        [sg](double t) { return sg.eval(std::span<const double>(&t, 1)); },
        CurvatureBounds::Provenance::Analytic};
  }
  return flow;
}

bool ExpressionFlow::in_chart(double t, const Vec& x) const {
  if (!x.allFinite()) return false;
  return domain_.empty() || eval(domain_, t, x) > 0.0;
}

Mat ExpressionFlow::metric(double t, const Vec& x) const {
  const int d = dim();
  Mat g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = eval(metric_[static_cast<std::size_t>(i * d + j)], t, x);
  return g;
}

Vec ExpressionFlow::drift(double t, const Vec& x) const {
  Vec z(dim());
  for (int i = 0; i < dim(); ++i) z(i) = eval(drift_[static_cast<std::size_t>(i)], t, x);
  return z;
}

// ---------------------------------------------------------------------------------------
// Registry

namespace {

double param(const FlowParams& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

void allow_only(const std::string& flow, const FlowParams& p, std::vector<std::string> keys) {
  for (const auto& [k, v] : p) {
    (void)v;
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ConfigError("flow '" + flow + "' has no parameter '" + k + "'");
  }
}

int dimension(const std::string& flow, const FlowParams& p, double fallback) {
  const double d = param(p, "dim", fallback);
  if (d != std::floor(d) || d < 1 || d > kMaxDim)
    throw ConfigError("flow '" + flow + "': dim must be an integer in 1..4");
  return static_cast<int>(d);
}

LevelSet half_space_boundary(int d) {
  return {[d](const Vec& x) { return x(d - 1); },
          [d](const Vec&) { return Vec(Vec::Unit(d, d - 1)); },
          [d](const Vec&) { return Mat(Mat::Zero(d, d)); }};
}

std::shared_ptr<const MetricFlow> flat(const std::string& name, int d, ConformalFlow::Parts parts) {
  parts.potential = ScalarField::constant(d, 0.0);
  return std::make_shared<ConformalFlow>(name, d, kNoHorizon, std::move(parts));
}

}  // namespace

std::vector<std::string> builtin_flow_names() {
  return {"euclid", "ou", "conformal-euclid", "shrinking-sphere", "half-space", "half-line",
          "disk-exterior"};
}

std::shared_ptr<const MetricFlow> make_flow(const std::string& name, const FlowParams& p) {
  if (name == "euclid") {
    allow_only(name, p, {"dim"});
    ConformalFlow::Parts parts;
    parts.bounds = CurvatureBounds::constant(0.0, 0.0);
    return flat(name, dimension(name, p, 1), std::move(parts));
  }
  if (name == "ou") {
    allow_only(name, p, {"dim", "lambda"});
    const int d = dimension(name, p, 1);
    const double lambda = param(p, "lambda", 1.0);
    ConformalFlow::Parts parts;
    parts.drift = DriftField{[lambda](double, const Vec& x) { return Vec(-lambda * x); },
                             [lambda, d](double, const Vec&) { return Mat(-lambda * identity(d)); }};
    parts.bounds = CurvatureBounds::constant(lambda, 0.0);
    return flat(name, d, std::move(parts));
  }
  if (name == "conformal-euclid") {
    // g_t = a(t)² I with a(t) = 1 + rate·t; R^Z = -G/2 gives K(t) = -a'/a.
    allow_only(name, p, {"dim", "rate"});
    const int d = dimension(name, p, 1);
    const double rate = param(p, "rate", 0.5);
    const double horizon = rate < 0.0 ? -1.0 / rate : kNoHorizon;
    ConformalFlow::Parts parts;
    parts.potential = ScalarField::of_time(
        d, [rate](double t) { return std::log1p(rate * t); },
        [rate](double t) { return rate / (1.0 + rate * t); });
    const auto k = [rate](double t) { return -rate / (1.0 + rate * t); };
    parts.bounds = CurvatureBounds{k, [](double) { return 0.0; },
                                   CurvatureBounds::Provenance::Analytic};
    return std::make_shared<ConformalFlow>(name, d, horizon, std::move(parts));
  }
  if (name == "shrinking-sphere") {
    // Round 2-sphere of radius r(t) = r0 (1 - rate·t) in stereographic coordinates:
    // w = log(2 r(t) / (1 + |x|²)). Ric = g / r², -G/2 = (rate·r0 / r) g.
    allow_only(name, p, {"r0", "rate"});
    const double r0 = param(p, "r0", 1.0);
    const double rate = param(p, "rate", 0.2);
    if (!(r0 > 0.0) || rate < 0.0) throw ConfigError("shrinking-sphere needs r0 > 0, rate >= 0");
    const double horizon = rate > 0.0 ? 1.0 / rate : kNoHorizon;
    auto radius = [r0, rate](double t) { return r0 * (1.0 - rate * t); };
    ScalarField w;
    w.dim = 2;
    w.value = [radius](double t, const Vec& x) {
      return std::log(2.0 * radius(t) / (1.0 + x.squaredNorm()));
    };
    w.grad = [](double, const Vec& x) { return Vec(-2.0 * x / (1.0 + x.squaredNorm())); };
    w.hess = [](double, const Vec& x) {
      const double q = 1.0 + x.squaredNorm();
      return Mat(-2.0 / q * identity(2) + 4.0 * x * x.transpose() / (q * q));
    };
    w.dt = [r0, rate, radius](double t, const Vec&) { return -rate * r0 / radius(t); };
    w.spatially_constant = false;
    w.time_constant = rate == 0.0;
    ConformalFlow::Parts parts;
    parts.potential = w;
    parts.chart = [](double, const Vec& x) { return x.norm() < 1e4; };
    parts.bounds = CurvatureBounds{
        [r0, rate, radius](double t) {
          const double r = radius(t);
          return 1.0 / (r * r) + rate * r0 / r;
        },
        [](double) { return 0.0; }, CurvatureBounds::Provenance::Analytic};
    return std::make_shared<ConformalFlow>(name, 2, horizon, std::move(parts));
  }
  if (name == "half-space") {
    allow_only(name, p, {"dim"});
    const int d = dimension(name, p, 2);
    ConformalFlow::Parts parts;
    parts.boundary = half_space_boundary(d);
    parts.bounds = CurvatureBounds::constant(0.0, 0.0);
    return flat(name, d, std::move(parts));
  }
  if (name == "half-line") {
    allow_only(name, p, {});
    ConformalFlow::Parts parts;
    parts.boundary = half_space_boundary(1);
    parts.bounds = CurvatureBounds::constant(0.0, 0.0);
    return flat(name, 1, std::move(parts));
  }
  if (name == "disk-exterior") {
    // M = {|x| >= 1} in the flat plane, b = |x| - 1. Seen from outside, the unit circle
    // has II = -1.
    allow_only(name, p, {});
    ConformalFlow::Parts parts;
    parts.boundary = LevelSet{
        [](const Vec& x) { return x.norm() - 1.0; },
        [](const Vec& x) { return Vec(x / x.norm()); },
        [](const Vec& x) {
          const double r = x.norm();
          const Vec e = x / r;
          return Mat((identity(2) - e * e.transpose()) / r);
        }};
    parts.chart = [](double, const Vec& x) { return x.norm() > 1e-3; };
    parts.bounds = CurvatureBounds::constant(0.0, -1.0);
    parts.distance = [](double, const Vec& x, const Vec& y) {
      return disk_exterior_distance(x, y);
    };
    return flat(name, 2, std::move(parts));
  }
  throw ConfigError("unknown flow '" + name + "'");
}

}  // namespace pathflow
