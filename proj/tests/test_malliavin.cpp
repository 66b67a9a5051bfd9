#include <doctest.h>

#include "pathflow/errors.hpp"
#include "pathflow/flows.hpp"
#include "pathflow/malliavin.hpp"
#include "pathflow/quadrature.hpp"

#include <cmath>

using namespace pathflow;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) out(i++) = a;
  return out;
}

EnsembleSpec ensemble(double T, std::size_t steps, std::size_t n, std::uint64_t seed = 5) {
  EnsembleSpec s;
  s.T = T;
  s.steps = steps;
  s.n_paths = n;
  s.seed = seed;
  return s;
}

FramedPath one_path(const MetricFlow& flow, const Vec& x0, double T, std::size_t n,
                    std::uint64_t i = 0) {
  return simulate_path(flow, x0, initial_frame(flow, x0), T, n, {13, i});
}

}  // namespace

TEST_SUITE("malliavin") {
  TEST_CASE("damped gradient closed forms") {
    const auto flat = make_flow("euclid", {{"dim", 2}});
    const Vec v = vec({0.4, -1.2});
    auto p = one_path(*flat, vec({0, 0}), 1.0, 50);
    auto g = damped_gradient(*flat, CylFunc::constant(3.0, 1.0), p);
    for (const Vec& d : g.d) CHECK(d.norm() == 0.0);
    g = damped_gradient(*flat, CylFunc::linear(v, 1.0), p);
    for (const Vec& d : g.d) CHECK((d - v).norm() < 1e-14);
    CHECK(g.h0_norm2() == doctest::Approx(v.squaredNorm()));

    const double lambda = 0.7;
    const auto ou = make_flow("ou", {{"dim", 2}, {"lambda", lambda}});
    p = one_path(*ou, vec({1, 0}), 1.0, 100);
    g = damped_gradient(*ou, CylFunc::linear(v, 1.0), p);
    for (std::size_t k = 0; k < 100; ++k)
      CHECK((g.d[k] - std::exp(-lambda * (1.0 - p.times[k])) * v).norm() < 1e-5);
    // Slots before T: D' vanishes after the last slot.
    g = damped_gradient(*ou, CylFunc::linear(v, 0.5), p);
    for (std::size_t k = 50; k < 100; ++k) CHECK(g.d[k].norm() == 0.0);
  }

  TEST_CASE("backward recursion equals fresh evolution, with boundary hits") {
    const auto flow = make_flow("disk-exterior", {});
    const auto p = one_path(*flow, vec({1.05, 0.2}), 0.5, 80, 3);
    const auto a = step_factors(lift_forms(*flow, p), QScheme::Projected);
    const CylFunc f({0.125, 0.3125, 0.5}, [](std::span<const Vec> q) {
      return std::sin(q[0](0)) * q[1](1) + q[2].squaredNorm();
    });
    const auto fast = damped_gradient(f, p, a);
    const auto ref = damped_gradient_fresh(f, p, a);
    for (std::size_t k = 0; k < p.steps(); ++k) CHECK((fast.d[k] - ref.d[k]).norm() < 1e-12);
    CHECK((fast.initial - ref.initial).norm() < 1e-12);
  }

  TEST_CASE("linearity and slot-level chain rule hold path-wise") {
    const auto flow = make_flow("shrinking-sphere", {{"r0", 2.0}});
    const auto p = one_path(*flow, vec({0.1, 0.1}), 0.5, 40);
    const auto a = step_factors(lift_forms(*flow, p), QScheme::Projected);
    const CylFunc f = CylFunc::product(vec({1, 2}), 0.25, vec({-1, 0.5}), 0.5);
    const CylFunc g = CylFunc::exp_linear(vec({0.3, 0.3}), 1.0, 0.5);
    const CylFunc sum({0.25, 0.5}, [&](std::span<const Vec> q) {
      return 2.0 * f(q) - 3.0 * g(std::span<const Vec>(&q[1], 1));
    }, [&](std::span<const Vec> q, std::span<Vec> out) {
      const auto df = f.differential(q);
      const auto dg = g.differential(std::span<const Vec>(&q[1], 1));
      out[0] = 2.0 * df[0];
      out[1] = 2.0 * df[1] - 3.0 * dg[0];
    });
    const auto df = damped_gradient(f, p, a), dg = damped_gradient(g, p, a);
    const auto ds = damped_gradient(sum, p, a);
    for (std::size_t k = 0; k < p.steps(); ++k)
      CHECK((ds.d[k] - (2.0 * df.d[k] - 3.0 * dg.d[k])).norm() < 1e-12);

    const CylFunc sq = f.compose([](double x) { return std::sin(x); },
                                 [](double x) { return std::cos(x); });
    const auto dsq = damped_gradient(sq, p, a);
    const double s = std::cos(f.eval(p));
    for (std::size_t k = 0; k < p.steps(); ++k) CHECK((dsq.d[k] - s * df.d[k]).norm() < 1e-10);
  }

  TEST_CASE("directional derivative") {
    const double lambda = 1.0, T = 1.0;
    const auto ou = make_flow("ou", {{"dim", 1}, {"lambda", lambda}});
    const auto p = one_path(*ou, vec({0.0}), T, 1000);
    const auto g = damped_gradient(*ou, CylFunc::linear(vec({2.0}), T), p);
    const auto h = CMVector::linear(vec({0.5}), 1000, 1e-3);
    const double want = 2.0 * 0.5 * (1.0 - std::exp(-lambda * T)) / lambda;
    CHECK(directional_derivative(g, h) == doctest::Approx(want).epsilon(1e-3));
    CHECK(directional_derivative(g, h.scaled(3.0)) ==
          doctest::Approx(3.0 * directional_derivative(g, h)).epsilon(1e-12));
    CHECK(directional_derivative(g, h.scaled(0.0)) == 0.0);
    CHECK_THROWS_AS(directional_derivative(g, CMVector::linear(vec({1.0}), 10, 0.1)),
                    ArgumentError);
  }

  TEST_CASE("cylindrical functional plumbing") {
    const auto flow = make_flow("euclid", {{"dim", 2}});
    const auto p = one_path(*flow, vec({0.3, 0.1}), 1.0, 10);
    CHECK_THROWS_AS(CylFunc::linear(vec({1, 1}), 0.55).eval(p), ArgumentError);
    CHECK_THROWS_AS(CylFunc::linear(vec({1, 1}), 1.5).eval(p), ArgumentError);
    CHECK_THROWS_AS(CylFunc({0.5, 0.2}, [](std::span<const Vec>) { return 0.0; }), ArgumentError);
    const CylFunc f = CylFunc::product(vec({1, 2}), 0.3, vec({-1, 0.5}), 0.7);
    const auto pts = f.points(p);
    const auto exact = f.differential(pts);
    const auto fd = f.finite_difference_differential(pts);
    for (std::size_t i = 0; i < 2; ++i) CHECK((exact[i] - fd[i]).norm() < 1e-5);
  }

  TEST_CASE("three-way integration by parts, flat case hits sqrt(2) T <v, w>") {
    const auto flow = make_flow("euclid", {{"dim", 2}});
    const Vec v = vec({1.0, 0.5}), w = vec({0.3, -0.2});
    const auto spec = ensemble(1.0, 20, 4000);
    const auto h = CMVector::linear(w, spec.steps, spec.dt());
    const auto rep =
        ibp_three_way(*flow, vec({0, 0}), CylFunc::linear(v, 1.0), h, {0.1, 0.05}, spec);
    const double target = std::sqrt(2.0) * v.dot(w);
    CHECK(rep.pass);
    CHECK(rep.flow_fd.mean == doctest::Approx(target).epsilon(1e-10));
    CHECK(rep.pairing.mean == doctest::Approx(target).epsilon(1e-10));
    CHECK(std::abs(rep.girsanov.mean - target) < 3.0 * rep.girsanov.se);
  }

  TEST_CASE("three-way integration by parts with a reflecting boundary") {
    const auto flow = make_flow("half-line", {});
    const auto spec = ensemble(0.5, 50, 3000);
    const auto h = CMVector::linear(vec({1.0}), spec.steps, spec.dt());
    const auto f = CylFunc::terminal([](const Vec& x) { return std::atan(x(0)); },
                                     [](const Vec& x) { return vec({1.0 / (1 + x(0) * x(0))}); },
                                     0.5);
    const auto rep = ibp_three_way(*flow, vec({0.2}), f, h, {0.05, 0.025}, spec);
    CHECK_MESSAGE(rep.pass, rep.flow_fd.mean, " ", rep.pairing.mean, " ", rep.girsanov.mean);
  }

  TEST_CASE("Bismut formula on OU") {
    const double lambda = 1.0, T = 1.0;
    const auto flow = make_flow("ou", {{"dim", 2}, {"lambda", lambda}});
    const Vec v = vec({1.0, -0.5});
    const auto spec = ensemble(T, 50, 4000);
    const auto rep = bel_gradient(
        *flow, vec({0.5, 0.5}), [&](const Vec& x) { return v.dot(x); },
        [&](const Vec&) { return v; }, linear_schedule(spec.steps), spec);
    const Vec want = std::exp(-lambda * T) * v;
    for (int j = 0; j < 2; ++j) {
      CHECK(rep.plain.mean(j) == doctest::Approx(want(j)).epsilon(1e-5));
      CHECK(std::abs(rep.weighted.mean(j) - want(j)) < 3.0 * rep.weighted.se(j));
    }
    CHECK(rep.agree);
    CHECK_THROWS_AS(bel_gradient(*flow, vec({0, 0}), [](const Vec&) { return 0.0; },
                                 [](const Vec& x) { return x; }, std::vector<double>(51, 0.0),
                                 spec),
                    ArgumentError);
  }

  TEST_CASE("Bismut formula on the half-line against the reflection oracle") {
    const double T = 0.5, x0 = 0.4;
    const auto flow = make_flow("half-line", {});
    auto f = [](double x) { return std::sin(x) - x * std::exp(-0.5 * x * x); };
    auto df = [](double x) { return std::cos(x) - (1.0 - x * x) * std::exp(-0.5 * x * x); };
    const double oracle = gaussian_expectation(
        [&](double y) { return df(std::abs(y)) * (y >= 0 ? 1.0 : -1.0); }, x0,
        std::sqrt(2.0 * T), 20000);
    const auto spec = ensemble(T, 100, 4000);
    const auto rep = bel_gradient(
        *flow, vec({x0}), [&](const Vec& x) { return f(x(0)); },
        [&](const Vec& x) { return vec({df(x(0))}); }, linear_schedule(spec.steps), spec);
    const double bias = 0.02;
    CHECK(std::abs(rep.plain.mean(0) - oracle) < 3.0 * rep.plain.se(0) + bias);
    CHECK(std::abs(rep.weighted.mean(0) - oracle) < 3.0 * rep.weighted.se(0) + bias);
  }

  TEST_CASE("gradient formula for a two-slot OU product") {
    const double lambda = 1.0, s = 0.5, t = 1.0;
    const auto flow = make_flow("ou", {{"dim", 2}, {"lambda", lambda}});
    const Vec v = vec({1.0, 0.3}), w = vec({-0.4, 1.0}), x0 = vec({0.8, -0.6});
    const auto spec = ensemble(t, 40, 3000);
    const auto rep =
        gradient_formula_check(*flow, x0, CylFunc::product(v, s, w, t), 1e-3, spec);
    // ∂_{x0} E <v, X_s><w, X_t> = e^{-λs} <w, m_t> v + e^{-λt} <v, m_s> w.
    const Vec want = std::exp(-lambda * s) * w.dot(std::exp(-lambda * t) * x0) * v +
                     std::exp(-lambda * t) * v.dot(std::exp(-lambda * s) * x0) * w;
    CHECK(rep.pass);
    CHECK(rep.relative_error < 0.05);
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(rep.formula.mean(j) - want(j)) < 3.0 * rep.formula.se(j) + 0.02);
  }

  TEST_CASE("Clark-Ocone on OU linear and flat quadratic functionals") {
    const double lambda = 1.0, T = 1.0;
    const auto ou = make_flow("ou", {{"dim", 1}, {"lambda", lambda}});
    const auto spec = ensemble(T, 50, 4000);
    const auto rep = clark_ocone(*ou, vec({0.5}), CylFunc::linear(vec({1.0}), T), spec);
    CHECK(rep.pass);
    CHECK(rep.residual_ratio < 0.01);
    const double var = (1.0 - std::exp(-2.0 * lambda * T)) / lambda;
    CHECK(rep.isometry == doctest::Approx(var).epsilon(0.02));
    CHECK(rep.var_f == doctest::Approx(var).epsilon(0.06));

    const auto flat = make_flow("euclid", {{"dim", 1}});
    const double x0 = 1.0;
    const auto quad = clark_ocone(
        *flat, vec({x0}),
        CylFunc::terminal([](const Vec& x) { return x(0) * x(0); },
                          [](const Vec& x) { return vec({2.0 * x(0)}); }, T),
        spec);
    CHECK(quad.pass);
    // φ_k = √2 · 2 X_{s_k}, so E φ_k = 2√2 x0.
    for (std::size_t k = 0; k < spec.steps; k += 10)
      CHECK(quad.mean_integrand[k](0) == doctest::Approx(2.0 * std::sqrt(2.0) * x0).epsilon(0.05));
  }

  TEST_CASE("log-Sobolev: constant, saturated Gaussian, free path") {
    const auto flat = make_flow("euclid", {{"dim", 1}});
    const auto spec = ensemble(1.0, 20, 4000);
    auto rep = dirichlet_and_lsi(*flat, InitialLaw::point(vec({0.0})),
                                 CylFunc::constant(2.0, 1.0), spec);
    CHECK(rep.degenerate);
    CHECK(rep.pass);
    CHECK(rep.entropy.mean == doctest::Approx(0.0));

    // F = exp(<v, X_T>/2): Ent(F²) = 2·form exactly (Gaussian equality case).
    const double v = 0.6;
    rep = dirichlet_and_lsi(*flat, InitialLaw::point(vec({0.0})),
                            CylFunc::exp_linear(vec({v}), 0.5, 1.0), spec);
    CHECK(rep.pass);
    const double lognormal_ent = v * v * std::exp(v * v);  // s² = 2T v², Ent = s²/2 E F²
    CHECK(rep.entropy.mean == doctest::Approx(lognormal_ent).epsilon(0.1));
    CHECK(std::abs(rep.margin.mean) < 3.0 * rep.margin.se + 0.02);

    const auto ou = make_flow("ou", {{"dim", 1}, {"lambda", 1.0}});
    const auto law = InitialLaw::gaussian(vec({0.2}), 1.2);
    const CylFunc prod({0.0, 1.0}, [](std::span<const Vec> q) {
      return (1.5 + std::sin(q[0](0))) * (2.0 + std::cos(q[1](0)));
    });
    rep = dirichlet_and_lsi(*ou, law, prod, spec);
    CHECK(rep.constant == doctest::Approx(2.0 * 1.44));
    CHECK(rep.pass);
    CHECK(rep.margin.mean > 0.0);
  }

  TEST_CASE("martingale property of Q u^{-1} grad P f on OU") {
    const double lambda = 1.0, T = 1.0;
    const auto ou = make_flow("ou", {{"dim", 2}, {"lambda", lambda}});
    const Vec v = vec({1.0, 2.0});
    const auto spec = ensemble(T, 40, 2000);
    const auto rep = martingale_check(
        *ou, vec({0.3, 0.3}),
        [&](double s, const Vec&) { return Vec(std::exp(-lambda * (T - s)) * v); }, {0, 20, 40},
        spec);
    CHECK(rep.pass);
    CHECK((rep.values[0].mean - std::exp(-lambda * T) * v).norm() < 1e-12);
  }
}
