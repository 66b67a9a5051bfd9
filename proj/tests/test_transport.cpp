#include <doctest.h>

#include "pathflow/errors.hpp"
#include "pathflow/flows.hpp"
#include "pathflow/transport.hpp"

#include <cmath>
#include <numbers>

using namespace pathflow;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) out(i++) = a;
  return out;
}

EnsembleSpec ensemble(double T, std::size_t steps, std::size_t n, std::uint64_t seed = 11) {
  EnsembleSpec s;
  s.T = T;
  s.steps = steps;
  s.n_paths = n;
  s.seed = seed;
  return s;
}

Law1d gaussian_law(double m, double v) {
  const double sd = std::sqrt(v);
  return {[m, v](double y) { return std::exp(-0.5 * (y - m) * (y - m) / v); }, m - 12 * sd,
          m + 12 * sd};
}

ScalarField sine_psi(double amp) {
  ScalarField p;
  p.dim = 1;
  p.value = [amp](double, const Vec& x) { return 1.0 + amp * std::sin(x(0)); };
  p.grad = [amp](double, const Vec& x) { return vec({amp * std::cos(x(0))}); };
  p.hess = [amp](double, const Vec& x) {
    Mat h(1, 1);
    h(0, 0) = -amp * std::sin(x(0));
    return h;
  };
  p.dt = [](double, const Vec&) { return 0.0; };
  return p;
}

std::vector<Vec> unit_circle(int n) {
  std::vector<Vec> out;
  for (int j = 0; j < n; ++j) {
    const double th = 2.0 * std::numbers::pi * j / n;
    out.push_back(vec({std::cos(th), std::sin(th)}));
  }
  return out;
}

}  // namespace

TEST_SUITE("transport") {
  TEST_CASE("C(S,T,K) closed forms") {
    for (double K : {0.7, -0.4, 2.0}) {
      const double exact = (1.0 - std::exp(-2.0 * K * 1.3)) / (2.0 * K);
      CHECK(std::abs(c_sup([K](double) { return K; }, 0.0, 1.3) - exact) < 1e-8);
      CHECK(std::abs(c_terminal([K](double) { return K; }, 0.0, 1.3) - exact) < 1e-8);
    }
    CHECK(std::abs(c_sup([](double) { return 0.0; }, 0.0, 1.3) - 1.3) < 1e-12);
    CHECK(c_sup([](double t) { return std::sin(5 * t); }, 0.2, 0.5) > 0.0);
    CHECK_THROWS_AS(c_sup([](double) { return 0.0; }, 1.0, 1.0), ArgumentError);
    CHECK(std::abs(integrate_k([](double t) { return t * t; }, 0.0, 3.0) - 9.0) < 1e-10);
  }

  TEST_CASE("R infimum") {
    const RInfimum flat = r_infimum(2.0, 0.0);
    CHECK(flat.value == 8.0);
    CHECK(std::isinf(flat.r));
    const double J = 1.7, g = 0.1;
    double brute = INFINITY;
    for (int i = 0; i <= 600000; ++i) {
      const double R = std::pow(10.0, -3.0 + 6.0 * i / 600000.0);
      brute = std::min(brute, 4.0 * (1.0 + 1.0 / R) * J * std::exp(8.0 * (1.0 + R) * g));
    }
    const RInfimum inf = r_infimum(J, g);
    CHECK(inf.value <= brute * (1.0 + 1e-12));
    CHECK(inf.value == doctest::Approx(brute).epsilon(1e-8));
    // Stationarity of the log in R: 1 / (R (R + 1)) = 8 g.
    const double R = inf.r;
    CHECK(std::abs(1.0 / (R * R) - 8.0 * g * (1.0 + 1.0 / R)) < 1e-6);
  }

  TEST_CASE("coupling invariants") {
    const auto disk = make_flow("disk-exterior", {});
    const CoupledPaths same = couple_paths(*disk, vec({1.3, 0.2}), vec({1.3, 0.2}), 0.5, 100, {3, 4});
    for (double r : same.rho) CHECK(r == 0.0);

    const auto flat = make_flow("euclid", {{"dim", 2}});
    const CoupledPaths c = couple_paths(*flat, vec({0, 0}), vec({0.3, -0.4}), 1.0, 50, {3, 1});
    for (double r : c.rho) CHECK(r == doctest::Approx(0.5).epsilon(1e-12));

    const double lambda = 1.3;
    const auto ou = make_flow("ou", {{"dim", 2}, {"lambda", lambda}});
    const CoupledPaths o = couple_paths(*ou, vec({0, 0}), vec({1, 0}), 1.0, 200, {3, 2});
    for (std::size_t k = 0; k <= 200; ++k)
      CHECK(o.rho[k] == doctest::Approx(std::pow(1.0 - lambda * 0.005, k)).epsilon(1e-10));
    CHECK(o.sup_distance() == doctest::Approx(1.0));

    // Conformal-Euclid: coordinate gap is frozen, distances scale with a(t).
    const auto ce = make_flow("conformal-euclid", {{"dim", 2}, {"rate", 0.5}});
    const CoupledPaths q = couple_paths(*ce, vec({0, 0}), vec({0.2, 0}), 1.0, 100, {3, 5});
    CHECK(q.terminal_distance() == doctest::Approx(1.5 * 0.2).epsilon(1e-10));

    CHECK_THROWS_AS(couple_paths(*disk, vec({1.3, 0}), vec({0.5, 0}), 0.5, 10, {1, 1}),
                    DomainError);
    CouplingOptions bad;
    bad.beta = vec({1, 2, 3});
    CHECK_THROWS_AS(couple_paths(*flat, vec({0, 0}), vec({0, 0}), 1.0, 10, {1, 1}, bad),
                    ArgumentError);
  }

  TEST_CASE("coupled Y has the unperturbed law") {
    const auto ou = make_flow("ou", {{"dim", 1}, {"lambda", 1.0}});
    const auto spec = ensemble(1.0, 50, 20000);
    CouplingOptions opt;
    opt.beta = vec({0.8});
    const auto y = map_paths<double>(spec.n_paths, spec.exec, [&](std::size_t i) {
      return couple_paths(*ou, vec({0.5}), vec({-0.3}), 1.0, 50, spec.key(i), opt).y.back()(0);
    });
    const auto ind = map_paths<double>(spec.n_paths, spec.exec, [&](std::size_t i) {
      return simulate_path(*ou, vec({-0.3}), identity(1), 1.0, 50, {99, i}).x.back()(0);
    });
    const Estimate a = mc_reduce(y), b = mc_reduce(ind);
    CHECK(std::abs(a.mean - b.mean) < 3.0 * std::hypot(a.se, b.se));
    std::vector<double> ya(y.size()), yb(ind.size());
    for (std::size_t i = 0; i < y.size(); ++i) ya[i] = y[i] * y[i];
    for (std::size_t i = 0; i < ind.size(); ++i) yb[i] = ind[i] * ind[i];
    const Estimate a2 = mc_reduce(ya), b2 = mc_reduce(yb);
    CHECK(std::abs(a2.mean - b2.mean) < 3.0 * std::hypot(a2.se, b2.se));
  }

  TEST_CASE("contraction") {
    const auto ou = make_flow("ou", {{"dim", 2}, {"lambda", 1.0}});
    const auto spec = ensemble(1.0, 2000, 100);
    const Verdict v = check_contraction(*ou, vec({0, 0}), vec({1, 0}), *ou->analytic_bounds(),
                                        2.0, spec, "ou");
    CHECK(v.pass);
    CHECK(std::abs(v.lhs - std::exp(-1.0)) < 1e-3);
    CHECK(v.rhs == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));

    const auto ce = make_flow("conformal-euclid", {{"dim", 2}, {"rate", 0.5}});
    const Verdict w = check_contraction(*ce, vec({0, 0}), vec({0.5, 0}), *ce->analytic_bounds(),
                                        2.0, ensemble(1.0, 100, 100), "ce");
    CHECK(w.pass);
    CHECK(w.lhs == doctest::Approx(w.rhs).epsilon(1e-6));
    CHECK_THROWS_AS(check_contraction(*ou, vec({0, 0}), vec({1, 0}), *ou->analytic_bounds(), 0.5,
                                      spec),
                    ArgumentError);
  }

  TEST_CASE("talagrand: flat saturation, OU margin, entropy identity") {
    const auto flat = make_flow("euclid", {{"dim", 2}});
    const Vec v = vec({0.3, -0.2});
    const auto spec = ensemble(1.0, 100, 400);
    const auto f = check_talagrand(*flat, vec({0, 0}), v, *flat->analytic_bounds(), spec, "flat");
    REQUIRE(f.size() == 3);
    const double target = 2.0 * v.squaredNorm();
    CHECK(f[0].pass);
    CHECK(f[0].lhs == doctest::Approx(target).epsilon(0.02));
    CHECK(f[0].rhs == doctest::Approx(target).epsilon(0.02));
    CHECK(f[1].pass);
    CHECK(f[1].diagnostic("exact") == doctest::Approx(0.5 * v.squaredNorm()));
    CHECK(f[2].pass);

    const auto ou = make_flow("ou", {{"dim", 2}, {"lambda", 1.0}});
    const auto o = check_talagrand(*ou, vec({0.5, 0}), v, *ou->analytic_bounds(), spec, "ou");
    for (const Verdict& r : o) CHECK(r.pass);
    CHECK(o[0].margin > 0.0);

    const auto zero = check_talagrand(*ou, vec({0, 0}), vec({0, 0}), *ou->analytic_bounds(),
                                      ensemble(1.0, 20, 100), "zero");
    CHECK(zero[0].lhs == 0.0);
    CHECK(zero[0].rhs == 0.0);

    const auto hl = make_flow("half-line", {});
    const auto h = check_talagrand(*hl, vec({0.2}), vec({0.5}), *hl->analytic_bounds(),
                                   ensemble(1.0, 200, 400), "half-line");
    for (const Verdict& r : h) CHECK(r.pass);
  }

  TEST_CASE("talagrand with Gaussian initial law") {
    const auto flat = make_flow("euclid", {{"dim", 1}});
    const auto r = check_talagrand_initial(*flat, vec({0}), 0.8, vec({0.5}), vec({0.4}),
                                           *flat->analytic_bounds(), ensemble(1.0, 100, 400));
    REQUIRE(r.size() == 2);
    for (const Verdict& v : r) CHECK(v.pass);
    // a ∥ β in the flat case: sup gap = |a| s² + √2 |β| T.
    const double gap = 0.5 * 0.64 + std::sqrt(2.0) * 0.4;
    CHECK(r[1].lhs == doctest::Approx(gap * gap).epsilon(1e-9));

    const auto ou = make_flow("ou", {{"dim", 2}, {"lambda", 0.5}});
    for (const Verdict& v : check_talagrand_initial(*ou, vec({0, 0}), 1.0, vec({0.3, 0.3}),
                                                    vec({0, 0.5}), *ou->analytic_bounds(),
                                                    ensemble(1.0, 100, 400)))
      CHECK(v.pass);
    const auto sphere = make_flow("shrinking-sphere", {{"r0", 2.0}});
    CHECK_THROWS_AS(check_talagrand_initial(*sphere, vec({0, 0}), 1.0, vec({0, 0}), vec({0, 0}),
                                            *sphere->analytic_bounds(), ensemble(0.5, 10, 100)),
                    ArgumentError);
  }

  TEST_CASE("quantile W2 against Gaussian oracles") {
    const double w = quantile_w2(gaussian_law(0.0, 2.0), gaussian_law(0.7, 1.25));
    const double exact = 0.49 + std::pow(std::sqrt(2.0) - std::sqrt(1.25), 2);
    CHECK(std::abs(w - exact) < 1e-7);
    CHECK(std::abs(quantile_w2(gaussian_law(0.0, 1.0), gaussian_law(0.0, 1.0))) < 1e-14);
    CHECK(std::abs(quantile_w2(gaussian_law(0.0, 2.0), gaussian_law(0.7, 1.25), 20000) - w) <
          1e-6);
    CHECK_THROWS_AS(quantile_w2(gaussian_law(0, 1), gaussian_law(0, 1), 4), ArgumentError);
  }

  TEST_CASE("marginal inequalities and the OW lemma") {
    const auto flat = make_flow("euclid", {{"dim", 1}});
    const auto ou = make_flow("ou", {{"dim", 1}, {"lambda", 1.0}});
    const auto hl = make_flow("half-line", {});
    for (const auto* f : {flat.get(), ou.get(), hl.get()}) {
      const auto r = check_marginal_transport(*f, 0.3, *f->analytic_bounds(), 0.0, 1.0, 0.6, 0.3);
      REQUIRE(r.size() == 3);
      for (const Verdict& v : r) {
        CHECK_MESSAGE(v.pass, f->name() << " " << v.theorem_id << " lhs " << v.lhs << " rhs "
                                        << v.rhs);
        CHECK(v.diagnostic("doubling_change") < 1e-6);
      }
    }
    // Flat oracle: P = N(x, 2), tilt by exp(a y - b y²/2) gives N(m', v').
    const double x = 0.3, a = 0.6, b = 0.3, v = 2.0;
    const double vp = 1.0 / (1.0 / v + b), mp = vp * (x / v + a);
    const double w2 = (mp - x) * (mp - x) + std::pow(std::sqrt(v) - std::sqrt(vp), 2);
    const double kl = 0.5 * (vp / v - 1.0 - std::log(vp / v) + (mp - x) * (mp - x) / v);
    const auto r = check_marginal_transport(*flat, x, *flat->analytic_bounds(), 0.0, 1.0, a, b);
    CHECK(std::abs(r[0].lhs - w2) < 1e-7);
    CHECK(std::abs(r[0].diagnostic("entropy") - kl) < 1e-7);
    CHECK(r[0].rhs == doctest::Approx(4.0 * kl).epsilon(1e-7));
    // Pure tilt saturates the entropy form.
    const auto s = check_marginal_transport(*flat, x, *flat->analytic_bounds(), 0.0, 1.0, a, 0.0);
    CHECK(s[0].lhs == doctest::Approx(s[0].rhs).epsilon(1e-6));
    // f ≡ 1: both sides vanish.
    const auto one = check_marginal_transport(*ou, x, *ou->analytic_bounds(), 0.0, 1.0, 0.0, 0.0);
    CHECK(one[0].lhs < 1e-12);
    CHECK(std::abs(one[0].rhs) < 1e-12);

    const auto sphere = make_flow("shrinking-sphere", {{"r0", 2.0}});
    CHECK_THROWS_AS(transition_law_1d(*sphere, 0.0, 0.0, 0.5), ArgumentError);
  }

  TEST_CASE("psi constants") {
    const auto flat = make_flow("euclid", {{"dim", 1}});
    const ScanRegion region = ScanRegion::interval(-std::numbers::pi, std::numbers::pi, 2001);
    const PsiConstants one = psi_constants(*flat, ScalarField::constant(1, 1.0), 0.8, region);
    CHECK(one.k_psi.front() == 0.0);
    CHECK(one.c == doctest::Approx(4.0 * 0.8).epsilon(1e-12));
    const PsiConstants c = psi_constants(*flat, ScalarField::constant(1, 1.7), 0.8, region);
    CHECK(c.c == doctest::Approx(1.7 * 1.7 * one.c).epsilon(1e-12));
    const PsiConstants s = psi_constants(*flat, sine_psi(0.1), 0.8, region);
    CHECK(s.sup_psi == doctest::Approx(1.1).epsilon(1e-6));
    CHECK(s.sup_grad == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(s.k_psi.front() == doctest::Approx(0.0));
    CHECK(std::isfinite(s.c));
    CHECK(s.c > 4.0 * 1.21 * 0.8);

    const auto ou = make_flow("ou", {{"dim", 1}, {"lambda", 1.0}});
    const PsiConstants o = psi_constants(*ou, sine_psi(0.1), 0.8, region);
    CHECK(o.k1.front() == doctest::Approx(1.0));
    CHECK(o.sup_z == doctest::Approx(std::numbers::pi));
    CHECK(o.k_psi.front() == doctest::Approx(2.0 * std::numbers::pi * 1.1 * 0.1).epsilon(1e-6));
    CHECK_THROWS_AS(psi_constants(*flat, ScalarField::constant(1, -1.0), 0.8, region),
                    ArgumentError);
  }

  TEST_CASE("psi transport: time change and sine coefficient") {
    const auto flat = make_flow("euclid", {{"dim", 1}});
    const ScanRegion region = ScanRegion::interval(-std::numbers::pi, std::numbers::pi, 2001);
    const Vec beta = vec({0.4});
    const auto spec = ensemble(1.0, 100, 200);
    const ScalarField c2 = ScalarField::constant(1, 2.0);
    const auto r = check_psi_transport(*flat, c2, vec({0}), vec({0.5}), beta, region, spec);
    REQUIRE(r.size() == 2);
    for (const Verdict& v : r) CHECK(v.pass);
    CHECK(r[0].lhs == doctest::Approx(2.0 * 4.0 * 0.16).epsilon(1e-9));
    const auto one = check_psi_transport(*flat, ScalarField::constant(1, 1.0), vec({0}),
                                         vec({0.5}), beta, region, spec);
    CHECK(r[0].lhs == doctest::Approx(4.0 * one[0].lhs).epsilon(1e-9));

    const auto s = check_psi_transport(*flat, sine_psi(0.1), vec({0.3}), vec({0.8}), beta, region,
                                       ensemble(1.0, 200, 400));
    for (const Verdict& v : s) CHECK_MESSAGE(v.pass, v.theorem_id << " " << v.lhs << " " << v.rhs);
  }

  TEST_CASE("conformal constants and class D") {
    const auto disk = make_flow("disk-exterior", {});
    const ScanRegion region = ScanRegion::annulus(1.0, 4.0, 61, 16);
    const auto circle = unit_circle(16);
    const ConformalConstants k =
        conformal_constants(*disk, disk_conformal_factor(), 0.5, region, circle);
    CHECK(k.admissible);
    CHECK(k.inf_phi == doctest::Approx(1.0));
    // II = -1 on the circle, N log φ = 2.5 · 0.5.
    CHECK(k.boundary_margin == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(k.sup_grad == doctest::Approx(1.25).epsilon(1e-9));
    // Radial calculus: ½Δφ² = φ(φ'' + φ'/r) + φ'² at r = 1 is -0.3125; the scan minimum
    // is lower.
    CHECK(k.k_phi1.front() < -0.3125);
    CHECK(k.k_phi2.front() == 0.0);
    CHECK(std::isfinite(k.c));

    const ConformalConstants high =
        conformal_constants(*disk, ScalarField::constant(2, 1.5), 0.5, region, circle);
    CHECK_FALSE(high.admissible);
    const ConformalConstants flat_phi =
        conformal_constants(*disk, ScalarField::constant(2, 1.0), 0.5, region, circle);
    CHECK_FALSE(flat_phi.admissible);  // II = -1 < 0
    const auto hs = make_flow("half-space", {{"dim", 2}});
    const ConformalConstants convex = conformal_constants(
        *hs, ScalarField::constant(2, 1.0), 0.5, ScanRegion::annulus(0.5, 2.0, 5, 8),
        {vec({0.3, 0.0}), vec({-1.0, 0.0})});
    CHECK(convex.admissible);
    CHECK(convex.k_phi1.front() == doctest::Approx(0.0));
    CHECK_THROWS_AS(conformal_constants(*make_flow("euclid", {{"dim", 2}}),
                                        ScalarField::constant(2, 1.0), 0.5, region, {}),
                    ArgumentError);
  }

  TEST_CASE("non-convex transport on the disk exterior") {
    const auto base = std::dynamic_pointer_cast<const ConformalFlow>(make_flow("disk-exterior", {}));
    REQUIRE(base);
    const auto r = check_nonconvex_transport(
        *base, disk_conformal_factor(), vec({1.2, 0.0}), vec({1.2, 0.3}), vec({0.3, 0.2}),
        ScanRegion::annulus(1.0, 4.0, 61, 16), unit_circle(16), ensemble(0.5, 50, 100), 100);
    REQUIRE(r.size() == 4);
    for (const Verdict& v : r) CHECK_MESSAGE(v.pass, v.theorem_id << " " << v.lhs << " " << v.rhs);
    CHECK(r[1].n_paths == 100);
  }
}
