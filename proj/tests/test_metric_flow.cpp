#include <doctest.h>

#include "pathflow/errors.hpp"
#include "pathflow/flows.hpp"
#include "pathflow/metric_flow.hpp"
#include "pathflow/rng.hpp"

#include <cmath>
#include <numbers>

using namespace pathflow;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

// Random point for property checks, inside the region where each flow is exercised.
Vec sample_point(const MetricFlow& flow, std::uint64_t i) {
  const PathRng rng({99, i});
  Vec x(flow.dim());
  for (int k = 0; k < flow.dim(); ++k) x(k) = 2.0 * rng.normal_pair(0, static_cast<std::uint32_t>(k))[0];
  if (flow.name() == "disk-exterior") x = x.normalized() * (1.0 + std::abs(x(0)));
  return x;
}

std::vector<std::shared_ptr<const MetricFlow>> all_builtins() {
  std::vector<std::shared_ptr<const MetricFlow>> out;
  out.push_back(make_flow("euclid", {{"dim", 2}}));
  out.push_back(make_flow("ou", {{"dim", 2}, {"lambda", 1.5}}));
  out.push_back(make_flow("conformal-euclid", {{"dim", 2}}));
  out.push_back(make_flow("shrinking-sphere", {}));
  out.push_back(make_flow("half-space", {{"dim", 3}}));
  out.push_back(make_flow("half-line", {}));
  out.push_back(make_flow("disk-exterior", {}));
  return out;
}

}  // namespace

TEST_SUITE("metricflow") {
  TEST_CASE("flat and spatially constant metrics have vanishing Christoffel symbols") {
    for (const auto& flow : {make_flow("euclid", {{"dim", 3}}), make_flow("conformal-euclid", {{"dim", 2}})}) {
      Vec x = Vec::Constant(flow->dim(), 0.7);
      const Christoffel c = christoffel(*flow, 0.4, x);
      for (int k = 0; k < flow->dim(); ++k) CHECK(c.upper[k].norm() == 0.0);
    }
  }

  TEST_CASE("sphere Christoffel symbols match the symbolic fixture") {
    // Fixture: sympy, g = 4/(1+|x|²)² I at x = (0.3, -0.7).
    const auto flow = make_flow("shrinking-sphere", {{"rate", 0.0}});
    const Christoffel c = christoffel(*flow, 0.0, vec2(0.3, -0.7));
    const double a = 0.37974683544303797, b = 0.88607594936708861;
    const double expect[2][2][2] = {{{-a, b}, {b, a}}, {{-b, -a}, {-a, b}}};
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(c.upper[k](i, j) == doctest::Approx(expect[k][i][j]).epsilon(1e-12));
    const Mat ric = flow->ricci(0.0, vec2(0.3, -0.7));
    CHECK(ric(0, 0) == doctest::Approx(1.6023073225444640).epsilon(1e-12));
    CHECK(std::abs(ric(0, 1)) < 1e-12);
  }

  TEST_CASE("Levi-Civita consistency on 100 random samples per flow") {
    for (const auto& flow : all_builtins()) {
      CAPTURE(flow->name());
      for (std::uint64_t i = 0; i < 100; ++i) {
        const Vec x = sample_point(*flow, i);
        const double t = 0.01 * static_cast<double>(i % 50);
        const Christoffel c = christoffel(*flow, t, x);
        const Mat g = flow->metric(t, x);
        CHECK(is_spd(g));
        for (int k = 0; k < flow->dim(); ++k) CHECK((c.upper[k] - c.upper[k].transpose()).norm() < 1e-14);
        // ∂_i g_jk = Γ^l_ij g_lk + Γ^l_ik g_jl, with ∂g by central differences.
        const double h = 1e-5 * (1.0 + x.norm());
        for (int i = 0; i < flow->dim(); ++i) {
          Vec xp = x, xm = x;
          xp(i) += h;
          xm(i) -= h;
          const Mat dg = (flow->metric(t, xp) - flow->metric(t, xm)) / (2.0 * h);
          for (int j = 0; j < flow->dim(); ++j)
            for (int k = 0; k < flow->dim(); ++k) {
              double rhs = 0.0;
              for (int l = 0; l < flow->dim(); ++l) rhs += c.upper[l](i, j) * g(l, k) + c.upper[l](i, k) * g(j, l);
              CHECK(std::abs(dg(j, k) - rhs) <= 1e-6 * (1.0 + std::abs(rhs)));
            }
        }
        // metric_dt against centered differences in t.
        const double ht = 1e-5;
        const Mat gdt = (flow->metric(t + ht, x) - flow->metric(t - ht, x)) / (2.0 * ht);
        CHECK((gdt - flow->metric_dt(t, x)).norm() <= 1e-6 * (1.0 + gdt.norm()));
      }
    }
  }

  TEST_CASE("ricci_zg examples") {
    const auto euclid = make_flow("euclid", {{"dim", 2}});
    CHECK(ricci_zg(*euclid, 0.3, vec2(1, 2)).norm() == 0.0);

    const auto ou = make_flow("ou", {{"dim", 2}, {"lambda", 1.5}});
    const Mat r = ricci_zg(*ou, 0.3, vec2(1, 2));
    CHECK((r - 1.5 * identity(2)).norm() < 1e-14);
    // Finite-difference cross-check of ∇Z = -λI.
    const Vec x = vec2(0.4, -0.2);
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      Vec xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      const Vec col = (ou->drift(0, xp) - ou->drift(0, xm)) / (2 * h);
      CHECK(col(j) == doctest::Approx(-1.5));
    }

    // Shrinking sphere: R^Z = ((d-1)/r² - r'/r) g.
    const double r0 = 1.3, rate = 0.2, t = 0.7;
    const auto sphere = make_flow("shrinking-sphere", {{"r0", r0}, {"rate", rate}});
    const Vec y = vec2(0.5, 1.2);
    const double rt = r0 * (1 - rate * t);
    const double expect = 1.0 / (rt * rt) + rate * r0 / rt;
    const Mat rz = ricci_zg(*sphere, t, y);
    CHECK((rz - expect * sphere->metric(t, y)).norm() < 1e-10 * rz.norm());
    CHECK(sphere->analytic_bounds()->K(t) == doctest::Approx(expect));
  }

  TEST_CASE("expression flow reproduces the analytic sphere") {
    const auto doc = ConfigDocument::parse(
        "[flow]\n"
        "dim = 2\n"
        "metric.11 = 4 / (1 + x1^2 + x2^2)^2\n"
        "metric.22 = 4 / (1 + x1^2 + x2^2)^2\n");
    const auto custom = ExpressionFlow::from_section(doc.require("flow"));
    const auto sphere = make_flow("shrinking-sphere", {{"rate", 0.0}});
    const Vec x = vec2(0.3, -0.7);
    const Christoffel a = christoffel(*custom, 0.0, x);
    const Christoffel b = christoffel(*sphere, 0.0, x);
    for (int k = 0; k < 2; ++k) CHECK((a.upper[k] - b.upper[k]).norm() < 1e-8);
    CHECK((ricci_zg(*custom, 0.0, x) - ricci_zg(*sphere, 0.0, x)).norm() < 1e-5);
  }

  TEST_CASE("expression flow errors carry line numbers") {
    const auto doc = ConfigDocument::parse("[flow]\ndim = 1\nmetric.11 = 1 + y\n");
    try {
      ExpressionFlow::from_section(doc.require("flow"));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
    }
    const auto missing = ConfigDocument::parse("[flow]\ndim = 2\nmetric.11 = 1\n");
    CHECK_THROWS_AS(ExpressionFlow::from_section(missing.require("flow")), ConfigError);
  }

  TEST_CASE("domain errors outside the chart") {
    const auto sphere = make_flow("shrinking-sphere", {});
    CHECK_THROWS_AS(christoffel(*sphere, 0.0, vec2(1e5, 0)), DomainError);
    CHECK_THROWS_AS(ricci_zg(*sphere, 0.0, vec2(NAN, 0)), DomainError);
    CHECK_THROWS_AS(make_flow("nope", {}), ConfigError);
    CHECK_THROWS_AS(make_flow("ou", {{"sigma", 1}}), ConfigError);
  }

  TEST_CASE("boundary geometry") {
    const auto disk = make_flow("disk-exterior", {});
    const BoundaryPoint bp = boundary_point(*disk, 0.0, vec2(1.3, 0.4));
    CHECK(bp.foot.norm() == doctest::Approx(1.0));
    const Mat g = disk->metric(0.0, bp.foot);
    CHECK(bp.normal.dot(g * bp.normal) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(bp.normal.dot(bp.foot) > 0.0);  // inward for the exterior points away from 0
    CHECK(min_second_fundamental(*disk, 0.0, bp) == doctest::Approx(-1.0));

    // II(X, X) = -<∇_X N, X> by finite differences of N along the circle.
    const double theta = 0.3;
    auto normal_at = [&](double th) {
      return boundary_point(*disk, 0.0, vec2(std::cos(th), std::sin(th))).normal;
    };
    const double h = 1e-5;
    const Vec dn = (normal_at(theta + h) - normal_at(theta - h)) / (2 * h);
    const Vec tangent = vec2(-std::sin(theta), std::cos(theta));
    const BoundaryPoint at = boundary_point(*disk, 0.0, vec2(std::cos(theta), std::sin(theta)));
    CHECK(-dn.dot(tangent) == doctest::Approx(tangent.dot(at.second_fundamental * tangent)).epsilon(1e-4));

    const auto half = make_flow("half-space", {{"dim", 2}});
    const BoundaryPoint hp = boundary_point(*half, 0.0, vec2(0.5, 0.2));
    CHECK(hp.foot(1) == doctest::Approx(0.0));
    CHECK(min_second_fundamental(*half, 0.0, hp) == doctest::Approx(0.0));
    CHECK_THROWS_AS(boundary_point(*make_flow("euclid", {}), 0.0, vec1(1.0)), ArgumentError);
  }

  TEST_CASE("scan_bounds") {
    std::vector<double> grid{0.0, 0.25, 0.5};
    std::vector<Vec> pts;
    for (std::uint64_t i = 0; i < 20; ++i) pts.push_back(sample_point(*make_flow("euclid", {{"dim", 2}}), i));
    const auto ou = make_flow("ou", {{"dim", 2}, {"lambda", 1.0}});
    const auto kb = scan_bounds(*ou, grid, pts);
    CHECK(kb.K(0.3) == doctest::Approx(1.0));
    CHECK(kb.provenance == CurvatureBounds::Provenance::Scanned);

    const auto half = make_flow("half-space", {{"dim", 2}});
    std::vector<Vec> bpts{vec2(0.3, 0.1), vec2(-2, 0.5)};
    CHECK(scan_bounds(*half, grid, pts, bpts).sigma(0.1) == doctest::Approx(0.0));

    const auto disk = make_flow("disk-exterior", {});
    std::vector<Vec> dpts{vec2(1.5, 0), vec2(0, 2)};
    std::vector<Vec> circle;
    for (int i = 0; i < 12; ++i) circle.push_back(vec2(std::cos(i * 0.5), std::sin(i * 0.5)) * 1.1);
    CHECK(scan_bounds(*disk, grid, dpts, circle).sigma(0.2) == doctest::Approx(-1.0));

    CHECK_THROWS_AS(scan_bounds(*ou, grid, {}), ArgumentError);
  }

  TEST_CASE("scanned bounds dominate fresh samples and stay below analytic bounds") {
    for (const auto& flow : all_builtins()) {
      CAPTURE(flow->name());
      std::vector<double> grid;
      for (int i = 0; i <= 10; ++i) grid.push_back(0.1 * i);
      std::vector<Vec> pts;
      for (std::uint64_t i = 0; i < 50; ++i) pts.push_back(sample_point(*flow, i));
      const CurvatureBounds scanned = scan_bounds(*flow, grid, pts);
      const CurvatureBounds exact = *flow->analytic_bounds();
      for (double t : grid) CHECK(scanned.K(t) >= exact.K(t) - 1e-6);
      // 1000 fresh (t, x, X) triples: the analytic bound holds everywhere.
      for (std::uint64_t i = 0; i < 1000; ++i) {
        const PathRng rng({5, i});
        const double t = rng.uniform(1, 0);
        const Vec x = sample_point(*flow, 1000 + i);
        Vec v(flow->dim());
        for (int k = 0; k < flow->dim(); ++k) v(k) = rng.normal_pair(2, static_cast<std::uint32_t>(k))[0];
        const double q = v.dot(ricci_zg(*flow, t, x) * v);
        const double n2 = v.dot(flow->metric(t, x) * v);
        CHECK(q >= (exact.K(t) - 1e-6) * n2);
      }
    }
  }

  TEST_CASE("conformal change keeps the boundary and rescales the metric") {
    const auto disk = std::dynamic_pointer_cast<const ConformalFlow>(make_flow("disk-exterior", {}));
    REQUIRE(disk);
    const auto phi = ScalarField::radial(
        2, [](double r) { return 1.5 - 0.5 * std::exp(-2.5 * (r - 1)); },
        [](double r) { return 1.25 * std::exp(-2.5 * (r - 1)); },
        [](double r) { return -3.125 * std::exp(-2.5 * (r - 1)); });
    const auto tilde = conformal_change(*disk, phi);
    const Vec x = vec2(1.2, 0.9);
    const double p = phi.value(0, x);
    CHECK((tilde->metric(0, x) - disk->metric(0, x) / (p * p)).norm() < 1e-14);
    CHECK(tilde->has_boundary());
    // The conformal change makes the circle convex: II~ >= 0 since ∂_r log φ(1) >= 1.
    const BoundaryPoint bp = boundary_point(*tilde, 0.0, vec2(1.0, 0.0));
    CHECK(min_second_fundamental(*tilde, 0.0, bp) >= 0.0);
  }

  TEST_CASE("disk exterior distance") {
    CHECK(disk_exterior_distance(vec2(2, 0), vec2(3, 0)) == doctest::Approx(1.0));
    // Antipodal points on the unit circle: half a turn.
    CHECK(disk_exterior_distance(vec2(1, 0), vec2(-1, 0)) == doctest::Approx(std::numbers::pi));
    // (2,0) to (-2,0): two tangent segments of length √3 plus an arc of π - 2π/3.
    CHECK(disk_exterior_distance(vec2(2, 0), vec2(-2, 0)) ==
          doctest::Approx(2 * std::sqrt(3.0) + std::numbers::pi / 3));
  }
}
