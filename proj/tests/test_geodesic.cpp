#include <doctest.h>

#include "pathflow/errors.hpp"
#include "pathflow/flows.hpp"
#include "pathflow/geodesic.hpp"
#include "pathflow/rng.hpp"

#include <cmath>

using namespace pathflow;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Inverse stereographic projection onto the unit sphere.
Eigen::Vector3d lift(const Vec& x) {
  const double q = 1.0 + x.squaredNorm();
  return {2.0 * x(0) / q, 2.0 * x(1) / q, (x.squaredNorm() - 1.0) / q};
}

}  // namespace

TEST_SUITE("geodesic") {
  TEST_CASE("euclidean: distance |x - y| and identity transport") {
    const auto flow = make_flow("euclid", {{"dim", 2}});
    const auto r = geodesic_and_transport(*flow, 0.0, vec2(0, 0), vec2(3, 4));
    CHECK(r.distance == doctest::Approx(5.0));
    CHECK(r.transport == identity(2));
  }

  TEST_CASE("conformal-euclid: distance a(t)|x - y|") {
    const auto flow = make_flow("conformal-euclid", {{"dim", 2}, {"rate", 0.5}});
    const auto r = geodesic_and_transport(*flow, 2.0, vec2(0, 0), vec2(3, 4));
    CHECK(r.distance == doctest::Approx(2.0 * 5.0));
    CHECK(r.transport == identity(2));
  }

  TEST_CASE("shrinking sphere: great-circle distance and isometric transport") {
    const double r0 = 1.3, rate = 0.2, t = 0.5;
    const auto flow = make_flow("shrinking-sphere", {{"r0", r0}, {"rate", rate}});
    const double radius = r0 * (1.0 - rate * t);
    for (std::uint64_t i = 0; i < 40; ++i) {
      const PathRng rng({17, i});
      const auto a = rng.normal_pair(0, 0), b = rng.normal_pair(1, 0);
      const Vec x = 0.7 * vec2(a[0], a[1]), y = 0.7 * vec2(b[0], b[1]);
      const double angle = std::acos(std::clamp(lift(x).dot(lift(y)), -1.0, 1.0));
      if (angle > 2.8) continue;  // stay clear of the cut locus
      const auto g = geodesic_and_transport(*flow, t, x, y);
      CAPTURE(i);
      CHECK(g.distance == doctest::Approx(radius * angle).epsilon(1e-7));
      const auto back = geodesic_and_transport(*flow, t, y, x);
      CHECK(back.distance == doctest::Approx(g.distance).epsilon(1e-7));
      const Mat gx = flow->metric(t, x), gy = flow->metric(t, y);
      const Mat defect = g.transport.transpose() * gy * g.transport - gx;
      CHECK(defect.norm() <= 1e-6 * gx.norm());
      // Transporting back returns the original vectors.
      CHECK((back.transport * g.transport - identity(2)).norm() < 1e-6);
    }
  }

  TEST_CASE("disk exterior uses the obstacle-aware distance") {
    const auto flow = make_flow("disk-exterior", {});
    const auto r = geodesic_and_transport(*flow, 0.0, vec2(2, 0), vec2(-2, 0));
    CHECK(r.distance == doctest::Approx(disk_exterior_distance(vec2(2, 0), vec2(-2, 0))));
  }

  TEST_CASE("non-convergence is a numeric error carrying the residual") {
    const auto flow = make_flow("shrinking-sphere", {});
    GeodesicOptions opts;
    opts.max_iterations = 0;
    try {
      geodesic_and_transport(*flow, 0.0, vec2(0.1, 0.2), vec2(2.0, -1.0), nullptr, opts);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(e.residual() > 0.0);
    }
    CHECK_THROWS_AS(geodesic_and_transport(*flow, 0.0, vec2(1e5, 0), vec2(0, 0)), DomainError);
  }
}
