#include <doctest.h>

#include "pathflow/errors.hpp"
#include "pathflow/flows.hpp"
#include "pathflow/multfunc.hpp"

#include <cmath>

using namespace pathflow;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) out(i++) = a;
  return out;
}

FramedPath path_for(const MetricFlow& flow, const Vec& x0, double T, std::size_t n,
                    std::uint64_t i) {
  return simulate_path(flow, x0, initial_frame(flow, x0), T, n, {97, i});
}

}  // namespace

TEST_SUITE("multfunc") {
  TEST_CASE("flat without drift: Q is the identity") {
    const auto flow = make_flow("euclid", {{"dim", 3}});
    const auto p = path_for(*flow, vec({0, 0, 0}), 1.0, 100, 0);
    const auto q = evolve_q_projected(*flow, p, *flow->analytic_bounds(), 0);
    for (const Mat& m : q.q) CHECK((m - identity(3)).norm() == 0.0);
    CHECK(q.at(0) == identity(3));
  }

  TEST_CASE("OU: Q_{0,s} = exp(-lambda s) I") {
    const auto flow = make_flow("ou", {{"dim", 2}, {"lambda", 1.0}});
    const auto p = path_for(*flow, vec({0.3, 0.1}), 1.0, 10000, 0);
    const auto q = evolve_q_projected(*flow, p, *flow->analytic_bounds(), 0);
    double worst = 0.0;
    for (std::size_t k = 0; k <= 10000; ++k)
      worst = std::max(worst, (q.at(k) - std::exp(-p.times[k]) * identity(2)).norm());
    CHECK(worst < 1e-6);
    const auto pen = evolve_q_penalized(*flow, p, *flow->analytic_bounds(), 0, 0.01);
    for (std::size_t k = 0; k <= 10000; k += 997) CHECK(pen.at(k) == q.at(k));
  }

  TEST_CASE("half-line: Q vanishes from the first hit on") {
    const auto flow = make_flow("half-line", {});
    const auto p = path_for(*flow, vec({0.3}), 1.0, 400, 3);
    const auto q = evolve_q_projected(*flow, p, *flow->analytic_bounds(), 0);
    std::size_t first = p.steps();
    for (std::size_t k = 0; k < p.steps(); ++k)
      if (p.hit[k]) {
        first = k;
        break;
      }
    REQUIRE(first < p.steps());
    for (std::size_t k = 0; k <= first; ++k) CHECK(q.at(k)(0, 0) == 1.0);
    for (std::size_t k = first + 1; k <= p.steps(); ++k) CHECK(q.at(k)(0, 0) == 0.0);
  }

  TEST_CASE("lifted forms: symmetric R_u, rank-one projectors, annihilation at hits") {
    const auto flow = make_flow("disk-exterior", {});
    const auto p = path_for(*flow, vec({1.02, 0.1}), 0.5, 200, 1);
    const auto forms = lift_forms(*flow, p);
    const auto q = evolve_q(step_factors(forms, QScheme::Projected), 0);
    int hits = 0;
    for (std::size_t k = 0; k < p.steps(); ++k) {
      CHECK((forms.r_u[k] - forms.r_u[k].transpose()).norm() == 0.0);
      if (!p.hit[k]) continue;
      ++hits;
      const Mat& pu = forms.p_u[k + 1];
      CHECK((pu * pu - pu).norm() < 1e-12);
      CHECK(pu.trace() == doctest::Approx(1.0));
      CHECK((q.at(k + 1) * pu).norm() < 1e-12);
      // Exterior of the unit circle: II = -1 on the unit tangent.
      CHECK(forms.ii_u[k + 1].trace() == doctest::Approx(-1.0).epsilon(1e-6));
    }
    CHECK(hits > 0);
  }

  TEST_CASE("shrinking sphere: R_u = K(t) I") {
    const auto flow = make_flow("shrinking-sphere", {{"r0", 1.0}, {"rate", 0.2}});
    const auto p = path_for(*flow, vec({0.2, -0.3}), 1.0, 50, 2);
    const auto forms = lift_forms(*flow, p);
    const auto bounds = *flow->analytic_bounds();
    // R^Z = K(t) g, so the lift is K(t) uᵀ g u (the identity up to frame drift).
    for (std::size_t k = 0; k < p.steps(); k += 7) {
      const Mat uu = p.u[k].transpose() * flow->metric(p.times[k], p.x[k]) * p.u[k];
      CHECK((forms.r_u[k] - bounds.K(p.times[k]) * uu).norm() < 1e-5);
    }
  }

  TEST_CASE("penalized scheme approaches the projected one as eps shrinks") {
    const auto flow = make_flow("half-line", {});
    int monotone = 0;
    const int n = 40;
    for (int i = 0; i < n; ++i) {
      const auto p = path_for(*flow, vec({0.0}), 1.0, 200, static_cast<std::uint64_t>(i));
      const auto forms = lift_forms(*flow, p);
      const auto proj = evolve_q(step_factors(forms, QScheme::Projected), 0);
      double prev = INFINITY;
      bool ok = true;
      for (double eps : {0.1, 0.01, 0.001}) {
        const auto pen = evolve_q(step_factors(forms, QScheme::Penalized, eps), 0);
        double sup = 0.0;
        for (std::size_t k = 0; k <= p.steps(); ++k)
          sup = std::max(sup, op_norm(pen.at(k) - proj.at(k)));
        ok = ok && sup < prev;
        prev = sup;
      }
      monotone += ok ? 1 : 0;
    }
    CHECK(monotone >= 38);
  }

  TEST_CASE("cocycle: products of the same factors compose") {
    const auto ou = make_flow("ou", {{"dim", 2}, {"lambda", 1.0}});
    const auto p = path_for(*ou, vec({0.0, 0.0}), 1.0, 200, 4);
    const auto a = step_factors(lift_forms(*ou, p), QScheme::Projected);
    CHECK(cocycle_check(a, 0, 100, 200) < 1e-12);
    const auto hl = make_flow("half-line", {});
    const auto ph = path_for(*hl, vec({0.1}), 1.0, 200, 4);
    const auto b = step_factors(lift_forms(*hl, ph), QScheme::Projected);
    CHECK(cocycle_check(b, 0, 50, 200) <= 5.0 * ph.dt);
    CHECK(cocycle_check(b, 20, 20, 20) == 0.0);
    CHECK_THROWS_AS(cocycle_check(b, 10, 5, 20), ArgumentError);
  }

  TEST_CASE("norm bound holds path-wise with (1 + 10 dt) slack") {
    struct Case {
      const char* name;
      FlowParams params;
      Vec x0;
    };
    const std::vector<Case> cases{{"ou", {{"dim", 2}, {"lambda", 1.0}}, vec({0.5, 0.5})},
                                  {"disk-exterior", {}, vec({1.1, 0.0})},
                                  {"shrinking-sphere", {{"r0", 2.0}}, vec({0.1, 0.2})}};
    for (const auto& c : cases) {
      const auto flow = make_flow(c.name, c.params);
      const auto bounds = *flow->analytic_bounds();
      std::size_t bad = 0;
      for (std::uint64_t i = 0; i < 30; ++i) {
        const auto p = path_for(*flow, c.x0, 0.5, 100, i);
        const auto q = evolve_q_projected(*flow, p, bounds, 0);
        bad += count_bound_violations(q, p, bounds);
      }
      CHECK_MESSAGE(bad == 0, c.name);
    }
  }

  TEST_CASE("errors") {
    const auto flow = make_flow("euclid", {{"dim", 1}});
    const auto p = path_for(*flow, vec({0.0}), 1.0, 10, 0);
    const auto forms = lift_forms(*flow, p);
    CHECK_THROWS_AS(step_factors(forms, QScheme::Penalized, 0.0), ArgumentError);
    const auto q = evolve_q(step_factors(forms, QScheme::Projected), 3);
    CHECK_THROWS_AS(q.at(2), ArgumentError);
    CHECK_THROWS_AS(evolve_q(step_factors(forms, QScheme::Projected), 11), ArgumentError);
  }
}
