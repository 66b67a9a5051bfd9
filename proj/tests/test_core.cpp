#include <doctest.h>

#include "pathflow/config.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/expr.hpp"
#include "pathflow/linalg.hpp"
#include "pathflow/parallel.hpp"
#include "pathflow/rng.hpp"
#include "pathflow/stats.hpp"

#include <cmath>
#include <vector>

using namespace pathflow;

TEST_SUITE("core") {
  TEST_CASE("philox known answers") {
    // Reference vectors published with the Random123 library.
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) ==
          C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::generate(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                               K{0xffffffffu, 0xffffffffu}) ==
          C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::generate(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                               K{0xa4093822u, 0x299f31d0u}) ==
          C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  }

  TEST_CASE("path streams are reproducible and distinct") {
    const PathRng a({7, 3}), b({7, 3}), c({7, 4}), d({8, 3});
    CHECK(a.uniform_pair(5, 0) == b.uniform_pair(5, 0));
    CHECK(a.uniform_pair(5, 0) != c.uniform_pair(5, 0));
    CHECK(a.uniform_pair(5, 0) != d.uniform_pair(5, 0));
    CHECK(a.uniform_pair(5, 0) != a.uniform_pair(6, 0));
    CHECK(a.uniform_pair(5, 0) != a.uniform_pair(5, stream::kBoundary));
    for (int k = 0; k < 1000; ++k) {
      const auto u = a.uniform_pair(static_cast<std::uint64_t>(k), 0);
      CHECK(u[0] > 0.0);
      CHECK(u[0] < 1.0);
    }
  }

  TEST_CASE("normal self-test: 1e5 draws have mean within 4 SE of 0 and unit variance") {
    std::vector<double> z;
    z.reserve(100000);
    for (std::uint64_t p = 0; p < 50000; ++p) {
      const auto pair = PathRng({2024, p}).normal_pair(0, 0);
      z.push_back(pair[0]);
      z.push_back(pair[1]);
    }
    const Estimate m = mc_reduce(z);
    CHECK(std::abs(m.mean) < 4.0 * m.se);
    CHECK(m.se * std::sqrt(static_cast<double>(z.size())) == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("mc_reduce examples") {
    const std::vector<double> ones{1, 1, 1, 1};
    const Estimate a = mc_reduce(ones);
    CHECK(a.mean == 1.0);
    CHECK(a.se == 0.0);
    const std::vector<double> two{0, 2};
    const Estimate b = mc_reduce(two);
    CHECK(b.mean == 1.0);
    CHECK(b.se == doctest::Approx(1.0));
    const std::vector<double> one{3};
    CHECK_THROWS_AS(mc_reduce(one), ArgumentError);
  }

  TEST_CASE("pairwise sum is a fixed tree") {
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / static_cast<double>(i + 1);
    const double s1 = pairwise_sum(v);
    const double s2 = pairwise_sum(v);
    CHECK(s1 == s2);
    double naive = 0.0;
    for (double x : v) naive += x;
    CHECK(s1 == doctest::Approx(naive).epsilon(1e-14));
  }

  TEST_CASE("parallel loop matches serial reference bit for bit") {
    const std::size_t n = 5000;
    auto work = [](std::size_t i) {
      const PathRng rng({11, i});
      double acc = 0.0;
      for (std::uint64_t k = 0; k < 20; ++k) acc += rng.normal_pair(k, 0)[0];
      return acc;
    };
    std::vector<double> serial(n);
    for_each_path_serial(n, [&](std::size_t i) { serial[i] = work(i); });
    for (int workers : {1, 2, 4}) {
      const auto par = map_paths<double>(n, Execution{workers, false}, work);
      CHECK(par == serial);
    }
  }

  TEST_CASE("parallel loop rethrows the lowest failing index") {
    auto fail = [](std::size_t i) {
      if (i == 37 || i == 900) throw TruncationError("exit", i);
    };
    try {
      for_each_path(1000, Execution{4, false}, fail);
      FAIL("expected an exception");
    } catch (const TruncationError& e) {
      CHECK(e.step() == 37);
    }
  }

  TEST_CASE("expressions") {
    const auto vars = flow_variables(2);
    const double v[] = {0.5, 2.0, -1.0};
    CHECK(Expression::parse("1 + 2 * 3", vars).eval(v) == 7.0);
    CHECK(Expression::parse("-x1^2", vars).eval(v) == -4.0);
    CHECK(Expression::parse("2^3^2", vars).eval(v) == 512.0);
    CHECK(Expression::parse("pow(x1, 3) / 4", vars).eval(v) == 2.0);
    CHECK(Expression::parse("exp(0) + log(1) + sin(0) + cos(0) + sqrt(4)", vars).eval(v) == 4.0);
    CHECK(Expression::parse("t * x2", vars).eval(v) == -0.5);
    CHECK(Expression::parse("cos(pi)", vars).eval(v) == doctest::Approx(-1.0));
    CHECK(Expression::parse("1e-3 * 2", vars).eval(v) == doctest::Approx(2e-3));
    CHECK_THROWS_AS(Expression::parse("x3", vars), ConfigError);
    CHECK_THROWS_AS(Expression::parse("foo(1)", vars), ConfigError);
    CHECK_THROWS_AS(Expression::parse("(1 + 2", vars), ConfigError);
    CHECK_THROWS_AS(Expression::parse("1 +", vars), ConfigError);
    CHECK_THROWS_AS(Expression::parse("1 2", vars), ConfigError);
  }

  TEST_CASE("config parsing keeps line numbers") {
    const auto doc = ConfigDocument::parse(
        "# header\n"
        "[scenario]\n"
        "name = demo   # trailing\n"
        "paths = 1000\n"
        "\n"
        "[check.ibp]\n"
        "eps = 0.1, 0.05\n");
    const auto& s = doc.require("scenario");
    CHECK(s.get_string("name", "") == "demo");
    CHECK(s.get_int("paths", 0) == 1000);
    CHECK(doc.require("check.ibp").get_doubles("eps", {}) == std::vector<double>{0.1, 0.05});
    CHECK(doc.with_prefix("check.").size() == 1);
    try {
      s.reject_unknown({"name"});
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 4);
    }
    try {
      ConfigDocument::parse("[a]\nx = 1\nbroken line\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(ConfigDocument::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
    const auto bad = ConfigDocument::parse("[a]\nx = abc\n");
    CHECK_THROWS_AS((void)bad.require("a").get_double("x", 0.0), ConfigError);
  }

  TEST_CASE("linear algebra helpers") {
    Mat a(2, 2);
    a << 0.0, 0.3, -0.3, 0.0;
    const Mat c = cayley(a);
    CHECK((c.transpose() * c - identity(2)).norm() < 1e-14);
    Mat s(2, 2);
    s << 2.0, 0.5, 0.5, 1.0;
    const Mat e = expm_symmetric_neg(s);
    const Mat back = expm_symmetric_neg(-s);
    CHECK((e * back - identity(2)).norm() < 1e-12);
    Mat g(2, 2);
    g << 2.0, 0.3, 0.3, 1.5;
    const Mat u = gram_schmidt(identity(2), g);
    CHECK(frame_defect(u, g) < 1e-14);
    CHECK(min_generalized_eigenvalue(2.0 * g, g) == doctest::Approx(2.0));
    CHECK(op_norm(s) == doctest::Approx((s.eigenvalues().real().maxCoeff())));
    CHECK(is_spd(g));
    CHECK_FALSE(is_spd(-g));
  }
}
