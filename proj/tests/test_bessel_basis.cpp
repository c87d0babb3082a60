#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/bessel_prime.hpp>
#include <boost/math/special_functions/factorials.hpp>

#include "doctest.h"

#include "besselqlm/bessel_basis.hpp"

using namespace besselqlm;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

BasisSpec rational(int N, double L) { return {MapKind::Rational, N, L}; }
BasisSpec exponential(int N, double L) { return {MapKind::Exponential, N, L}; }

}  // namespace

TEST_CASE("table: leading coefficient is 1/n! and exponents step by two") {
  for (int N : {0, 1, 5, 10, 40, 100}) {
    const BesselPolyTable table(N);
    for (int n = 0; n <= N; ++n) {
      const auto row = table.terms(n);
      REQUIRE(row.size() == static_cast<std::size_t>((N - n) / 2 + 1));
      CHECK(row[0].coeff == doctest::Approx(1.0 / boost::math::factorial<double>(n)).epsilon(1e-15));
      CHECK(row[0].exponent == n);
      for (std::size_t r = 1; r < row.size(); ++r) CHECK(row[r].exponent == row[r - 1].exponent + 2);
    }
  }
}

TEST_CASE("table: coefficients against explicit factorials for N <= 10") {
  // Independent route: (-1)^r / (r! (n+r)!) from the factorial table.
  for (int N = 0; N <= 10; ++N) {
    const BesselPolyTable table(N);
    for (int n = 0; n <= N; ++n) {
      const auto row = table.terms(n);
      for (std::size_t r = 0; r < row.size(); ++r) {
        const double expect = (r % 2 ? -1.0 : 1.0) /
                              (boost::math::factorial<double>(static_cast<unsigned>(r)) *
                               boost::math::factorial<double>(static_cast<unsigned>(n + r)));
        CHECK(row[r].coeff == doctest::Approx(expect).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("table: ratio recurrence in (t/2) powers and in t powers") {
  for (int N = 0; N <= 10; ++N) {
    const BesselPolyTable table(N);
    for (int n = 0; n <= N; ++n) {
      const auto row = table.terms(n);
      for (std::size_t r = 0; r + 1 < row.size(); ++r) {
        const double k = static_cast<double>(r + 1) * static_cast<double>(n + r + 1);
        // Against (t/2)^(2r+n): ratio -1/((r+1)(n+r+1)).
        CHECK(row[r + 1].coeff / row[r].coeff == doctest::Approx(-1.0 / k).epsilon(1e-15));
        // Against t^(2r+n) the extra 2^-2 per step gives the factor 4.
        const double a_r = row[r].coeff * std::ldexp(1.0, -row[r].exponent);
        const double a_next = row[r + 1].coeff * std::ldexp(1.0, -row[r + 1].exponent);
        CHECK(a_next / a_r == doctest::Approx(-1.0 / (4.0 * k)).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("table: hand-evaluated members") {
  const BesselPolyTable t2(2);
  REQUIRE(t2.terms(1).size() == 1);
  CHECK(t2.eval(1, 0.7) == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(t2.eval(1, 0.3, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t2.eval(1, 0.3, 2) == 0.0);

  const BesselPolyTable t3(3);
  CHECK(t3.eval(0, 1.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(t3.eval(0, 0.5) == doctest::Approx(0.9375).epsilon(1e-15));
  CHECK(t3.eval(0, 0.5, 1) == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK(t3.eval(0, 0.5, 2) == doctest::Approx(-0.5).epsilon(1e-15));

  for (int N : {0, 3, 20}) {
    const BesselPolyTable t(N);
    CHECK(t.eval(0, 0.0) == 1.0);
    for (int n = 1; n <= N; ++n) CHECK(t.eval(n, 0.0) == 0.0);
  }
}

TEST_CASE("table: long truncations match J_n on [0,1]") {
  // Past N = 40 the dropped tail is below 1e-60 for t <= 1, so the truncated
  // series must reproduce the Bessel function of the first kind.
  const BesselPolyTable table(40);
  for (int n = 0; n <= 8; ++n) {
    for (double t : {0.0, 0.05, 0.3, 0.5, 0.77, 1.0}) {
      const double j = boost::math::cyl_bessel_j(n, t);
      CHECK(table.eval(n, t) == doctest::Approx(j).epsilon(1e-14).scale(1e-300));
      if (t > 0.0) {
        const double dj = boost::math::cyl_bessel_j_prime(n, t);
        CHECK(table.eval(n, t, 1) == doctest::Approx(dj).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("table: index and order errors") {
  const BesselPolyTable t(4);
  CHECK_THROWS_AS(t.terms(5), std::out_of_range);
  CHECK_THROWS_AS(t.terms(-1), std::out_of_range);
  CHECK_THROWS_AS(t.eval(0, 0.5, 3), std::invalid_argument);
  CHECK_THROWS_AS(BesselPolyTable(-1), std::invalid_argument);
  CHECK(build_bessel_table(7).order_n_max() == 7);
}

TEST_CASE("basis spec validation") {
  CHECK_NOTHROW(rational(0, 1.0).validate());
  CHECK_THROWS_AS(rational(-1, 1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(rational(3, 0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(exponential(3, -2.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(exponential(3, kInf).validate(), std::invalid_argument);
  CHECK(parse_map_kind("rational") == MapKind::Rational);
  CHECK(parse_map_kind(to_string(MapKind::Exponential)) == MapKind::Exponential);
  CHECK_THROWS_AS(parse_map_kind("chebyshev"), std::invalid_argument);
}

TEST_CASE("eval_basis: spec examples") {
  const BesselPolyTable t3(3);
  for (double L : {0.5, 4.0}) {
    for (int n = 1; n <= 3; ++n) CHECK(eval_basis(rational(3, L), t3, n, 0.0) == 0.0);
    CHECK(eval_basis(rational(3, L), t3, 0, L) == doctest::Approx(0.9375).epsilon(1e-15));
    CHECK(eval_basis(exponential(3, L), t3, 0, kInf) == doctest::Approx(0.75).epsilon(1e-15));
  }
  CHECK_THROWS_AS(eval_basis(rational(3, 1.0), t3, 4, 1.0), std::out_of_range);
  CHECK_THROWS_AS(eval_basis(rational(3, 1.0), t3, 0, -1.0), std::domain_error);
  CHECK_THROWS_AS(eval_basis(rational(4, 1.0), t3, 0, 1.0), std::invalid_argument);
}

TEST_CASE("eval_basis: bounded with the t = 1 limit at infinity") {
  const BesselPolyTable table(12);
  for (MapKind kind : {MapKind::Rational, MapKind::Exponential}) {
    for (double L : {0.5, 2.0, 8.0}) {
      const BasisSpec spec{kind, 12, L};
      for (int n = 0; n <= 12; ++n) {
        const double limit = table.eval(n, 1.0);
        CHECK(eval_basis(spec, table, n, kInf) == limit);
        CHECK(eval_basis(spec, table, n, 1e12) == doctest::Approx(limit).epsilon(1e-9));
        for (double x = 0.0; x < 200.0; x += 0.37) CHECK(std::abs(eval_basis(spec, table, n, x)) <= 1.0);
      }
    }
  }
}

TEST_CASE("map: phi strictly increasing from zero and inverse round trip") {
  for (MapKind kind : {MapKind::Rational, MapKind::Exponential}) {
    for (double L : {0.25, 1.0, 4.0, 16.0}) {
      const BasisSpec spec{kind, 3, L};
      CHECK(domain_map(spec, 0.0).phi == 0.0);
      double prev = -1.0;
      for (int i = 0; i < 1000; ++i) {
        // 1 - exp(-x/L) rounds to 1 near x = 37 L, so stop at 30 L.
        const double x = 30.0 * L * i / 999.0;
        const double phi = domain_map(spec, x).phi;
        CHECK(phi > prev);
        CHECK(phi < 1.0);
        prev = phi;
        CHECK(domain_map(spec, inverse_map(spec, phi)).phi == doctest::Approx(phi).epsilon(1e-14));
      }
      CHECK(domain_map(spec, kInf).phi == 1.0);
      CHECK(inverse_map(spec, 1.0) == kInf);
    }
  }
}

TEST_CASE("eval_basis_deriv: spec examples") {
  const BesselPolyTable t1(1);
  for (MapKind kind : {MapKind::Rational, MapKind::Exponential}) {
    for (double x : {0.0, 0.3, 5.0}) {
      CHECK(eval_basis_deriv({kind, 1, 2.0}, t1, 0, x, 1) == 0.0);
      CHECK(eval_basis_deriv({kind, 1, 2.0}, t1, 0, x, 2) == 0.0);
    }
  }
  const BesselPolyTable t2(2);
  for (double L : {1.0, 4.0}) {
    CHECK(eval_basis_deriv(rational(2, L), t2, 1, 0.0, 1) == doctest::Approx(1.0 / (2.0 * L)));
  }
  CHECK_THROWS_AS(eval_basis_deriv(rational(2, 1.0), t2, 1, 0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(eval_basis_deriv(rational(2, 1.0), t2, 1, 0.5, 3), std::invalid_argument);
}

TEST_CASE("eval_basis_deriv: central differences at x in {0.1, 1, 10}") {
  const double h = 1e-6;
  const BesselPolyTable table(6);
  for (MapKind kind : {MapKind::Rational, MapKind::Exponential}) {
    const BasisSpec spec{kind, 6, 2.0};
    for (int n = 0; n <= 6; ++n) {
      for (double x : {0.1, 1.0, 10.0}) {
        const double fp = eval_basis(spec, table, n, x + h);
        const double fm = eval_basis(spec, table, n, x - h);
        const double f0 = eval_basis(spec, table, n, x);
        const double d1 = eval_basis_deriv(spec, table, n, x, 1);
        const double fd1 = (fp - fm) / (2.0 * h);
        const double scale1 = std::max(std::abs(d1), std::abs(f0));
        CHECK(std::abs(fd1 - d1) <= 1e-6 * scale1);
        // The second difference loses about half the digits, so its check
        // runs at a wider step.
        const double H = 1e-4;
        const double d2 = eval_basis_deriv(spec, table, n, x, 2);
        const double fd2 = (eval_basis(spec, table, n, x + H) - 2.0 * f0 +
                            eval_basis(spec, table, n, x - H)) /
                           (H * H);
        const double scale2 = std::max(std::abs(d2), std::abs(f0));
        CHECK(std::abs(fd2 - d2) <= 1e-4 * scale2);
      }
    }
  }
}

TEST_CASE("property: basis derivative vs finite differences, 100 random cases") {
  std::mt19937 rng(20240611);
  std::uniform_int_distribution<int> pickN(0, 20);
  std::uniform_real_distribution<double> pickL(0.5, 8.0);
  std::uniform_real_distribution<double> pickX(0.05, 20.0);
  const double h = 1e-6;
  for (int c = 0; c < 100; ++c) {
    const MapKind kind = (c % 2) ? MapKind::Rational : MapKind::Exponential;
    const int N = pickN(rng);
    const int n = std::uniform_int_distribution<int>(0, std::min(N, 6))(rng);
    const BasisSpec spec{kind, N, pickL(rng)};
    const BesselPolyTable table(N);
    const double x = pickX(rng);
    const double f0 = eval_basis(spec, table, n, x);
    const double d1 = eval_basis_deriv(spec, table, n, x, 1);
    const double fd1 =
        (eval_basis(spec, table, n, x + h) - eval_basis(spec, table, n, x - h)) / (2.0 * h);
    const double scale = std::max(std::abs(d1), std::abs(f0));
    INFO("case " << c << " kind " << to_string(kind) << " N " << N << " n " << n << " x " << x);
    CHECK(std::abs(fd1 - d1) <= 1e-6 * scale);
  }
}

TEST_CASE("weight: value at zero and unit mass") {
  boost::math::quadrature::exp_sinh<double> integrator;
  for (double L : {0.5, 1.0, 4.0, 10.0}) {
    for (MapKind kind : {MapKind::Rational, MapKind::Exponential}) {
      const BasisSpec spec{kind, 2, L};
      CHECK(weight(spec, 0.0) == doctest::Approx(1.0 / L).epsilon(1e-15));
      for (double x : {0.0, 1.0, 100.0, 1e6}) CHECK(weight(spec, x) >= 0.0);
      CHECK(weight(spec, 30.0 * L) > 0.0);
      const double mass = integrator.integrate([&](double x) { return weight(spec, x); }, 1e-12);
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("project: spec examples") {
  const BesselPolyTable t5(5);
  for (MapKind kind : {MapKind::Rational, MapKind::Exponential}) {
    const BasisSpec spec{kind, 5, 2.0};
    const Projection zero = project([](double) { return 0.0; }, spec, t5);
    for (double a : zero.coefficients) CHECK(a == 0.0);

    const Projection p = project(
        [&](double x) { return 2.0 * eval_basis(spec, t5, 0, x) + 3.0 * eval_basis(spec, t5, 2, x); },
        spec, t5);
    const std::vector<double> expect{2.0, 0.0, 3.0, 0.0, 0.0, 0.0};
    for (int n = 0; n <= 5; ++n) CHECK(std::abs(p.coefficients[n] - expect[n]) <= 1e-8);
    CHECK(p.condition_estimate >= 1.0);
  }
}

TEST_CASE("property: projection idempotence on basis members, 100 random cases") {
  // Past N = 6 the Gram condition estimate exceeds 1e9 and the trailing
  // coefficients inherit rounding noise in f amplified by 1/|B_N| ~ 2^N N!,
  // so the unit-vector form is only checked on well-conditioned draws. The
  // reconstructed function is checked on every draw.
  constexpr double kWellConditioned = 1e9;
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> pickN(0, 15);
  std::uniform_real_distribution<double> pickL(0.5, 8.0);
  int well_conditioned = 0;
  for (int c = 0; c < 100; ++c) {
    const MapKind kind = (c % 2) ? MapKind::Rational : MapKind::Exponential;
    const int N = pickN(rng);
    const int k = std::uniform_int_distribution<int>(0, N)(rng);
    const BasisSpec spec{kind, N, pickL(rng)};
    const BesselPolyTable table(N);
    const Projection p = project([&](double x) { return eval_basis(spec, table, k, x); }, spec, table);
    INFO("case " << c << " kind " << to_string(kind) << " N " << N << " k " << k
                 << " cond " << p.condition_estimate);
    if (p.condition_estimate <= kWellConditioned) {
      ++well_conditioned;
      for (int n = 0; n <= N; ++n) {
        CHECK(std::abs(p.coefficients[n] - (n == k ? 1.0 : 0.0)) <= 1e-8);
      }
    }
    for (double t = 0.0; t < 1.0; t += 1.0 / 64.0) {
      const double x = inverse_map(spec, t);
      double s = 0.0;
      for (int n = 0; n <= N; ++n) s += p.coefficients[n] * eval_basis(spec, table, n, x);
      CHECK(std::abs(s - eval_basis(spec, table, k, x)) <= 1e-8);
    }
  }
  CHECK(well_conditioned >= 30);
}

TEST_CASE("project: residual is weighted-orthogonal to the span") {
  const int N = 8;
  const BesselPolyTable table(N);
  for (MapKind kind : {MapKind::Rational, MapKind::Exponential}) {
    const BasisSpec spec{kind, N, 3.0};
    const auto f = [](double x) { return 1.0 / (1.0 + x) + std::exp(-0.5 * x) * std::sin(x); };
    const Projection p = project(f, spec, table);
    const auto residual = [&](double x) {
      double s = f(x);
      for (int n = 0; n <= N; ++n) s -= p.coefficients[n] * eval_basis(spec, table, n, x);
      return s;
    };
    for (int n = 0; n <= N; ++n) {
      // Independent route: tanh-sinh in t, which tolerates the logarithmic
      // endpoint behaviour the exponential map gives 1/(1+x).
      boost::math::quadrature::tanh_sinh<double> ts;
      const double ip = ts.integrate(
          [&](double t) {
            const double x = inverse_map(spec, t);
            return residual(x) * eval_basis(spec, table, n, x);
          },
          0.0, 1.0, 1e-12);
      INFO("kind " << to_string(kind) << " n " << n);
      CHECK(std::abs(ip) <= 1e-8);
    }
  }
}

TEST_CASE("project: degenerate N = 0 and error paths") {
  const BesselPolyTable t0(0);
  const Projection p = project([](double) { return 2.5; }, rational(0, 1.0), t0);
  REQUIRE(p.coefficients.size() == 1);
  CHECK(p.coefficients[0] == doctest::Approx(2.5));

  CHECK_THROWS_AS(project([](double) { return std::nan(""); }, rational(0, 1.0), t0),
                  ProjectionError);
  // Far past the range where double precision can separate the members.
  const BesselPolyTable t60(60);
  CHECK_THROWS_AS(project([](double) { return 1.0; }, rational(60, 1.0), t60), ProjectionError);
}

TEST_CASE("weighted inner product of the constant is the weight mass") {
  for (MapKind kind : {MapKind::Rational, MapKind::Exponential}) {
    const BasisSpec spec{kind, 0, 1.5};
    const double ip = weighted_inner_product([](double) { return 1.0; }, [](double) { return 1.0; }, spec);
    CHECK(ip == doctest::Approx(1.0).epsilon(1e-13));
  }
}
