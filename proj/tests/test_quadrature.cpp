// Tests for the triangle and interval quadrature rules: weight normalization,
// monomial exactness against the closed form int_T x^a y^b = a! b! / (a+b+2)!
// on the reference triangle, and Gauss-Legendre exactness on intervals.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "richards/quadrature.hpp"

using namespace richards;

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

// Exact integral of x^a y^b over the reference triangle {x,y>=0, x+y<=1}.
double tri_monomial_exact(int a, int b) {
  return factorial(a) * factorial(b) / factorial(a + b + 2);
}

// Rule applied to x^a y^b on the reference triangle (area 1/2, bary
// coordinates (1-x-y, x, y)).
double tri_apply(const QuadRule& r, int a, int b) {
  double s = 0.0;
  for (const auto& q : r.pts)
    s += q.w * std::pow(q.bary[1], a) * std::pow(q.bary[2], b);
  return 0.5 * s;
}

}  // namespace

TEST_CASE("triangle rule weights sum to one") {
  for (const QuadRule& r :
       {tri_rule_deg5(), tri_rule_collapsed(3), tri_rule_collapsed(6)}) {
    double s = 0.0;
    for (const auto& q : r.pts) {
      s += q.w;
      REQUIRE(q.w > 0.0);
      REQUIRE(q.bary[0] + q.bary[1] + q.bary[2] == Catch::Approx(1.0).margin(1e-14));
    }
    REQUIRE(s == Catch::Approx(1.0).margin(1e-14));
  }
}

TEST_CASE("degree-5 rule integrates monomials up to degree 5 exactly") {
  QuadRule r = tri_rule_deg5();
  for (int a = 0; a <= 5; ++a)
    for (int b = 0; a + b <= 5; ++b)
      REQUIRE(tri_apply(r, a, b) ==
              Catch::Approx(tri_monomial_exact(a, b)).margin(1e-14));
}

TEST_CASE("collapsed rules reach their advertised degree") {
  for (int n = 2; n <= 8; ++n) {
    QuadRule r = tri_rule_collapsed(n);
    REQUIRE(r.degree == 2 * n - 2);
    for (int a = 0; a <= r.degree; ++a)
      for (int b = 0; a + b <= r.degree; ++b)
        REQUIRE(tri_apply(r, a, b) ==
                Catch::Approx(tri_monomial_exact(a, b)).margin(1e-13));
  }
}

TEST_CASE("tri_rule dispatcher meets requested degree") {
  for (int deg = 1; deg <= 14; ++deg) {
    QuadRule r = tri_rule(deg);
    REQUIRE(r.degree >= deg);
    for (int a = 0; a <= deg; ++a)
      for (int b = 0; a + b <= deg; ++b)
        REQUIRE(tri_apply(r, a, b) ==
                Catch::Approx(tri_monomial_exact(a, b)).margin(1e-13));
  }
}

TEST_CASE("Gauss-Legendre nodes integrate polynomials of degree 2n-1") {
  for (int n = 1; n <= 10; ++n) {
    Gauss1D g = gauss_legendre(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += g.w[i] * std::pow(g.x[i], k);
      double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
      REQUIRE(s == Catch::Approx(exact).margin(1e-13));
    }
  }
}

TEST_CASE("Gauss-Legendre on [0,1] is normalized and exact") {
  Gauss1D g = gauss_legendre01(4);
  double s = 0.0, m7 = 0.0;
  for (size_t i = 0; i < g.x.size(); ++i) {
    s += g.w[i];
    m7 += g.w[i] * std::pow(g.x[i], 7);
  }
  REQUIRE(s == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(m7 == Catch::Approx(1.0 / 8.0).margin(1e-14));
}
