// Tests for the benchmark-case definitions: finite-difference cross-checks of
// the manufactured source terms, consistency of the exact-solution handles
// with the constitutive model, weak-residual vanishing of the exact fields,
// and the heterogeneous-case tensor/boundary/mesh layout.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "richards/cases.hpp"

using namespace richards;
using Catch::Approx;

namespace {

// Numerical source term from the defining pressure-form equation
//   f = dt S(p) + div( kappa(S(p)) (grad p + g) )  [sign: minus divergence of
// the flux -kappa(...)]; nested central differences of step h.
double f_numeric_pressure(const CaseSpec& c, double x, double y, double t,
                          double h) {
  auto S = [&](double xx, double yy, double tt) {
    return c.model.saturation(c.p_exact(Vec2(xx, yy), tt));
  };
  auto p = [&](double xx, double yy) { return c.p_exact(Vec2(xx, yy), t); };
  auto Fx = [&](double xx, double yy) {
    double px = (p(xx + h, yy) - p(xx - h, yy)) / (2 * h);
    return c.model.kappa(S(xx, yy, t)) * (px + c.grav.gx);
  };
  auto Fy = [&](double xx, double yy) {
    double py = (p(xx, yy + h) - p(xx, yy - h)) / (2 * h);
    return c.model.kappa(S(xx, yy, t)) * (py + c.grav.gy);
  };
  double dSdt = (S(x, y, t + h) - S(x, y, t - h)) / (2 * h);
  double divF = (Fx(x + h, y) - Fx(x - h, y)) / (2 * h) +
                (Fy(x, y + h) - Fy(x, y - h)) / (2 * h);
  return dSdt - divF;
}

// Same for the total-pressure form: f = dt theta(Psi) - div(grad Psi + ...).
double f_numeric_total(const CaseSpec& c, double x, double y, double t,
                       double h) {
  auto psi = [&](double xx, double yy, double tt) {
    return c.exact.psi(Vec2(xx, yy), tt);
  };
  auto th = [&](double xx, double yy, double tt) {
    return c.model.theta(psi(xx, yy, tt));
  };
  auto Fx = [&](double xx, double yy) {
    double px = (psi(xx + h, yy, t) - psi(xx - h, yy, t)) / (2 * h);
    return px + c.grav.gx * c.model.kappa(th(xx, yy, t));
  };
  auto Fy = [&](double xx, double yy) {
    double py = (psi(xx, yy + h, t) - psi(xx, yy - h, t)) / (2 * h);
    return py + c.grav.gy * c.model.kappa(th(xx, yy, t));
  };
  double dthdt = (th(x, y, t + h) - th(x, y, t - h)) / (2 * h);
  double divF = (Fx(x + h, y) - Fx(x - h, y)) / (2 * h) +
                (Fy(x, y + h) - Fy(x, y - h)) / (2 * h);
  return dthdt - divF;
}

// Weak residual of the exact fields lifted through the H^-1 machinery;
// must vanish up to quadrature noise when the fields solve the equation.
double exact_weak_residual(const CaseSpec& c, const TriMesh& mesh,
                           const PermeabilityField& Kb, double t) {
  HminusLifting lift(mesh, Kb, 1);
  QuadRule rule = tri_rule(10);
  const CaseSpec* cp = &c;
  ScalarFn density = [cp, t](int, const Vec2& x) {
    return cp->source.f(0.0, x.x(), x.y(), t) - cp->exact.ds_dt(x, t);
  };
  VectorFn vf = [cp, t](int, const Vec2& x) {
    Vec2 g(cp->grav.gx, cp->grav.gy);
    return Vec2(cp->exact.grad_psi(x, t) +
                g * cp->model.kappa(cp->exact.s(x, t)));
  };
  Vector b = assemble_load(lift.space(), density, rule) -
             assemble_flux_load(lift.space(), Kb, vf, rule);
  return lift.norm_load(b);
}

}  // namespace

TEST_CASE("nondegenerate case") {
  CaseSpec c = case_nondegenerate();

  SECTION("boundary value of the exact pressure is 1") {
    for (double s : {0.0, 0.3, 0.8, 1.0}) {
      REQUIRE(c.p_exact(Vec2(0.0, s), 0.7) == Approx(1.0).margin(1e-14));
      REQUIRE(c.p_exact(Vec2(s, 1.0), 0.2) == Approx(1.0).margin(1e-14));
    }
  }
  SECTION("exact saturation stays in (0, 1] on a sample grid") {
    for (int k = 0; k <= 10; ++k)
      for (int j = 0; j <= 50; ++j)
        for (int i = 0; i <= 50; ++i) {
          double sv = c.exact.s(Vec2(i / 50.0, j / 50.0), k / 10.0);
          REQUIRE(sv > 0.0);
          REQUIRE(sv <= 1.0);
        }
  }
  SECTION("exact-solution handles are mutually consistent") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      Vec2 x(U(rng), U(rng));
      double t = U(rng);
      double p = c.p_exact(x, t);
      REQUIRE(c.exact.psi(x, t) == Approx(c.model.kirchhoff(p)).margin(1e-9));
      REQUIRE(c.exact.s(x, t) == Approx(c.model.saturation(p)).margin(1e-9));
    }
  }
  SECTION("space/time derivative handles match finite differences") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(0.05, 0.95);
    double h = 1e-6;
    for (int i = 0; i < 30; ++i) {
      Vec2 x(U(rng), U(rng));
      double t = U(rng);
      Vec2 gfd((c.exact.psi(Vec2(x.x() + h, x.y()), t) -
                c.exact.psi(Vec2(x.x() - h, x.y()), t)) /
                   (2 * h),
               (c.exact.psi(Vec2(x.x(), x.y() + h), t) -
                c.exact.psi(Vec2(x.x(), x.y() - h), t)) /
                   (2 * h));
      REQUIRE((c.exact.grad_psi(x, t) - gfd).norm() < 1e-6);
      double dsfd = (c.exact.s(x, t + h) - c.exact.s(x, t - h)) / (2 * h);
      REQUIRE(c.exact.ds_dt(x, t) == Approx(dsfd).margin(1e-6));
    }
  }
  SECTION("closed-form source matches the finite-difference oracle") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(0.05, 0.95);
    for (int i = 0; i < 100; ++i) {
      double x = U(rng), y = U(rng), t = U(rng);
      double fc = c.source.f(0.0, x, y, t);
      double fn = f_numeric_pressure(c, x, y, t, 1e-5);
      REQUIRE(fc == Approx(fn).margin(1e-5 * (1.0 + std::abs(fc))));
    }
  }
  SECTION("lower bound f_m is below every sampled source value") {
    double fm = c.source.f_m(0.5);
    for (int k = 0; k <= 8; ++k)
      for (int j = 0; j <= 20; ++j)
        for (int i = 0; i <= 20; ++i)
          REQUIRE(fm <= c.source.f(0.0, i / 20.0, j / 20.0, k / 8.0) + 1e-12);
  }
  SECTION("exact fields have vanishing weak residual") {
    TriMesh m = c.mesh(2);
    PermeabilityField Kb(c.K_regions);
    for (double t : {0.25, 1.0})
      REQUIRE(exact_weak_residual(c, m, Kb, t) < 1e-6);
  }
}

TEST_CASE("degenerate case") {
  CaseSpec c = case_degenerate();

  SECTION("threshold crossing at t = 1/sqrt(3)") {
    Vec2 center(0.5, 0.5);
    // max of Psi_exact is at the center: 0.75 (1 + t^2)
    double tc = 1.0 / std::sqrt(3.0);
    REQUIRE(c.exact.psi(center, tc) == Approx(1.0).margin(1e-12));
    REQUIRE(c.exact.psi(center, tc - 0.05) < 1.0);
    REQUIRE(c.exact.psi(center, tc + 0.05) > 1.0);
    REQUIRE(c.exact.s(center, 1.0) == 1.0);  // saturation cap active at t = 1
    REQUIRE(c.exact.s(center, 0.0) < 1.0);
  }
  SECTION("exact-solution handles are mutually consistent") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      Vec2 x(U(rng), U(rng));
      double t = U(rng);
      REQUIRE(c.exact.s(x, t) ==
              Approx(c.model.theta(c.exact.psi(x, t))).margin(1e-12));
      double p = c.p_exact(x, t);
      REQUIRE(c.exact.psi(x, t) == Approx(c.model.kirchhoff(p)).margin(1e-9));
    }
  }
  SECTION("closed-form source matches the finite-difference oracle") {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> U(0.05, 0.95);
    int unsat = 0, sat = 0;
    for (int i = 0; i < 200 && (unsat < 80 || sat < 10); ++i) {
      double x = U(rng), y = U(rng), t = U(rng);
      double v = c.exact.psi(Vec2(x, y), t);
      if (std::abs(v - 1.0) < 0.02) continue;  // keep off the free boundary
      (v < 1.0 ? unsat : sat)++;
      double fc = c.source.f(0.0, x, y, t);
      double fn = f_numeric_total(c, x, y, t, 1e-5);
      REQUIRE(fc == Approx(fn).margin(1e-5 * (1.0 + std::abs(fc))));
    }
    REQUIRE(unsat >= 80);
    REQUIRE(sat >= 10);
  }
  SECTION("exact fields have vanishing weak residual before degeneracy") {
    TriMesh m = c.mesh(2);
    PermeabilityField Kb(c.K_regions);
    REQUIRE(exact_weak_residual(c, m, Kb, 0.3) < 1e-6);
  }
  SECTION("formulation uses the total pressure as primary unknown") {
    Formulation f = c.formulation();
    REQUIRE(f.total_pressure_form);
    REQUIRE(c.bc(Vec2(0.0, 0.5), 0.7) == 0.0);
  }
}

TEST_CASE("realistic case") {
  CaseSpec c = case_realistic();

  SECTION("rotation matrix orthogonality and tensor eigenvalues") {
    double th = M_PI / 3.0;
    Mat2 Q;
    Q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    REQUIRE((Q.transpose() * Q - Mat2::Identity()).norm() < 1e-14);
    REQUIRE(c.K_regions.size() == 2);
    Eigen::SelfAdjointEigenSolver<Mat2> es(c.K_regions[1]);
    REQUIRE(es.eigenvalues()[0] == Approx(0.05).margin(1e-12));
    REQUIRE(es.eigenvalues()[1] == Approx(0.1).margin(1e-12));
  }
  SECTION("mesh regions split at the interface x = 0.5") {
    TriMesh m = c.mesh(1);
    for (int t = 0; t < m.n_tris(); ++t)
      REQUIRE(m.region[t] == (m.centroid(t).x() < 0.5 ? 0 : 1));
    PermeabilityField Kb(c.K_regions);  // accepts the two-region layout
    REQUIRE(Kb.n_regions() == 2);
    REQUIRE(Kb.K_m() == Approx(0.05).margin(1e-12));
  }
  SECTION("boundary markers: pressure-driven inlet/outlet, no-flux rest") {
    TriMesh m = c.mesh(1);
    int n_dir = 0, n_neu = 0;
    for (const MeshEdge& e : m.edges) {
      if (e.t1 != -1) continue;
      Vec2 mid = 0.5 * (m.verts[e.v0] + m.verts[e.v1]);
      if (e.marker > 0) {
        ++n_dir;
        REQUIRE((mid.x() < 1e-9 || mid.x() > 1 - 1e-9));
        REQUIRE(mid.y() < 1.0 / 3.0 + 1e-9);
      } else {
        ++n_neu;
      }
    }
    REQUIRE(n_dir > 0);
    REQUIRE(n_neu > 0);
    REQUIRE(c.bc(Vec2(0.0, 0.1), 0.0) == Approx(0.8));
    REQUIRE(c.bc(Vec2(1.0, 0.1), 0.0) == Approx(-3.0));
  }
  SECTION("discontinuous initial saturation") {
    REQUIRE(c.s0(Vec2(0.25, 0.5)) == Approx(0.9));
    REQUIRE(c.s0(Vec2(0.75, 0.5)) == Approx(0.3));
    REQUIRE(c.s0_inf == Approx(0.3));
  }
  SECTION("no source and no exact solution") {
    REQUIRE(c.source.f(0.3, 0.4, 0.5, 0.6) == 0.0);
    REQUIRE(!c.has_exact);
    REQUIRE(c.neumann_correction);
  }
  SECTION("mesh grading refines toward interface and bottom") {
    TriMesh m = c.mesh(1);
    double h_near = 1e300, h_far = 0.0;
    for (int t = 0; t < m.n_tris(); ++t) {
      Vec2 cen = m.centroid(t);
      if (std::abs(cen.x() - 0.5) < 0.1 && cen.y() < 0.2)
        h_near = std::min(h_near, m.h_K[t]);
      if (cen.x() < 0.2 && cen.y() > 0.8) h_far = std::max(h_far, m.h_K[t]);
    }
    REQUIRE(h_near < h_far);
  }
}

TEST_CASE("case registry") {
  REQUIRE(make_case("nondegenerate").name == "nondegenerate");
  REQUIRE(make_case("degenerate").name == "degenerate");
  REQUIRE(make_case("realistic").name == "realistic");
  REQUIRE_THROWS_AS(make_case("bogus"), std::invalid_argument);
}
