// Tests for the P1 finite-element machinery: local assembly against
// hand-integrated matrices, projection orthogonality/idempotence, the
// weighted Raviart-Thomas elementwise projection, SPD solves, and the
// discrete dual-norm lifting benchmarked on the Laplace eigenfunction.

#include <Eigen/IterativeLinearSolvers>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "richards/fem.hpp"

using namespace richards;
using Catch::Approx;

namespace {

TriMesh single_reference_triangle() {
  TriMesh m;
  m.verts = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  m.tris = {{0, 1, 2}};
  richards::detail::finalize_mesh(m, mark_all_dirichlet);
  return m;
}

double field_l2(const P1Space& space, const std::function<double(const Vec2&)>& f,
                const DiscreteField& u, const QuadRule& rule) {
  const TriMesh& m = space.mesh();
  double s = 0.0;
  for (int t = 0; t < m.n_tris(); ++t)
    for (const auto& q : rule.pts) {
      double d = f(bary_point(m, t, q.bary)) - u.eval(t, q.bary);
      s += q.w * m.area[t] * d * d;
    }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("stiffness matrix of the unit right triangle") {
  TriMesh m = single_reference_triangle();
  P1Space sp = P1Space::unconstrained(m);
  SpMat A = assemble_stiffness(sp, PermeabilityField::isotropic(1.0),
                               unit_weight());
  Eigen::Matrix3d exact;
  exact << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      REQUIRE(A.coeff(i, j) == Approx(exact(i, j)).margin(1e-14));
}

TEST_CASE("mass matrix of a triangle") {
  TriMesh m = single_reference_triangle();
  P1Space sp = P1Space::unconstrained(m);
  SpMat M = assemble_mass(sp, unit_weight());
  double A = m.area[0];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      REQUIRE(M.coeff(i, j) ==
              Approx(A / 12.0 * (i == j ? 2.0 : 1.0)).margin(1e-14));
  // Zero weight gives the zero matrix.
  SpMat Z = assemble_mass(sp, [](int, const Vec2&) { return 0.0; });
  REQUIRE(Z.norm() == 0.0);
}

TEST_CASE("assembled matrices are symmetric") {
  TriMesh m = unit_square_structured(1);
  P1Space sp = P1Space::unconstrained(m);
  auto w = [](int, const Vec2& x) { return 1.0 + x.x() * x.y(); };
  SpMat M = assemble_mass(sp, w);
  SpMat A = assemble_stiffness(sp, PermeabilityField::isotropic(2.0), w);
  REQUIRE((SpMat(M.transpose()) - M).norm() < 1e-13);
  REQUIRE((SpMat(A.transpose()) - A).norm() < 1e-13);
}

TEST_CASE("conforming L2 projection") {
  TriMesh m = unit_square_structured(1);
  P1Space sp = P1Space::unconstrained(m);
  QuadRule rule = tri_rule(10);

  SECTION("reproduces P1 data") {
    DiscreteField u =
        l2_project_conforming(sp, [](int, const Vec2& x) { return x.x(); });
    for (int v = 0; v < m.n_verts(); ++v)
      REQUIRE(u.coeffs[v] == Approx(m.verts[v].x()).margin(1e-12));
  }
  SECTION("is idempotent") {
    auto fn = [](int, const Vec2& x) { return std::sin(3 * x.x()) * x.y(); };
    DiscreteField u = l2_project_conforming(sp, fn);
    // Project the projection: evaluate u as the integrand.
    DiscreteField u2 = l2_project_conforming(
        sp, [&](int t, const Vec2& x) {
          // barycentric coordinates of x in triangle t
          auto g = hat_gradients(m, t);
          std::array<double, 3> b{};
          for (int i = 0; i < 3; ++i)
            b[i] = 1.0 / 3.0 + g[i].dot(x - m.centroid(t));
          return u.eval(t, b);
        });
    REQUIRE((u2.coeffs - u.coeffs).norm() < 1e-11);
  }
  SECTION("step function: orthogonality residual") {
    auto step = [](int, const Vec2& x) { return x.x() < 0.5 ? 0.0 : 1.0; };
    DiscreteField u = l2_project_conforming(sp, step, rule);
    // (fn - Pi fn, psi_a) = 0 for all hats (the mesh resolves x = 0.5, so
    // quadrature sees a polynomial on every element).
    Vector b = assemble_load(sp, step, rule);
    SpMat M = assemble_mass(sp, unit_weight(), rule);
    REQUIRE((b - M * u.coeffs).norm() / b.norm() < 1e-10);
  }
  SECTION("is L2-contractive on random fields") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
      double a = U(rng), bb = U(rng), c = U(rng);
      auto fn = [&](int, const Vec2& x) {
        return a * std::sin(4 * x.x()) + bb * std::cos(3 * x.y()) +
               c * x.x() * x.y();
      };
      DiscreteField u = l2_project_conforming(sp, fn, rule);
      double nf = 0.0, nu = 0.0;
      for (int t = 0; t < m.n_tris(); ++t)
        for (const auto& q : rule.pts) {
          Vec2 x = bary_point(m, t, q.bary);
          nf += q.w * m.area[t] * fn(t, x) * fn(t, x);
          nu += q.w * m.area[t] * u.eval(t, q.bary) * u.eval(t, q.bary);
        }
      REQUIRE(std::sqrt(nu) <= std::sqrt(nf) + 1e-12);
    }
  }
}

TEST_CASE("broken L2 projection") {
  TriMesh m = unit_square_structured(1);
  QuadRule rule = tri_rule(10);
  SECTION("reproduces P1 data elementwise") {
    BrokenP1 u = l2_project_broken(m, [](int, const Vec2& x) { return x.y(); });
    for (int t = 0; t < m.n_tris(); ++t)
      for (int i = 0; i < 3; ++i)
        REQUIRE(u.coef[t][i] == Approx(m.tri_vertex(t, i).y()).margin(1e-12));
  }
  SECTION("elementwise orthogonality to P1") {
    auto fn = [](int, const Vec2& x) { return std::exp(x.x() - x.y()); };
    BrokenP1 u = l2_project_broken(m, fn, rule);
    for (int t = 0; t < m.n_tris(); ++t)
      for (int i = 0; i < 3; ++i) {
        double r = 0.0;
        for (const auto& q : rule.pts) {
          Vec2 x = bary_point(m, t, q.bary);
          r += q.w * m.area[t] * (fn(t, x) - u.eval(t, q.bary)) * q.bary[i];
        }
        REQUIRE(std::abs(r) < 1e-12);
      }
  }
}

TEST_CASE("weighted RT projection") {
  TriMesh m = unit_square_structured(1);
  Mat2 K;
  K << 2.0, 0.3, 0.3, 1.0;
  PermeabilityField Kbar({K});
  QuadRule rule = tri_rule(10);

  SECTION("reproduces constants and affine fields") {
    BrokenRT1 c = rt_project(m, Kbar,
                             [](int, const Vec2&) { return Vec2(0.7, -0.3); },
                             rule);
    BrokenRT1 a = rt_project(
        m, Kbar,
        [](int, const Vec2& x) {
          return Vec2(1.0 + 2.0 * x.x(), -0.5 + 0.25 * x.y());
        },
        rule);
    for (int t = 0; t < m.n_tris(); ++t)
      for (const auto& q : rule.pts) {
        Vec2 x = bary_point(m, t, q.bary);
        REQUIRE((c.eval(t, x) - Vec2(0.7, -0.3)).norm() < 1e-11);
        Vec2 ax(1.0 + 2.0 * x.x(), -0.5 + 0.25 * x.y());
        REQUIRE((a.eval(t, x) - ax).norm() < 1e-11);
      }
  }
  SECTION("K-weighted orthogonality for a transcendental field") {
    auto vf = [](int, const Vec2& x) { return Vec2(std::sin(x.x()), 0.0); };
    BrokenRT1 u = rt_project(m, Kbar, vf, rule);
    for (int t = 0; t < m.n_tris(); ++t) {
      Vec2 c = m.centroid(t);
      double h = m.h_K[t];
      for (int i = 0; i < 8; ++i) {
        double r = 0.0;
        for (const auto& q : rule.pts) {
          Vec2 x = bary_point(m, t, q.bary);
          Vec2 bas[8];
          BrokenRT1::basis((x - c) / h, bas);
          r += q.w * m.area[t] * (vf(t, x) - u.eval(t, x)).dot(K * bas[i]);
        }
        REQUIRE(std::abs(r) < 1e-10);
      }
    }
  }
}

TEST_CASE("solve_spd basics") {
  SpMat I(3, 3);
  I.setIdentity();
  Vector rhs(3);
  rhs << 1, 2, 3;
  REQUIRE((solve_spd(I, rhs) - rhs).norm() < 1e-14);

  SpMat A(2, 2);
  A.insert(0, 0) = 2;
  A.insert(0, 1) = 1;
  A.insert(1, 0) = 1;
  A.insert(1, 1) = 2;
  Vector b(2);
  b << 3, 3;
  Vector x = solve_spd(A, b);
  REQUIRE(x[0] == Approx(1.0).margin(1e-13));
  REQUIRE(x[1] == Approx(1.0).margin(1e-13));
}

TEST_CASE("direct and CG solves agree on a stiffness system") {
  TriMesh m = unit_square_structured(2);
  P1Space sp = P1Space::homogeneous(m);
  SpMat A = assemble_stiffness(sp, PermeabilityField::isotropic(1.0),
                               unit_weight());
  Vector b = assemble_load(sp, [](int, const Vec2& x) {
    return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y());
  });
  SpMat A_ff;
  Vector b_f;
  reduce_system(sp, A, b, A_ff, b_f);
  Vector xd = solve_spd(A_ff, b_f);
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg(A_ff);
  cg.setTolerance(1e-14);
  Vector xc = cg.solve(b_f);
  REQUIRE((xd - xc).norm() / xd.norm() < 1e-10);
}

TEST_CASE("dual-norm lifting: eigenfunction benchmark") {
  // rho = sin(pi x) sin(pi y) on the unit square: the first Laplace
  // eigenfunction, so ||rho||_{H^-1} = ||rho||_{L2} / sqrt(2 pi^2)
  //                                  = 1/(2 sqrt(2) pi) ~ 0.112540.
  TriMesh m = unit_square_structured(4);
  PermeabilityField Kb = PermeabilityField::isotropic(1.0);
  HminusLifting lift(m, Kb, 1);
  auto rho = [](int, const Vec2& x) {
    return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y());
  };
  double exact = 1.0 / (2.0 * std::sqrt(2.0) * M_PI);
  double got = lift.norm_density(rho);
  REQUIRE(std::abs(got - exact) / exact < 0.02);

  SECTION("zero functional and homogeneity") {
    REQUIRE(lift.norm_density([](int, const Vec2&) { return 0.0; }) == 0.0);
    double c = -3.75;
    double scaled = lift.norm_density(
        [&](int t, const Vec2& x) { return c * rho(t, x); });
    REQUIRE(scaled == Approx(std::abs(c) * got).margin(1e-12));
  }
}

TEST_CASE("local dual norm: homogeneity and positivity") {
  TriMesh m = unit_square_structured(1);
  PermeabilityField Kb = PermeabilityField::isotropic(1.0);
  std::vector<int> patch = m.patch[m.tris[0][0]];
  auto rho = [](int, const Vec2& x) { return 1.0 + x.x(); };
  double n1 = hminus_norm_local(m, Kb, patch, rho);
  REQUIRE(n1 > 0.0);
  double n2 = hminus_norm_local(m, Kb, patch, [&](int t, const Vec2& x) {
    return 2.0 * rho(t, x);
  });
  REQUIRE(n2 == Approx(2.0 * n1).margin(1e-12));
  REQUIRE(hminus_norm_local(m, Kb, {}, rho) == 0.0);
}
