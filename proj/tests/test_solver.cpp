// Tests for the slab solver and time loop: exactness on a linear-in-time
// manufactured heat solution, scheme consistency and equivalence, stopping
// rules, the time-continuous interpolant, the degenerate-region detector,
// and the steady maximum-principle subsolution.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "richards/solver.hpp"

using namespace richards;
using Catch::Approx;

namespace {

struct NonlinearSetup {
  TriMesh mesh = unit_square_structured(1);
  PermeabilityField Kbar = PermeabilityField::isotropic(1.0);
  MediumModel model = make_case_nondeg();
  SourceModel source;
  Gravity grav{-1.0, 0.0};

  SlabSolver solver() {
    return SlabSolver(mesh, Kbar, pressure_form(model), source, grav);
  }
  RunConfig config(SchemeKind kind, double tol) {
    RunConfig cfg;
    cfg.T = 0.2;
    cfg.n_slabs = 5;
    cfg.scheme.kind = kind;
    cfg.stop.fixed_tol = tol;
    auto s_init = [](const Vec2& x) { return 0.5 + 0.2 * x.x(); };
    MediumModel mod = model;
    cfg.bc = [mod, s_init](const Vec2& x, double) {
      return mod.capillary(s_init(x));
    };
    cfg.s0 = s_init;
    return cfg;
  }
};

}  // namespace

TEST_CASE("time loop slab count") {
  TriMesh m = unit_square_structured(1);
  PermeabilityField Kb = PermeabilityField::isotropic(1.0);
  MediumModel heat = make_heat_model();
  SourceModel src;
  SlabSolver solver(m, Kb, pressure_form(heat), src, Gravity{0, 0});
  RunConfig cfg;
  cfg.T = 1.0;
  cfg.n_slabs = 25;
  cfg.scheme.kind = SchemeKind::picard;
  cfg.bc = [](const Vec2&, double) { return 0.5; };
  cfg.s0 = [](const Vec2&) { return 0.5; };
  RunResult r = run_time_loop(solver, cfg);
  REQUIRE(r.slabs.size() == 25);
  REQUIRE(r.slabs[0].tau == Approx(0.04).margin(1e-15));
}

TEST_CASE("heat model with linear-in-time P1 solution is exact at nodes") {
  // p_ex = (1+t) x solves dt p - Lap p = x with p_ex on the boundary;
  // backward Euler reproduces affine-in-time solutions exactly.
  TriMesh m = unit_square_structured(1);
  PermeabilityField Kb = PermeabilityField::isotropic(1.0);
  MediumModel heat = make_heat_model();
  SourceModel src;
  src.f = [](double, double x, double, double) { return x; };
  SlabSolver solver(m, Kb, pressure_form(heat), src, Gravity{0, 0});
  RunConfig cfg;
  cfg.T = 0.5;
  cfg.n_slabs = 5;
  cfg.scheme.kind = SchemeKind::modified_picard;
  cfg.stop.fixed_tol = 1e-12;
  cfg.bc = [](const Vec2& x, double t) { return (1 + t) * x.x(); };
  cfg.s0 = [](const Vec2& x) { return x.x(); };
  RunResult r = run_time_loop(solver, cfg);
  for (const auto& slab : r.slabs)
    for (int v = 0; v < m.n_verts(); ++v)
      REQUIRE(slab.q1[v] ==
              Approx((1 + slab.t1) * m.verts[v].x()).margin(1e-9));
}

TEST_CASE("all schemes coincide on the heat model") {
  TriMesh m = unit_square_structured(1);
  PermeabilityField Kb = PermeabilityField::isotropic(1.0);
  MediumModel heat = make_heat_model();
  SourceModel src;
  src.f = [](double, double x, double y, double) { return x * y; };
  SlabSolver solver(m, Kb, pressure_form(heat), src, Gravity{0, 0});
  auto run_with = [&](SchemeKind k) {
    RunConfig cfg;
    cfg.T = 0.2;
    cfg.n_slabs = 2;
    cfg.scheme.kind = k;
    cfg.stop.fixed_tol = 1e-12;
    cfg.bc = [](const Vec2&, double) { return 0.3; };
    cfg.s0 = [](const Vec2&) { return 0.3; };
    return run_time_loop(solver, cfg).slabs.back().q1;
  };
  Vector ref = run_with(SchemeKind::modified_picard);
  for (SchemeKind k :
       {SchemeKind::picard, SchemeKind::newton, SchemeKind::jaeger_kacur,
        SchemeKind::l_scheme, SchemeKind::modified_l_scheme})
    REQUIRE((run_with(k) - ref).norm() < 1e-10);
}

TEST_CASE("nonlinear slab solves") {
  NonlinearSetup S;
  SlabSolver solver = S.solver();

  SECTION("schemes agree on the converged solution") {
    Vector ref;
    for (SchemeKind k :
         {SchemeKind::modified_l_scheme, SchemeKind::newton,
          SchemeKind::picard, SchemeKind::modified_picard,
          SchemeKind::jaeger_kacur}) {
      RunResult r = run_time_loop(solver, S.config(k, 1e-11));
      if (ref.size() == 0)
        ref = r.slabs.back().q1;
      else
        REQUIRE((r.slabs.back().q1 - ref).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }
  SECTION("modified L-scheme contracts on every slab") {
    RunResult r =
        run_time_loop(solver, S.config(SchemeKind::modified_l_scheme, 1e-10));
    for (const auto& slab : r.slabs)
      for (size_t i = 1; i < slab.dq_norms.size(); ++i)
        REQUIRE(slab.dq_norms[i] < slab.dq_norms[i - 1]);
  }
  SECTION("consistency: converged state yields a near-zero increment") {
    double tol = 1e-11;
    RunResult r = run_time_loop(solver, S.config(SchemeKind::newton, tol));
    const auto& slab = r.slabs.back();
    double dqn = 0.0;
    solver.linearization_step(SchemeSpec{SchemeKind::newton}, slab.tau,
                              slab.t1, slab.q0, slab.q1, &dqn);
    REQUIRE(dqn <= 10 * tol);
  }
  SECTION("infinite tolerance stops after one iteration") {
    RunConfig cfg = S.config(SchemeKind::modified_l_scheme, kInf);
    RunResult r = run_time_loop(solver, cfg);
    for (const auto& slab : r.slabs) REQUIRE(slab.iters == 1);
  }
  SECTION("adaptive stopping iterates longer as gamma decreases") {
    // Stub flux estimator = 1, so the rule is eta_lin1 + eta_lin2 <= gamma.
    EtaFCallback stub = [](const SlabFluxData&) { return 1.0; };
    int prev = 0;
    for (double gamma : {1e-1, 1e-4, 1e-7}) {
      RunConfig cfg = S.config(SchemeKind::modified_l_scheme, 0);
      cfg.stop.adaptive = true;
      cfg.stop.gamma = gamma;
      RunResult r = run_time_loop(solver, cfg, stub);
      int iters = r.slabs[0].iters;
      REQUIRE(iters >= prev);
      prev = iters;
    }
    REQUIRE(prev > 1);
  }
}

TEST_CASE("time interpolant") {
  TriMesh m = unit_square_structured(1);
  MediumModel model = make_case_deg();
  Formulation form = total_pressure_form(model);
  // Synthetic nodal total pressures straddling the threshold P_M = 1.
  Vector q0(m.n_verts()), q1(m.n_verts());
  for (int v = 0; v < m.n_verts(); ++v) {
    double x = m.verts[v].x();
    q0[v] = 0.2 + 0.9 * x;   // up to 1.1 > P_M
    q1[v] = 0.5 + 0.8 * x;   // up to 1.3 > P_M
  }
  TimeInterpolant I(m, form, q0, q1, 0.0, 0.1);
  QuadRule rule = tri_rule(5);

  SECTION("endpoint identity Psi_ht(t_n) = Psi_n") {
    for (int t = 0; t < m.n_tris(); ++t)
      for (const auto& qp : rule.pts) {
        auto ps = I.point_state(t, qp.bary);
        REQUIRE(I.psi(0.0, ps) == Approx(ps.Psi_lo).margin(1e-12));
        REQUIRE(I.psi(0.1, ps) == Approx(ps.Psi_hi).margin(1e-12));
        REQUIRE(I.s(0.1, ps) == Approx(ps.S_hi).margin(1e-12));
      }
  }
  SECTION("saturation sandwich between slab-end values") {
    for (int t = 0; t < m.n_tris(); ++t)
      for (const auto& qp : rule.pts) {
        auto ps = I.point_state(t, qp.bary);
        for (double tt : {0.013, 0.05, 0.09}) {
          double sv = I.s(tt, ps);
          REQUIRE(sv >= std::min(ps.S_lo, ps.S_hi) - 1e-12);
          REQUIRE(sv <= std::max(ps.S_lo, ps.S_hi) + 1e-12);
        }
      }
  }
  SECTION("ds_dt matches a central time difference") {
    for (int t = 0; t < m.n_tris(); t += 7)
      for (const auto& qp : rule.pts) {
        auto ps = I.point_state(t, qp.bary);
        for (double tt : {0.02, 0.06}) {
          double h = 1e-7;
          double fd = (I.s(tt + h, ps) - I.s(tt - h, ps)) / (2 * h);
          REQUIRE(I.ds_dt(tt, ps) == Approx(fd).epsilon(1e-5).margin(1e-9));
        }
      }
  }
  SECTION("single-regime points report the nodal slope") {
    int single = 0;
    for (int t = 0; t < m.n_tris(); ++t)
      for (const auto& qp : rule.pts) {
        auto ps = I.point_state(t, qp.bary);
        if (!I.single_regime(ps)) continue;
        ++single;
        REQUIRE(I.ds_dt(0.05, ps) ==
                Approx(I.ds_dt_nodal(ps)).epsilon(1e-10).margin(1e-12));
      }
    REQUIRE(single > 0);
  }
  SECTION("degenerate-region detector") {
    // Threshold crossed where 0.5 + 0.8 x > 1, i.e. x > 0.625 at t = t1.
    std::vector<int> deg = detect_omega_deg(I, m, 0.1);
    REQUIRE(!deg.empty());
    for (int t : deg) {
      double mx = 0.0;
      for (int i = 0; i < 3; ++i) mx = std::max(mx, m.tri_vertex(t, i).x());
      REQUIRE(mx > 0.55);
    }
    // Early in the slab the degenerate set is smaller or equal.
    std::vector<int> deg0 = detect_omega_deg(I, m, 0.0);
    REQUIRE(deg0.size() <= deg.size());
  }
}

TEST_CASE("steady subsolution") {
  TriMesh m = unit_square_structured(1);
  PermeabilityField Kb = PermeabilityField::isotropic(1.0);
  MediumModel model = make_case_nondeg();

  SECTION("constant solution without source and gravity") {
    double J = -1.5;
    SteadySubsolution s = steady_subsolution(
        m, Kb, model, [](int, const Vec2&) { return 0.0; }, Gravity{0, 0}, J);
    for (int v = 0; v < m.n_verts(); ++v)
      REQUIRE(s.z[v] == Approx(J).margin(1e-10));
    REQUIRE(s.S_min == Approx(model.saturation(J)).margin(1e-10));
  }
  SECTION("gravity case obeys the two-sided bound") {
    double J = -1.0;
    Gravity g{-1.0, 0.0};
    SteadySubsolution s = steady_subsolution(
        m, Kb, model, [](int, const Vec2&) { return 0.0; }, g, J);
    // J + min g.x <= z + g.x <= J + max g.x with g.x = -x in [-1, 0].
    for (int v = 0; v < m.n_verts(); ++v) {
      double gx = -m.verts[v].x();
      REQUIRE(s.z[v] + gx >= J - 1.0 - 1e-9);
      REQUIRE(s.z[v] + gx <= J + 0.0 + 1e-9);
    }
  }
}
