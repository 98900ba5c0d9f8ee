// End-to-end pipeline for one benchmark run:
//   case -> mesh -> time loop -> per-slab flux equilibration -> estimators
//   -> Gronwall coefficient functions -> reliability bounds (eta_L2, eta_H1)
//   -> exact/reference error measures, distances, and effectivity indices.
//
// Also provides ReferenceSolution, which wraps a finished fine run as an
// ExactSolution (point location by brute-force barycentric test, time
// location by slab) so a coarse run can be measured against it.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "richards/cases.hpp"
#include "richards/equilibration.hpp"
#include "richards/estimators.hpp"
#include "richards/solver.hpp"

namespace richards {

struct DriverConfig {
  std::string case_id = "nondegenerate";
  int level = 1;
  SchemeSpec scheme;            // default: modified L-scheme, M = 1
  bool adaptive = false;        // stopping: adaptive(gamma) vs fixed(tol)
  double gamma = 0.1;
  double fixed_tol = 1e-4;
  double lambda = 0.0;          // <= 0: case default
  int n_slabs = 0;              // <= 0: 25 * level (tau = 0.04 / level)
  int quad_degree = 10;
  bool compute_local = false;   // local effectivities on the final slab
  // Force the generic ODE saturation lower bound even when the case supplies
  // a sharper closed-form bound.
  bool s_m_ode = false;
};

struct SlabSummary {
  double t0 = 0, t1 = 0;
  int iters = 0;
  // end-of-slab (t = t1) global estimator values
  double etaF = 0, etaQdG = 0, etaQdF = 0, etaQdT = 0, etaOsc = 0, etaDeg = 0,
         etaR = 0, etaJH1 = 0, etaLin1 = 0, etaLin2 = 0;
  double eta_LB = 0;
  // against the exact/reference solution (0 when unavailable)
  double dist = 0, eff_lb = 0, err_s_l2 = 0, err_psi_h1 = 0;
};

struct DriverResult {
  CaseSpec spec;
  DriverConfig config;
  double lambda = 0.0;
  std::shared_ptr<MediumModel> model;  // owner of the formulation's model
  std::shared_ptr<TriMesh> mesh;
  std::shared_ptr<PermeabilityField> Kbar;
  Formulation form;
  RunResult run;
  std::vector<SlabEstimators> est;
  std::vector<SlabErrors> errs;  // empty when no exact solution
  BoundFunctions bounds;         // one sample per slab (at t_n)
  std::string s_m_source;        // "case" or "ode": origin of the S_m samples
  double eta_ini_l2 = 0, eta_ini_hm = 0;
  ReliabilityResult rel;
  ErrorResult em;                    // exact error measures
  double eff_L2 = 0, eff_H1 = 0;     // eta / E
  double final_l2 = 0, final_hm = 0; // ||(s - s_ht)(T)||
  std::vector<SlabSummary> rows;
  // per-element data of the final slab (for field output / local indices)
  std::vector<double> etaF_T;      // flux estimator at t = T
  std::vector<double> local_eff;   // dist / lower bound, final slab
  Vector S_T;                      // nodal saturation at t = T

  bool has_exact() const { return !errs.empty(); }
};

// ---------------------------------------------------------------------------
// A finished run usable as a reference solution on another mesh
// ---------------------------------------------------------------------------
class ReferenceSolution {
  struct Data {
    MediumModel model;
    Formulation form;
    TriMesh mesh;
    RunResult run;
    double eps = 1e-10;

    int locate(const Vec2& x, std::array<double, 3>* bary) const {
      int best = -1;
      double best_min = -1e300;
      for (int t = 0; t < mesh.n_tris(); ++t) {
        auto b = SlabSolver::barycentric(mesh, t, x);
        double mn = std::min({b[0], b[1], b[2]});
        if (mn > best_min) {
          best_min = mn;
          best = t;
          *bary = b;
          if (mn >= 0.0) break;  // strictly inside; done
        }
      }
      return best;
    }
    const SlabRecord& slab_of(double t) const {
      for (const auto& s : run.slabs)
        if (t <= s.t1 + eps) return s;
      return run.slabs.back();
    }
  };
  std::shared_ptr<Data> d_;

 public:
  ReferenceSolution(const MediumModel& model, bool total_pressure,
                    TriMesh mesh, RunResult run) {
    d_ = std::make_shared<Data>();
    d_->model = model;
    d_->form = total_pressure ? total_pressure_form(d_->model)
                              : pressure_form(d_->model);
    d_->mesh = std::move(mesh);
    d_->run = std::move(run);
  }

  ExactSolution exact() const {
    auto d = d_;
    ExactSolution ex;
    ex.psi = [d](const Vec2& x, double t) {
      const SlabRecord& s = d->slab_of(t);
      TimeInterpolant I(d->mesh, d->form, s.q0, s.q1, s.t0, s.t1);
      std::array<double, 3> b;
      int tri = d->locate(x, &b);
      return I.psi(std::max(t, s.t0 + 1e-14), I.point_state(tri, b));
    };
    ex.grad_psi = [d](const Vec2& x, double t) {
      const SlabRecord& s = d->slab_of(t);
      TimeInterpolant I(d->mesh, d->form, s.q0, s.q1, s.t0, s.t1);
      std::array<double, 3> b;
      int tri = d->locate(x, &b);
      return I.grad_psi(std::max(t, s.t0 + 1e-14), I.point_state(tri, b));
    };
    ex.s = [d](const Vec2& x, double t) {
      const SlabRecord& s = d->slab_of(t);
      TimeInterpolant I(d->mesh, d->form, s.q0, s.q1, s.t0, s.t1);
      std::array<double, 3> b;
      int tri = d->locate(x, &b);
      return I.s(std::max(t, s.t0 + 1e-14), I.point_state(tri, b));
    };
    ex.ds_dt = [d](const Vec2& x, double t) {
      const SlabRecord& s = d->slab_of(t);
      TimeInterpolant I(d->mesh, d->form, s.q0, s.q1, s.t0, s.t1);
      std::array<double, 3> b;
      int tri = d->locate(x, &b);
      return I.ds_dt(std::max(t, s.t0 + 1e-14), I.point_state(tri, b));
    };
    return ex;
  }
};

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------
// `reference`: optional substitute for the exact solution (e.g. a fine run).
inline DriverResult run_case(const DriverConfig& cfg,
                             const ExactSolution* reference = nullptr) {
  DriverResult R;
  R.spec = make_case(cfg.case_id);
  R.config = cfg;
  R.lambda = cfg.lambda > 0 ? cfg.lambda : R.spec.lambda;
  R.model = std::make_shared<MediumModel>(R.spec.model);
  R.form = R.spec.total_pressure_primary ? total_pressure_form(*R.model)
                                         : pressure_form(*R.model);
  R.mesh = std::make_shared<TriMesh>(R.spec.mesh(cfg.level));
  R.Kbar = std::make_shared<PermeabilityField>(R.spec.K_regions);

  QuadRule rule = tri_rule(cfg.quad_degree);
  SlabSolver solver(*R.mesh, *R.Kbar, R.form, R.spec.source, R.spec.grav,
                    rule);
  EstimatorEngine eng(*R.mesh, *R.Kbar, R.form, R.spec.source, R.spec.grav,
                      rule);
  RTN2Space rt2(*R.mesh);

  RunConfig rc;
  rc.T = R.spec.T;
  rc.n_slabs = cfg.n_slabs > 0 ? cfg.n_slabs : 25 * cfg.level;
  rc.scheme = cfg.scheme;
  rc.stop.adaptive = cfg.adaptive;
  rc.stop.gamma = cfg.gamma;
  rc.stop.fixed_tol = cfg.fixed_tol;
  rc.bc = R.spec.bc;
  rc.s0 = R.spec.s0;
  R.run = run_time_loop(solver, rc,
                        cfg.adaptive ? eng.adaptive_callback(rt2) : nullptr);

  const ExactSolution* ex =
      reference ? reference : (R.spec.has_exact ? &R.spec.exact : nullptr);

  std::vector<double> t_grid = {0.0}, c_hinf, S_m_grid;
  for (const auto& s : R.run.slabs) t_grid.push_back(s.t1);
  if (R.spec.s_min && !cfg.s_m_ode) {
    R.s_m_source = "case";
    for (double t : t_grid) S_m_grid.push_back(R.spec.s_min(t));
  } else {
    R.s_m_source = "ode";
    S_m_grid =
        lower_bound_time(*R.model, R.spec.source, R.spec.s0_inf, t_grid);
  }

  std::vector<SlabTimeRule> times;
  for (size_t n = 0; n < R.run.slabs.size(); ++n) {
    const SlabRecord& slab = R.run.slabs[n];
    // reconstruct from the final linearization pair (q_pre, q1): q1 solves
    // that linear system exactly, so the patch problems are compatible
    SlabFluxData data = solver.flux_data(cfg.scheme, slab.tau, slab.t1,
                                         slab.q0, slab.q_pre, slab.q1);
    EquilibratedFlux sigma = equilibrate_flux(rt2, *R.Kbar, data, rule);
    R.est.push_back(eng.slab_estimators(slab, data, sigma, cfg.adaptive,
                                        R.spec.neumann_correction));
    TimeInterpolant I(*R.mesh, R.form, slab.q0, slab.q1, slab.t0, slab.t1);
    c_hinf.push_back(eng.c_inf(I, slab.t1));
    if (ex) R.errs.push_back(eng.slab_errors(I, *ex));
    times.push_back(R.est.back().times);
    if (n + 1 == R.run.slabs.size()) {
      R.etaF_T = R.est.back().etaF[3];
      R.S_T = Vector(R.mesh->n_verts());
      for (int v = 0; v < R.mesh->n_verts(); ++v)
        R.S_T[v] = R.form.sat(slab.q1[v]);
      if (ex) {
        R.final_l2 = eng.err_l2_at(I, *ex, R.spec.T);
        R.final_hm = eng.err_hm_at(I, *ex, R.spec.T);
      }
    }
  }

  GeomConstants geom;
  geom.K_m = R.Kbar->K_m();
  geom.K_M = R.Kbar->K_M();
  geom.g_norm = R.spec.grav.norm();
  geom.h_Omega = R.mesh->diameter();
  std::vector<double> t_slab(t_grid.begin() + 1, t_grid.end());
  std::vector<double> S_m(S_m_grid.begin() + 1, S_m_grid.end());
  R.bounds = bound_quantities(*R.model, R.spec.source, t_slab, S_m, c_hinf,
                              geom);

  R.eta_ini_l2 = eng.ini_l2(R.spec.s0, R.run.S0h);
  R.eta_ini_hm = eng.ini_hminus(R.spec.s0, R.run.S0h);
  R.rel = reliability_bounds(R.est, R.eta_ini_l2, R.eta_ini_hm, R.bounds,
                             R.lambda);
  if (ex) {
    R.em = exact_error_measures(R.errs, R.bounds, R.lambda, R.final_hm,
                                R.final_l2);
    if (R.em.E_L2 > 0) R.eff_L2 = R.rel.eta_L2 / R.em.E_L2;
    if (R.em.E_H1 > 0) R.eff_H1 = R.rel.eta_H1 / R.em.E_H1;
  }

  for (size_t n = 0; n < R.run.slabs.size(); ++n) {
    const SlabRecord& slab = R.run.slabs[n];
    const SlabEstimators& E = R.est[n];
    SlabSummary row;
    row.t0 = slab.t0;
    row.t1 = slab.t1;
    row.iters = slab.iters;
    row.etaF = std::sqrt(sum_sq(E.etaF[3]));
    // vanishes at t1 by construction; report the largest sampled value
    for (int k = 0; k < 4; ++k)
      row.etaJH1 = std::max(row.etaJH1, std::sqrt(sum_sq(E.etaJH1[k])));
    row.etaQdG = std::sqrt(sum_sq(E.etaQdG));
    row.etaQdF = std::sqrt(sum_sq(E.etaQdF));
    row.etaQdT = E.etaQdT[3];
    row.etaOsc = E.etaOsc[3];
    row.etaDeg = E.etaDeg[3];
    row.etaR = E.etaR[3];
    row.etaLin1 = E.etaLin1;
    row.etaLin2 = E.etaLin2;
    row.eta_LB = E.eta_LB;
    if (ex) {
      row.dist = eng.dist_alpha_slab(R.errs[n], R.bounds.alpha_eff[n]);
      row.eff_lb = E.eta_LB > 0 ? row.dist / E.eta_LB : 0.0;
      row.err_s_l2 = R.errs[n].s_l2[3];
      row.err_psi_h1 = R.errs[n].psi_h1k[3];
    }
    R.rows.push_back(row);
  }

  if (cfg.compute_local && ex) {
    const SlabRecord& slab = R.run.slabs.back();
    TimeInterpolant I(*R.mesh, R.form, slab.q0, slab.q1, slab.t0, slab.t1);
    std::vector<double> loc_dist =
        eng.local_dist_alpha(I, *ex, R.bounds.alpha_eff.back());
    std::vector<double> loc_lb = eng.local_eta_lb(R.est.back());
    R.local_eff.resize(loc_dist.size());
    for (size_t k = 0; k < loc_dist.size(); ++k)
      R.local_eff[k] = loc_lb[k] > 0 ? loc_dist[k] / loc_lb[k] : 0.0;
  }
  return R;
}

// Convenience: reference solution built from a fine run of the same case.
inline ReferenceSolution reference_run(const std::string& case_id, int level,
                                       const SchemeSpec& scheme,
                                       double fixed_tol = 1e-7,
                                       int n_slabs = 0) {
  CaseSpec spec = make_case(case_id);
  auto model = std::make_shared<MediumModel>(spec.model);
  Formulation form = spec.total_pressure_primary
                         ? total_pressure_form(*model)
                         : pressure_form(*model);
  TriMesh mesh = spec.mesh(level);
  PermeabilityField Kb(spec.K_regions);
  SlabSolver solver(mesh, Kb, form, spec.source, spec.grav);
  RunConfig rc;
  rc.T = spec.T;
  rc.n_slabs = n_slabs > 0 ? n_slabs : 25 * level;
  rc.scheme = scheme;
  rc.stop.fixed_tol = fixed_tol;
  rc.bc = spec.bc;
  rc.s0 = spec.s0;
  RunResult run = run_time_loop(solver, rc);
  return ReferenceSolution(*model, spec.total_pressure_primary,
                           std::move(mesh), std::move(run));
}

}  // namespace richards
