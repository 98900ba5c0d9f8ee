// A posteriori error estimators.
//
// Per slab I_n = [t0, t1] and per mesh element K, the following quantities
// are computed from the time-continuous interpolant (Psi_ht, s_ht), the
// equilibrated flux sigma, and the reconstruction data (G, F):
//
//   etaF_K(t)   = ||Kbar^{-1/2} sigma + Kbar^{1/2}(grad Psi_ht + g kappa(s_ht))||_K
//   etaQdG_K    = h_K/(sqrt(K_m) pi) ||G - Lambda G||_K
//   etaQdF_K    = ||Kbar^{1/2}(F - Pi_RT F)||_K
//   etaJH1_K(t) = ||Psi_ht(t) - Psi_n||_{H1_K(K)},  etaJL2_K(t) = ||s_ht(t) - S_n||_K
//   etaQdT(t)   = ||dt s_ht - (S_n - S_{n-1})/tau||_{H-1_K(Omega)}
//   etaOsc(t)   = ||f(s_ht(t_n), x, t_n) - f(s_ht(t), x, t)||_{H-1_K(Omega)}
//   etaDeg(t)   = degeneracy estimator (optionally with the no-flux boundary
//                 correction term added inside the square)
//   etaR(t)     = [sum_K (etaF_K + etaQdG_K)^2]^{1/2} + etaQdT + etaOsc
//                 (+ etaLin1 when iterative linearization is active)
//
// Dual (H^-1_K) norms are evaluated by a conforming lifting on a uniformly
// refined mesh (global quantities) or on twice-refined element submeshes
// (local quantities).  Time sampling per slab: the two Gauss points of I_n
// (used with weights tau/2 for all time integrals) plus the slab endpoints
// (reported, weight zero).
//
// The time-integration functional
//   J_alpha(rho)^2 = e^{-int_0^T alpha} int_0^T [rho^2(t)
//                    + alpha(t) e^{int_t^T alpha} int_0^t rho^2] dt
// is evaluated on a grid with piecewise-linear rho^2 and piecewise-constant
// alpha; it collapses to the L2(0,T) norm for alpha = 0 and satisfies
//   e^{-1/2 int alpha} ||rho|| <= J_alpha(rho) <= ||rho||.
//
// Reliability:  etaL2^2 = etaIniHm^2 + J_{lambda+C1}(lambda^{-1/2} etaR)^2,
//               etaH1^2 = etaIniL2^2 + J_{C2}(etaDeg)^2
//                         + 4 J_{C2}(D_m^{-1/2} etaR)^2.
// Efficiency:   etaLB_n^2 = int_{I_n} (etaF_Omega^2 + etaJH1_Omega^2),
//               dist_n    = ||dt(s - s_ht)||_{L2(I_n;H-1_K)}
//                           + ||alpha (s - s_ht)||_{L2(Omega x I_n)}
//                           + ||Psi - Psi_ht||_{L2(I_n;H1_K)}.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "richards/equilibration.hpp"
#include "richards/fem.hpp"
#include "richards/solver.hpp"

namespace richards {

// ---------------------------------------------------------------------------
// Time-integration functional
// ---------------------------------------------------------------------------
// Grid-based evaluation: t has N+1 nondecreasing nodes, alpha has N
// per-interval values (>= 0), rho has N+1 nodal values.  rho^2 is treated as
// piecewise linear, inner running integrals accumulate trapezoidally.
inline double j_alpha(const std::vector<double>& t,
                      const std::vector<double>& alpha,
                      const std::vector<double>& rho) {
  size_t n = alpha.size();
  if (t.size() != n + 1 || rho.size() != n + 1 || n == 0)
    throw std::invalid_argument("j_alpha: inconsistent grid sizes");
  double AT = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (alpha[i] < 0) throw std::invalid_argument("j_alpha: negative weight");
    if (t[i + 1] - t[i] < 0)
      throw std::invalid_argument("j_alpha: decreasing grid");
    AT += alpha[i] * (t[i + 1] - t[i]);
  }
  // The integrand alpha e^{-A(t)} R(t) lives on a scale 1/alpha, which can be
  // much finer than the grid; subdivide each interval (rho^2 stays piecewise
  // linear, so this only sharpens the quadrature).  The exponential scaling
  // is kept inside the sum (exp(-A), A >= 0) so large weights cannot
  // overflow.
  double A = 0.0, R = 0.0, total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double dt = t[i + 1] - t[i];
    double r2a = rho[i] * rho[i], r2b = rho[i + 1] * rho[i + 1];
    int m = 1 + static_cast<int>(std::min(4999.0, alpha[i] * dt / 0.25));
    double h = dt / m;
    for (int j = 0; j < m; ++j) {
      double ra = r2a + (r2b - r2a) * j / m;
      double rb = r2a + (r2b - r2a) * (j + 1) / m;
      double A2 = A + alpha[i] * h, R2 = R + 0.5 * (ra + rb) * h;
      total += std::exp(-AT) * 0.5 * (ra + rb) * h;
      total += alpha[i] * 0.5 * (std::exp(-A) * R + std::exp(-A2) * R2) * h;
      A = A2;
      R = R2;
    }
  }
  return std::sqrt(std::max(0.0, total));
}

// ---------------------------------------------------------------------------
// Slab time sampling: endpoints + the 2-point Gauss rule of I_n
// ---------------------------------------------------------------------------
struct SlabTimeRule {
  std::array<double, 4> t{};  // t0, gauss1, gauss2, t1
  std::array<double, 4> w{};  // 0, tau/2, tau/2, 0

  static SlabTimeRule make(double t0, double t1) {
    SlabTimeRule r;
    double tau = t1 - t0, m = 0.5 * (t0 + t1);
    double off = 0.5 * tau / std::sqrt(3.0);
    r.t = {t0, m - off, m + off, t1};
    r.w = {0.0, 0.5 * tau, 0.5 * tau, 0.0};
    return r;
  }
  double tau() const { return t[3] - t[0]; }
};

// ---------------------------------------------------------------------------
// Per-slab estimator bundle
// ---------------------------------------------------------------------------
struct SlabEstimators {
  SlabTimeRule times;
  // per sample, per element
  std::array<std::vector<double>, 4> etaF, etaJH1, etaJL2;
  // per element (constant in time on the slab)
  std::vector<double> etaQdG, etaQdF;
  // global, per sample
  std::array<double, 4> etaQdT{}, etaOsc{}, etaDeg{}, etaR{};
  double etaLin1 = 0.0, etaLin2 = 0.0;
  double eta_LB = 0.0;  // [int_In (etaF_Omega^2 + etaJH1_Omega^2)]^{1/2}
};

inline double sum_sq(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// ---------------------------------------------------------------------------
// Exact (or reference) solution evaluators
// ---------------------------------------------------------------------------
struct ExactSolution {
  std::function<double(const Vec2&, double)> psi;
  std::function<Vec2(const Vec2&, double)> grad_psi;
  std::function<double(const Vec2&, double)> s;
  std::function<double(const Vec2&, double)> ds_dt;
};

struct SlabErrors {
  SlabTimeRule times;
  std::array<double, 4> s_l2{};         // ||s - s_ht||
  std::array<double, 4> psi_h1k{};      // ||Psi - Psi_ht||_{H1_K}
  std::array<double, 4> weighted_h1{};  // ||D(s)^{-1/2} K^{1/2} grad(Psi - Psi_ht)||
  std::array<double, 4> dt_hm{};        // ||dt(s - s_ht)||_{H-1_K}
};

// ---------------------------------------------------------------------------
// Estimator engine
// ---------------------------------------------------------------------------
class EstimatorEngine {
 public:
  EstimatorEngine(const TriMesh& mesh, const PermeabilityField& Kbar,
                  const Formulation& form, const SourceModel& source,
                  const Gravity& grav, const QuadRule& rule = tri_rule(10))
      : mesh_(&mesh),
        Kbar_(&Kbar),
        form_(form),
        source_(source),
        grav_(grav),
        rule_(rule),
        lift_(mesh, Kbar, 1) {}

  const HminusLifting& lifting() const { return lift_; }
  const QuadRule& rule() const { return rule_; }

  // ||rho||_{H-1_K(Omega)} of a density given on the run mesh.
  double hminus_global(const ScalarFn& rho) const {
    const TriMesh* fine = &lift_.fine_mesh();
    ScalarFn rho_fine = [rho, fine](int t, const Vec2& x) {
      return rho(fine->parent[t], x);
    };
    return lift_.norm_density(rho_fine, rule_);
  }

  // Same dual norm on a once-deeper lifting space; used for the error
  // measures (the discrete dual norm is a lower bound that tightens with
  // refinement, and the measured error should not be biased low against the
  // estimator side).  Built lazily: only runs with a reference need it.
  double hminus_error(const ScalarFn& rho) const {
    if (!err_lift_)
      err_lift_ = std::make_unique<HminusLifting>(*mesh_, *Kbar_, 2);
    const TriMesh* fine = &err_lift_->fine_mesh();
    ScalarFn rho_fine = [rho, fine](int t, const Vec2& x) {
      return rho(fine->parent[t], x);
    };
    return err_lift_->norm_density(rho_fine, rule_);
  }

  // Global flux-nonconformity norm of the reconstruction pair (sigma, F);
  // used by the adaptive stopping rule, where F is the linearized numerical
  // flux of the current iterate.
  double eta_flux_global(const EquilibratedFlux& sigma,
                         const SlabFluxData& data) const {
    double acc = 0.0;
    for (int t = 0; t < mesh_->n_tris(); ++t) {
      const TensorSet& ts = Kbar_->at(mesh_->region[t]);
      for (const auto& qp : rule_.pts) {
        Vec2 x = bary_point(*mesh_, t, qp.bary);
        Vec2 v = ts.inv_sqrtK * sigma.eval(t, x) + ts.sqrtK * data.F(t, x);
        acc += qp.w * mesh_->area[t] * v.squaredNorm();
      }
    }
    return std::sqrt(acc);
  }

  // An EtaFCallback for the adaptive linearization loop: equilibrates the
  // in-progress data and returns the global flux estimator.
  EtaFCallback adaptive_callback(const RTN2Space& rt2) const {
    const EstimatorEngine* self = this;
    const RTN2Space* sp = &rt2;
    return [self, sp](const SlabFluxData& data) {
      EquilibratedFlux sigma =
          equilibrate_flux(*sp, *self->Kbar_, data, self->rule_);
      return self->eta_flux_global(sigma, data);
    };
  }

  // Initial-condition estimators against the (clipped) nodal projection.
  double ini_l2(const std::function<double(const Vec2&)>& s0,
                const Vector& S0h) const {
    double acc = 0.0;
    for (int t = 0; t < mesh_->n_tris(); ++t)
      for (const auto& qp : rule_.pts) {
        Vec2 x = bary_point(*mesh_, t, qp.bary);
        double ph = 0.0;
        for (int i = 0; i < 3; ++i) ph += qp.bary[i] * S0h[mesh_->tris[t][i]];
        double d = s0(x) - ph;
        acc += qp.w * mesh_->area[t] * d * d;
      }
    return std::sqrt(acc);
  }
  double ini_hminus(const std::function<double(const Vec2&)>& s0,
                    const Vector& S0h) const {
    const TriMesh* m = mesh_;
    return hminus_global([s0, &S0h, m](int t, const Vec2& x) {
      auto b = SlabSolver::barycentric(*m, t, x);
      double ph = 0.0;
      for (int i = 0; i < 3; ++i) ph += b[i] * S0h[m->tris[t][i]];
      return s0(x) - ph;
    });
  }

  // C^inf_ht(t): max over quadrature points of |Kbar^{1/2} grad s_ht|^2.
  double c_inf(const TimeInterpolant& I, double t) const {
    double mx = 0.0;
    for (int k = 0; k < mesh_->n_tris(); ++k) {
      const TensorSet& ts = Kbar_->at(mesh_->region[k]);
      for (const auto& qp : rule_.pts) {
        auto ps = I.point_state(k, qp.bary);
        mx = std::max(mx, (ts.sqrtK * I.grad_s(t, ps)).squaredNorm());
      }
    }
    return mx;
  }

  // Degeneracy estimator at time t.  omega_deg is the set of elements
  // covering the saturated region (possibly empty).
  double eta_deg(const TimeInterpolant& I, double t,
                 const std::vector<int>& omega_deg,
                 bool neumann_correction = false) const {
    const MediumModel& mod = *form_.model;
    double D1 = mod.diffusivity(1.0);
    if (!std::isfinite(D1) || D1 <= 0) return 0.0;
    double PM = mod.P_M;
    // || [Psi_ht - P_M]_+ ||_{H1_K(Omega)}^2
    double term1 = 0.0;
    for (int k = 0; k < mesh_->n_tris(); ++k) {
      const TensorSet& ts = Kbar_->at(mesh_->region[k]);
      for (const auto& qp : rule_.pts) {
        auto ps = I.point_state(k, qp.bary);
        if (I.psi(t, ps) > PM)
          term1 += qp.w * mesh_->area[k] *
                   (ts.sqrtK * I.grad_psi(t, ps)).squaredNorm();
      }
    }
    double inner = term1;
    double area_deg = 0.0;
    Vec2 int_Kg(0, 0);
    if (!omega_deg.empty()) {
      Mat2 int_K = Mat2::Zero();
      for (int k : omega_deg) {
        area_deg += mesh_->area[k];
        int_K += mesh_->area[k] * Kbar_->at(mesh_->region[k]).K;
      }
      Vec2 g(grav_.gx, grav_.gy);
      int_Kg = int_K * g;
      Mat2 K_mean = int_K / area_deg;
      // || [f(1, x, t)]_+ ||_{H-1_K(omega_deg)}
      const SourceModel* src = &source_;
      double fplus = hminus_norm_local(
          *mesh_, *Kbar_, omega_deg,
          [src, t](int, const Vec2& x) {
            return std::max(src->f(1.0, x.x(), x.y(), t), 0.0);
          },
          2, rule_);
      // || (K^{1/2} - K^{-1/2} <K>) g ||_{omega_deg}
      double kdev = 0.0;
      for (int k : omega_deg) {
        const TensorSet& ts = Kbar_->at(mesh_->region[k]);
        Vec2 v = (ts.sqrtK - ts.inv_sqrtK * K_mean) * g;
        kdev += mesh_->area[k] * v.squaredNorm();
      }
      double pair = fplus + std::sqrt(kdev);
      inner += pair * pair;
    }
    double eta2 = 2.0 / D1 * inner;
    if (neumann_correction && !omega_deg.empty()) {
      // boundary term: 2/(D(1)|omega_deg|) int_{dOmega} n^T (int K g) [Psi-P_M]_+
      Gauss1D ge = gauss_legendre01(4);
      double corr = 0.0;
      for (const MeshEdge& e : mesh_->edges) {
        if (e.t1 != -1) continue;
        Vec2 p0 = mesh_->verts[e.v0], p1 = mesh_->verts[e.v1];
        Vec2 d = p1 - p0;
        double len = d.norm();
        Vec2 n(d.y() / len, -d.x() / len);
        Vec2 mid = 0.5 * (p0 + p1);
        if (n.dot(mesh_->centroid(e.t0) - mid) > 0) n = -n;  // outward
        for (size_t q = 0; q < ge.x.size(); ++q) {
          Vec2 x = p0 + ge.x[q] * d;
          auto b = SlabSolver::barycentric(*mesh_, e.t0, x);
          double psi = I.psi(t, I.point_state(e.t0, b));
          corr += ge.w[q] * len * n.dot(int_Kg) * std::max(psi - PM, 0.0);
        }
      }
      eta2 += 2.0 / (D1 * area_deg) * corr;
    }
    return std::sqrt(std::max(0.0, eta2));
  }

  // All slab estimators.  `linearization_active` adds etaLin1 into etaR.
  SlabEstimators slab_estimators(const SlabRecord& slab,
                                 const SlabFluxData& data,
                                 const EquilibratedFlux& sigma,
                                 bool linearization_active = false,
                                 bool neumann_correction = false) const {
    const TriMesh& m = *mesh_;
    int nt = m.n_tris();
    SlabEstimators E;
    E.times = SlabTimeRule::make(slab.t0, slab.t1);
    if (!slab.eta_lin1.empty()) E.etaLin1 = slab.eta_lin1.back();
    if (!slab.eta_lin2.empty()) E.etaLin2 = slab.eta_lin2.back();
    TimeInterpolant I(m, form_, slab.q0, slab.q1, slab.t0, slab.t1);

    BrokenP1 LG = l2_project_broken(m, data.G, rule_);
    BrokenRT1 PF = rt_project(m, *Kbar_, data.F, rule_);
    E.etaQdG.assign(nt, 0.0);
    E.etaQdF.assign(nt, 0.0);
    double km = Kbar_->K_m();
    for (int k = 0; k < nt; ++k) {
      const TensorSet& ts = Kbar_->at(m.region[k]);
      double accG = 0.0, accF = 0.0;
      for (const auto& qp : rule_.pts) {
        Vec2 x = bary_point(m, k, qp.bary);
        double dg = data.G(k, x) - LG.eval(k, qp.bary);
        accG += qp.w * m.area[k] * dg * dg;
        Vec2 df = ts.sqrtK * (data.F(k, x) - PF.eval(k, x));
        accF += qp.w * m.area[k] * df.squaredNorm();
      }
      E.etaQdG[k] = m.h_K[k] / (std::sqrt(km) * M_PI) * std::sqrt(accG);
      E.etaQdF[k] = std::sqrt(accF);
    }

    Vec2 g(grav_.gx, grav_.gy);
    const MediumModel& mod = *form_.model;
    for (int si = 0; si < 4; ++si) {
      double t = E.times.t[si];
      E.etaF[si].assign(nt, 0.0);
      E.etaJH1[si].assign(nt, 0.0);
      E.etaJL2[si].assign(nt, 0.0);
      for (int k = 0; k < nt; ++k) {
        const TensorSet& ts = Kbar_->at(m.region[k]);
        double aF = 0.0, aJ1 = 0.0, aJ2 = 0.0;
        for (const auto& qp : rule_.pts) {
          Vec2 x = bary_point(m, k, qp.bary);
          auto ps = I.point_state(k, qp.bary);
          double sh = I.s(t, ps);
          Vec2 v = ts.inv_sqrtK * sigma.eval(k, x) +
                   ts.sqrtK * (I.grad_psi(t, ps) + g * mod.kappa(sh));
          aF += qp.w * m.area[k] * v.squaredNorm();
          Vec2 dj = ts.sqrtK * (I.grad_psi(t, ps) - I.grad_psi(slab.t1, ps));
          aJ1 += qp.w * m.area[k] * dj.squaredNorm();
          double ds = sh - ps.S_hi;
          aJ2 += qp.w * m.area[k] * ds * ds;
        }
        E.etaF[si][k] = std::sqrt(aF);
        E.etaJH1[si][k] = std::sqrt(aJ1);
        E.etaJL2[si][k] = std::sqrt(aJ2);
      }
      // time-quadrature and data-oscillation dual norms
      const TriMesh* mp = &m;
      const TimeInterpolant* Ip = &I;
      double tau = slab.tau, t1 = slab.t1;
      E.etaQdT[si] = hminus_global([mp, Ip, t, tau](int k, const Vec2& x) {
        auto b = SlabSolver::barycentric(*mp, k, x);
        auto ps = Ip->point_state(k, b);
        return Ip->ds_dt(t, ps) - (ps.S_hi - ps.S_lo) / tau;
      });
      const SourceModel* src = &source_;
      E.etaOsc[si] = hminus_global([mp, Ip, src, t, t1](int k, const Vec2& x) {
        auto b = SlabSolver::barycentric(*mp, k, x);
        auto ps = Ip->point_state(k, b);
        return src->f(ps.S_hi, x.x(), x.y(), t1) -
               src->f(Ip->s(t, ps), x.x(), x.y(), t);
      });
      E.etaDeg[si] =
          eta_deg(I, t, detect_omega_deg(I, m, t), neumann_correction);
      double acc = 0.0;
      for (int k = 0; k < nt; ++k) {
        double v = E.etaF[si][k] + E.etaQdG[k];
        acc += v * v;
      }
      E.etaR[si] = std::sqrt(acc) + E.etaQdT[si] + E.etaOsc[si] +
                   (linearization_active ? E.etaLin1 : 0.0);
    }
    double lb2 = 0.0;
    for (int si = 0; si < 4; ++si)
      lb2 += E.times.w[si] * (sum_sq(E.etaF[si]) + sum_sq(E.etaJH1[si]));
    E.eta_LB = std::sqrt(lb2);
    return E;
  }

  // Dual norm of the full residual at time t (oracle for the bound
  // ||R(Psi_ht(t))|| <= etaR(t)).
  double residual_dual_norm(const TimeInterpolant& I, double t) const {
    const TriMesh* fine = &lift_.fine_mesh();
    const TriMesh* mp = mesh_;
    const TimeInterpolant* Ip = &I;
    const SourceModel* src = &source_;
    Vec2 g(grav_.gx, grav_.gy);
    const MediumModel* mod = form_.model;
    ScalarFn density = [=](int tf, const Vec2& x) {
      int k = fine->parent[tf];
      auto b = SlabSolver::barycentric(*mp, k, x);
      auto ps = Ip->point_state(k, b);
      return src->f(Ip->s(t, ps), x.x(), x.y(), t) - Ip->ds_dt(t, ps);
    };
    VectorFn vf = [=](int tf, const Vec2& x) {
      int k = fine->parent[tf];
      auto b = SlabSolver::barycentric(*mp, k, x);
      auto ps = Ip->point_state(k, b);
      return Vec2(Ip->grad_psi(t, ps) + g * mod->kappa(Ip->s(t, ps)));
    };
    Vector b = assemble_load(lift_.space(), density, rule_) -
               assemble_flux_load(lift_.space(), *Kbar_, vf, rule_);
    return lift_.norm_load(b);
  }

  // Errors of one slab against an exact (or reference) solution.
  SlabErrors slab_errors(const TimeInterpolant& I,
                         const ExactSolution& ex) const {
    const TriMesh& m = *mesh_;
    SlabErrors R;
    R.times = SlabTimeRule::make(I.t0(), I.t1());
    const MediumModel& mod = *form_.model;
    for (int si = 0; si < 4; ++si) {
      double t = R.times.t[si];
      double a_l2 = 0.0, a_h1 = 0.0, a_wh1 = 0.0;
      for (int k = 0; k < m.n_tris(); ++k) {
        const TensorSet& ts = Kbar_->at(m.region[k]);
        for (const auto& qp : rule_.pts) {
          Vec2 x = bary_point(m, k, qp.bary);
          auto ps = I.point_state(k, qp.bary);
          double w = qp.w * m.area[k];
          double dsv = ex.s(x, t) - I.s(t, ps);
          a_l2 += w * dsv * dsv;
          Vec2 dgrad = ts.sqrtK * (ex.grad_psi(x, t) - I.grad_psi(t, ps));
          a_h1 += w * dgrad.squaredNorm();
          double Ds = mod.diffusivity(std::clamp(ex.s(x, t), 1e-12, 1.0));
          if (std::isfinite(Ds) && Ds > 0)
            a_wh1 += w / Ds * dgrad.squaredNorm();
        }
      }
      R.s_l2[si] = std::sqrt(a_l2);
      R.psi_h1k[si] = std::sqrt(a_h1);
      R.weighted_h1[si] = std::sqrt(a_wh1);
      const TriMesh* mp = &m;
      const TimeInterpolant* Ip = &I;
      const ExactSolution* exp_ = &ex;
      R.dt_hm[si] = hminus_error([mp, Ip, exp_, t](int k, const Vec2& x) {
        auto b = SlabSolver::barycentric(*mp, k, x);
        return exp_->ds_dt(x, t) - Ip->ds_dt(t, Ip->point_state(k, b));
      });
    }
    return R;
  }

  // ||s(t) - s_ht(t)|| and ||s(t) - s_ht(t)||_{H-1_K} at one time.
  double err_l2_at(const TimeInterpolant& I, const ExactSolution& ex,
                   double t) const {
    double acc = 0.0;
    for (int k = 0; k < mesh_->n_tris(); ++k)
      for (const auto& qp : rule_.pts) {
        Vec2 x = bary_point(*mesh_, k, qp.bary);
        double d = ex.s(x, t) - I.s(t, I.point_state(k, qp.bary));
        acc += qp.w * mesh_->area[k] * d * d;
      }
    return std::sqrt(acc);
  }
  double err_hm_at(const TimeInterpolant& I, const ExactSolution& ex,
                   double t) const {
    const TriMesh* mp = mesh_;
    const TimeInterpolant* Ip = &I;
    const ExactSolution* exp_ = &ex;
    return hminus_error([mp, Ip, exp_, t](int k, const Vec2& x) {
      auto b = SlabSolver::barycentric(*mp, k, x);
      return exp_->s(x, t) - Ip->s(t, Ip->point_state(k, b));
    });
  }

  // dist of one slab (global): sum of the three time-integrated norms.
  double dist_alpha_slab(const SlabErrors& e, double alpha) const {
    double a2 = 0, b2 = 0, c2 = 0;
    for (int si = 0; si < 4; ++si) {
      double w = e.times.w[si];
      a2 += w * e.dt_hm[si] * e.dt_hm[si];
      b2 += w * alpha * alpha * e.s_l2[si] * e.s_l2[si];
      c2 += w * e.psi_h1k[si] * e.psi_h1k[si];
    }
    return std::sqrt(a2) + std::sqrt(b2) + std::sqrt(c2);
  }

  // Per-element dist over one slab; the time-derivative dual norm uses a
  // local lifting on each element.
  std::vector<double> local_dist_alpha(const TimeInterpolant& I,
                                       const ExactSolution& ex,
                                       double alpha) const {
    const TriMesh& m = *mesh_;
    SlabTimeRule tr = SlabTimeRule::make(I.t0(), I.t1());
    std::vector<double> out(m.n_tris(), 0.0);
    const MediumModel& mod = *form_.model;
    (void)mod;
    for (int k = 0; k < m.n_tris(); ++k) {
      double a2 = 0, b2 = 0, c2 = 0;
      const TensorSet& ts = Kbar_->at(m.region[k]);
      for (int si = 1; si <= 2; ++si) {  // Gauss points only (w > 0)
        double t = tr.t[si], w = tr.w[si];
        double l2 = 0.0, h1 = 0.0;
        for (const auto& qp : rule_.pts) {
          Vec2 x = bary_point(m, k, qp.bary);
          auto ps = I.point_state(k, qp.bary);
          double d = ex.s(x, t) - I.s(t, ps);
          l2 += qp.w * m.area[k] * d * d;
          Vec2 dg = ts.sqrtK * (ex.grad_psi(x, t) - I.grad_psi(t, ps));
          h1 += qp.w * m.area[k] * dg.squaredNorm();
        }
        const TriMesh* mp = &m;
        const TimeInterpolant* Ip = &I;
        const ExactSolution* exp_ = &ex;
        double hm = hminus_norm_local(
            m, *Kbar_, {k},
            [mp, Ip, exp_, t](int kk, const Vec2& x) {
              auto b = SlabSolver::barycentric(*mp, kk, x);
              return exp_->ds_dt(x, t) - Ip->ds_dt(t, Ip->point_state(kk, b));
            },
            2, rule_);
        a2 += w * hm * hm;
        b2 += w * alpha * alpha * l2;
        c2 += w * h1;
      }
      out[k] = std::sqrt(a2) + std::sqrt(b2) + std::sqrt(c2);
    }
    return out;
  }

  // Per-element lower-bound indicators of one slab.
  std::vector<double> local_eta_lb(const SlabEstimators& E) const {
    int nt = (int)E.etaQdG.size();
    std::vector<double> out(nt, 0.0);
    for (int k = 0; k < nt; ++k) {
      double acc = 0.0;
      for (int si = 0; si < 4; ++si)
        acc += E.times.w[si] * (E.etaF[si][k] * E.etaF[si][k] +
                                E.etaJH1[si][k] * E.etaJH1[si][k]);
      out[k] = std::sqrt(acc);
    }
    return out;
  }

 private:
  const TriMesh* mesh_;
  const PermeabilityField* Kbar_;
  Formulation form_;
  SourceModel source_;
  Gravity grav_;
  QuadRule rule_;
  HminusLifting lift_;
  mutable std::unique_ptr<HminusLifting> err_lift_;
};

// ---------------------------------------------------------------------------
// Run-level bounds
// ---------------------------------------------------------------------------
// J_alpha over the union of per-slab sample grids; alpha is constant per
// slab, rho(slab, sample) supplies the nodal values.
inline double j_over_slabs(const std::vector<SlabTimeRule>& times,
                           const std::vector<double>& alpha_slab,
                           const std::function<double(int, int)>& rho) {
  if (times.size() != alpha_slab.size() || times.empty())
    throw std::invalid_argument("j_over_slabs: size mismatch");
  std::vector<double> t, a, r;
  for (size_t i = 0; i < times.size(); ++i)
    for (int k = 0; k < 4; ++k) {
      t.push_back(times[i].t[k]);
      r.push_back(rho((int)i, k));
      bool last = (i + 1 == times.size()) && k == 3;
      if (!last) a.push_back(alpha_slab[i]);  // joint intervals have dt = 0
    }
  return j_alpha(t, a, r);
}

struct ReliabilityResult {
  double eta_L2 = 0.0, eta_H1 = 0.0;
};

// bounds must be sampled once per slab (C1, C2, D_m per slab).
inline ReliabilityResult reliability_bounds(
    const std::vector<SlabEstimators>& slabs, double eta_ini_l2,
    double eta_ini_hm, const BoundFunctions& bounds, double lambda) {
  size_t n = slabs.size();
  if (bounds.C1.size() != n)
    throw std::invalid_argument("reliability_bounds: sample count mismatch");
  std::vector<SlabTimeRule> times(n);
  std::vector<double> a1(n), a2(n);
  for (size_t i = 0; i < n; ++i) {
    times[i] = slabs[i].times;
    a1[i] = lambda + bounds.C1[i];
    a2[i] = bounds.C2[i];
  }
  double j_r = j_over_slabs(times, a1, [&](int i, int k) {
    return slabs[i].etaR[k] / std::sqrt(lambda);
  });
  double j_deg = j_over_slabs(times, a2, [&](int i, int k) {
    return slabs[i].etaDeg[k];
  });
  double j_rd = j_over_slabs(times, a2, [&](int i, int k) {
    return slabs[i].etaR[k] / std::sqrt(bounds.D_m[i]);
  });
  ReliabilityResult out;
  out.eta_L2 = std::sqrt(eta_ini_hm * eta_ini_hm + j_r * j_r);
  out.eta_H1 =
      std::sqrt(eta_ini_l2 * eta_ini_l2 + j_deg * j_deg + 4.0 * j_rd * j_rd);
  return out;
}

struct ErrorResult {
  double E_L2 = 0.0, E_H1 = 0.0;
};

// Exact-error counterparts of the reliability bounds; final_hm and final_l2
// are ||(s - s_ht)(T)|| in the H^-1_K and L2 norms.
inline ErrorResult exact_error_measures(const std::vector<SlabErrors>& errs,
                                        const BoundFunctions& bounds,
                                        double lambda, double final_hm,
                                        double final_l2) {
  size_t n = errs.size();
  if (bounds.C1.size() != n)
    throw std::invalid_argument("exact_error_measures: sample count mismatch");
  std::vector<SlabTimeRule> times(n);
  std::vector<double> a1(n), a2(n);
  double int_a1 = 0.0, int_a2 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    times[i] = errs[i].times;
    a1[i] = lambda + bounds.C1[i];
    a2[i] = bounds.C2[i];
    int_a1 += a1[i] * times[i].tau();
    int_a2 += a2[i] * times[i].tau();
  }
  double j_s = j_over_slabs(times, a1, [&](int i, int k) {
    return errs[i].s_l2[k] / std::sqrt(bounds.theta_dM[i]);
  });
  double j_w = j_over_slabs(times, a2, [&](int i, int k) {
    return errs[i].weighted_h1[k];
  });
  ErrorResult out;
  out.E_L2 =
      std::sqrt(std::exp(-int_a1) * final_hm * final_hm + j_s * j_s);
  out.E_H1 =
      std::sqrt(std::exp(-int_a2) * final_l2 * final_l2 + 0.5 * j_w * j_w);
  return out;
}

}  // namespace richards
