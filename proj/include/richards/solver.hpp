// Backward-Euler time stepping for the degenerate parabolic flow problem
//   dt sat(q) - div( Kbar [ a(q) grad q + b(q) g ] ) = f(sat(q), x, t),
// written in a primary variable q that covers both formulations:
//   - pressure form:        sat = S,     a = b = kappa(S(.)),  Psi = K(q)
//   - total-pressure form:  sat = theta, a = 1, b = kappa(theta(.)), Psi = q.
//
// Each time slab is solved by iterative linearization: given the previous
// iterate q^{i-1}, find the increment dq from
//   (L/tau)(dq, phi) + (Kbar [a(q^{i-1}) grad(q^{i-1}+dq) + xi dq], grad phi)
//     = -(1/tau)(sat(q^{i-1}) - sat(q_{n-1}), phi)
//       - (Kbar g b(q^{i-1}), grad phi) + (f(sat(q^{i-1}), x, t_n), phi),
// with the scheme-dependent pointwise fields (L, xi): Picard, modified
// Picard, Newton, Jaeger-Kacur, L-scheme, modified L-scheme.  Stopping is
// either a fixed increment tolerance or adaptive: iterate until
//   eta_lin1 + eta_lin2 <= gamma * eta_F,
// where eta_F is the flux-estimator value returned by a caller-supplied
// equilibration callback operating on the linearized slab data.
//
// Also here: the time-continuous interpolant
//   Psi_ht(t) = P_c(S_interp(t)) + [Psi_interp(t) - P_M]_+,  s_ht = theta(Psi_ht),
// the degenerate-region detector, and the steady maximum-principle
// subsolution solve.

#pragma once

#include <Eigen/SparseLU>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "richards/constitutive.hpp"
#include "richards/fem.hpp"

namespace richards {

// ---------------------------------------------------------------------------
// Formulation
// ---------------------------------------------------------------------------
struct Formulation {
  const MediumModel* model = nullptr;
  bool total_pressure_form = false;

  double sat(double q) const {
    return total_pressure_form ? model->theta(q) : model->saturation(q);
  }
  double dsat(double q) const {
    if (!total_pressure_form) return model->dsaturation(q);
    return q >= model->P_M ? 0.0 : model->dtheta(q);
  }
  double a(double q) const {
    return total_pressure_form ? 1.0 : model->kappa(model->saturation(q));
  }
  double da(double q) const {
    return total_pressure_form
               ? 0.0
               : model->dkappa(model->saturation(q)) * model->dsaturation(q);
  }
  double b(double q) const { return model->kappa(sat(q)); }
  double db(double q) const { return model->dkappa(sat(q)) * dsat(q); }
  double kirchhoff(double q) const {
    return total_pressure_form ? q : model->kirchhoff(q);
  }
  // Saturated threshold in the primary variable.
  double q_sat() const {
    return total_pressure_form ? model->P_M : model->p_M;
  }
  // Primary variable realizing a given saturation (initial data).
  double q_of_saturation(double s) const {
    return total_pressure_form ? model->total_pressure(s)
                               : model->capillary(s);
  }
};

inline Formulation pressure_form(const MediumModel& m) {
  return Formulation{&m, false};
}
inline Formulation total_pressure_form(const MediumModel& m) {
  return Formulation{&m, true};
}

// ---------------------------------------------------------------------------
// Linearization schemes
// ---------------------------------------------------------------------------
enum class SchemeKind {
  picard,
  modified_picard,
  newton,
  jaeger_kacur,
  l_scheme,
  modified_l_scheme
};

struct SchemeSpec {
  SchemeKind kind = SchemeKind::modified_l_scheme;
  double L_const = 0.0;  // l_scheme: fixed L (<= 0 selects the safe default)
  double M = 1.0;        // modified_l_scheme stabilization weight
};

inline SchemeSpec parse_scheme(const std::string& name) {
  SchemeSpec s;
  if (name == "picard") s.kind = SchemeKind::picard;
  else if (name == "modified_picard") s.kind = SchemeKind::modified_picard;
  else if (name == "newton") s.kind = SchemeKind::newton;
  else if (name == "jaeger_kacur") s.kind = SchemeKind::jaeger_kacur;
  else if (name == "l_scheme") s.kind = SchemeKind::l_scheme;
  else if (name == "modified_l_scheme") s.kind = SchemeKind::modified_l_scheme;
  else throw std::invalid_argument("unknown scheme: " + name);
  return s;
}

namespace detail {

// Per-iteration scheme state precomputed from the current iterate's range.
struct SchemeState {
  double jk_delta = 1.0;   // half-width of the difference-quotient scan
  double jk_floor = 0.0;   // L-scheme lower bound 0.5 sup{sat' - tau df_ds}
  double l_auto = 1.0;     // automatic constant for the plain L-scheme
};

inline SchemeState prepare_scheme(const Formulation& form,
                                  const SourceModel& source, double tau,
                                  const Vector& q_iter) {
  SchemeState st;
  double qmin = q_iter.minCoeff(), qmax = q_iter.maxCoeff();
  double qabs = std::max({std::abs(qmin), std::abs(qmax), 0.1});
  st.jk_delta = 10.0 * qabs;
  double sup_ds = 0.0;
  const int n = 512;
  double lo = qmin - st.jk_delta, hi = qmax + st.jk_delta;
  for (int i = 0; i <= n; ++i)
    sup_ds = std::max(sup_ds, form.dsat(lo + (hi - lo) * i / n));
  st.jk_floor = 0.5 * (sup_ds + tau * source.dfds_max);
  st.l_auto = std::max(sup_ds, 1e-8);
  return st;
}

// Pointwise (L, xi) per Table-2 scheme, for iterate value qv and gradient gq.
inline void scheme_fields(const SchemeSpec& sch, const SchemeState& st,
                          const Formulation& form, const SourceModel& source,
                          const Gravity& grav, double tau, double t,
                          const Vec2& x, double qv, const Vec2& gq, double& L,
                          Vec2& xi) {
  xi = Vec2::Zero();
  double dfds = source.depends_on_s
                    ? source.df_ds(form.sat(qv), x.x(), x.y(), t)
                    : 0.0;
  switch (sch.kind) {
    case SchemeKind::picard:
      L = 0.0;
      break;
    case SchemeKind::modified_picard:
      L = std::max(form.dsat(qv) - tau * dfds, 0.0);
      break;
    case SchemeKind::newton:
      L = std::max(form.dsat(qv) - tau * dfds, 0.0);
      xi = form.da(qv) * gq + form.db(qv) * Vec2(grav.gx, grav.gy);
      break;
    case SchemeKind::jaeger_kacur: {
      double best = 0.0;
      const int n = 512;
      double sv = form.sat(qv);
      for (int i = 0; i <= n; ++i) {
        double z = qv - st.jk_delta + 2.0 * st.jk_delta * i / n;
        if (std::abs(z - qv) < 1e-12 * st.jk_delta) continue;
        best = std::max(best, std::abs((form.sat(z) - sv) / (z - qv)));
      }
      L = std::max(best, st.jk_floor);
      break;
    }
    case SchemeKind::l_scheme:
      L = sch.L_const > 0 ? sch.L_const : st.l_auto;
      break;
    case SchemeKind::modified_l_scheme:
      L = std::max(form.dsat(qv) - tau * dfds, 0.0) + sch.M * tau;
      break;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Slab data shared with the equilibration callback
// ---------------------------------------------------------------------------

// Evaluators for the linearized reconstruction data of one iteration:
//   G = f(sat(q^{i-1}), x, t_n) - (sat(q^{i-1}) - sat(q_{n-1}))/tau - (L/tau) dq
//   F = a(q^{i-1}) grad q^i + g b(q^{i-1}) + xi dq,
// which reduce to the converged-slab definitions when dq = 0 and
// q^{i-1} = q^i = q_n.
struct SlabFluxData {
  const TriMesh* mesh = nullptr;
  ScalarFn G;  // source-like datum
  VectorFn F;  // flux-like datum (Kbar applied downstream)
};

using EtaFCallback = std::function<double(const SlabFluxData&)>;

struct SlabRecord {
  int index = 0;
  double t0 = 0, t1 = 0, tau = 0;
  Vector q0, q1;  // nodal primary variable at the slab ends
  Vector q_pre;   // penultimate iterate (q1 is one linearization step from it)
  int iters = 0;
  std::vector<double> dq_norms;   // ||dq^i||_{H1_K}
  std::vector<double> eta_lin1, eta_lin2, eta_flux;  // per-iteration traces
};

// ---------------------------------------------------------------------------
// Slab solver
// ---------------------------------------------------------------------------
class SlabSolver {
 public:
  SlabSolver(const TriMesh& mesh, const PermeabilityField& Kbar,
             const Formulation& form, const SourceModel& source,
             const Gravity& grav, const QuadRule& quad = tri_rule(10))
      : mesh_(&mesh),
        Kbar_(&Kbar),
        form_(form),
        source_(source),
        grav_(grav),
        quad_(quad),
        inc_space_(P1Space::homogeneous(mesh)) {}

  const QuadRule& quad() const { return quad_; }
  const Formulation& form() const { return form_; }

  // One linearization iteration; returns the updated iterate and the
  // H1_K norm of the increment.  `q_prev` is the converged previous-slab
  // solution (baseline of the time derivative).
  Vector linearization_step(const SchemeSpec& sch, double tau, double t_n,
                            const Vector& q_prev, const Vector& q_old,
                            double* dq_norm) const {
    const TriMesh& m = *mesh_;
    detail::SchemeState st =
        detail::prepare_scheme(form_, source_, tau, q_old);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(m.n_tris()) * 9);
    Vector rhs = Vector::Zero(m.n_verts());
    Vec2 g(grav_.gx, grav_.gy);
    for (int t = 0; t < m.n_tris(); ++t) {
      auto gh = hat_gradients(m, t);
      const Mat2& K = Kbar_->at(m.region[t]).K;
      Vec2 gq(0, 0);
      for (int i = 0; i < 3; ++i) gq += q_old[m.tris[t][i]] * gh[i];
      Eigen::Matrix3d loc = Eigen::Matrix3d::Zero();
      Eigen::Vector3d lrhs = Eigen::Vector3d::Zero();
      for (const auto& qp : quad_.pts) {
        Vec2 x = bary_point(m, t, qp.bary);
        double w = qp.w * m.area[t];
        double qv = 0, qpv = 0;
        for (int i = 0; i < 3; ++i) {
          qv += qp.bary[i] * q_old[m.tris[t][i]];
          qpv += qp.bary[i] * q_prev[m.tris[t][i]];
        }
        double L;
        Vec2 xi;
        detail::scheme_fields(sch, st, form_, source_, grav_, tau, t_n, x, qv,
                              gq, L, xi);
        double av = form_.a(qv), bv = form_.b(qv);
        double sv = form_.sat(qv), spv = form_.sat(qpv);
        double fv = source_.f(sv, x.x(), x.y(), t_n);
        Vec2 Kxi = K * xi;
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j)
            loc(i, j) += w * ((L / tau) * qp.bary[i] * qp.bary[j] +
                              av * gh[i].dot(K * gh[j]) +
                              Kxi.dot(gh[i]) * qp.bary[j]);
          lrhs[i] += w * (-(sv - spv) / tau * qp.bary[i] + fv * qp.bary[i] -
                          (av * gq + bv * g).dot(K * gh[i]));
        }
      }
      for (int i = 0; i < 3; ++i) {
        rhs[m.tris[t][i]] += lrhs[i];
        for (int j = 0; j < 3; ++j)
          trips.emplace_back(m.tris[t][i], m.tris[t][j], loc(i, j));
      }
    }
    SpMat A(m.n_verts(), m.n_verts());
    A.setFromTriplets(trips.begin(), trips.end());
    SpMat A_ff;
    Vector b_f;
    reduce_system(inc_space_, A, rhs, A_ff, b_f);
    Eigen::SparseLU<SpMat> lu(A_ff);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("linearization failure (" + scheme_name(sch) +
                               "): singular linearized system");
    Vector dq_f = lu.solve(b_f);
    dq_f += lu.solve(b_f - A_ff * dq_f);
    Vector dq = expand_solution(inc_space_, dq_f);
    if (dq_norm) *dq_norm = h1k_norm(dq);
    return q_old + dq;
  }

  // ||K^{1/2} grad v|| over the mesh for a nodal P1 field.
  double h1k_norm(const Vector& v) const {
    const TriMesh& m = *mesh_;
    double s = 0.0;
    for (int t = 0; t < m.n_tris(); ++t) {
      auto gh = hat_gradients(m, t);
      Vec2 gv(0, 0);
      for (int i = 0; i < 3; ++i) gv += v[m.tris[t][i]] * gh[i];
      s += m.area[t] * gv.dot(Kbar_->at(m.region[t]).K * gv);
    }
    return std::sqrt(s);
  }

  // Linearization-error certificates of the last increment (q_old -> q_new).
  void linearization_estimators(const SchemeSpec& sch, double tau, double t_n,
                                const Vector& q_old, const Vector& q_new,
                                double* lin1, double* lin2) const {
    const TriMesh& m = *mesh_;
    detail::SchemeState st =
        detail::prepare_scheme(form_, source_, tau, q_old);
    Vec2 g(grav_.gx, grav_.gy);
    double acc1 = 0.0, acc2 = 0.0;
    for (int t = 0; t < m.n_tris(); ++t) {
      auto gh = hat_gradients(m, t);
      const Mat2& K = Kbar_->at(m.region[t]).K;
      Vec2 gq_old(0, 0), gq_new(0, 0);
      for (int i = 0; i < 3; ++i) {
        gq_old += q_old[m.tris[t][i]] * gh[i];
        gq_new += q_new[m.tris[t][i]] * gh[i];
      }
      for (const auto& qp : quad_.pts) {
        Vec2 x = bary_point(m, t, qp.bary);
        double w = qp.w * m.area[t];
        double qov = 0, qnv = 0;
        for (int i = 0; i < 3; ++i) {
          qov += qp.bary[i] * q_old[m.tris[t][i]];
          qnv += qp.bary[i] * q_new[m.tris[t][i]];
        }
        double L;
        Vec2 xi;
        detail::scheme_fields(sch, st, form_, source_, grav_, tau, t_n, x,
                              qov, gq_old, L, xi);
        double so = form_.sat(qov), sn = form_.sat(qnv);
        double dq = qnv - qov;
        double r1 = (sn - so - L * dq) / tau -
                    (source_.f(sn, x.x(), x.y(), t_n) -
                     source_.f(so, x.x(), x.y(), t_n));
        acc1 += w * r1 * r1;
        Vec2 r2 = (form_.a(qnv) - form_.a(qov)) * gq_new +
                  (form_.b(qnv) - form_.b(qov)) * g + xi * dq;
        acc2 += w * r2.dot(K * r2);
      }
    }
    double C_P = M_1_PI;
    if (lin1) *lin1 = C_P * mesh_->diameter() * std::sqrt(acc1);
    if (lin2) *lin2 = std::sqrt(acc2);
  }

  // Linearized reconstruction data for the state (q_old -> q_new).
  SlabFluxData flux_data(const SchemeSpec& sch, double tau, double t_n,
                         const Vector& q_prev, const Vector& q_old,
                         const Vector& q_new) const {
    detail::SchemeState st =
        detail::prepare_scheme(form_, source_, tau, q_old);
    const TriMesh* mp = mesh_;
    Formulation form = form_;
    SourceModel source = source_;
    Gravity grav = grav_;
    SlabFluxData d;
    d.mesh = mp;
    d.G = [=](int t, const Vec2& x) {
      auto b = barycentric(*mp, t, x);
      double qov = 0, qpv = 0, qnv = 0;
      for (int i = 0; i < 3; ++i) {
        qov += b[i] * q_old[mp->tris[t][i]];
        qpv += b[i] * q_prev[mp->tris[t][i]];
        qnv += b[i] * q_new[mp->tris[t][i]];
      }
      auto gh = hat_gradients(*mp, t);
      Vec2 gq(0, 0);
      for (int i = 0; i < 3; ++i) gq += q_old[mp->tris[t][i]] * gh[i];
      double L;
      Vec2 xi;
      detail::scheme_fields(sch, st, form, source, grav, tau, t_n, x, qov, gq,
                            L, xi);
      double so = form.sat(qov), sp = form.sat(qpv);
      return source.f(so, x.x(), x.y(), t_n) - (so - sp) / tau -
             (L / tau) * (qnv - qov);
    };
    d.F = [=](int t, const Vec2& x) {
      auto b = barycentric(*mp, t, x);
      double qov = 0, qnv = 0;
      for (int i = 0; i < 3; ++i) {
        qov += b[i] * q_old[mp->tris[t][i]];
        qnv += b[i] * q_new[mp->tris[t][i]];
      }
      auto gh = hat_gradients(*mp, t);
      Vec2 gq_old(0, 0), gq_new(0, 0);
      for (int i = 0; i < 3; ++i) {
        gq_old += q_old[mp->tris[t][i]] * gh[i];
        gq_new += q_new[mp->tris[t][i]] * gh[i];
      }
      double L;
      Vec2 xi;
      detail::scheme_fields(sch, st, form, source, grav, tau, t_n, x, qov,
                            gq_old, L, xi);
      return Vec2(form.a(qov) * gq_new +
                  form.b(qov) * Vec2(grav.gx, grav.gy) + xi * (qnv - qov));
    };
    return d;
  }

  static std::array<double, 3> barycentric(const TriMesh& m, int t,
                                           const Vec2& x) {
    auto gh = hat_gradients(m, t);
    std::array<double, 3> b{};
    Vec2 c = m.centroid(t);
    for (int i = 0; i < 3; ++i) b[i] = 1.0 / 3.0 + gh[i].dot(x - c);
    return b;
  }

  static std::string scheme_name(const SchemeSpec& s) {
    switch (s.kind) {
      case SchemeKind::picard: return "picard";
      case SchemeKind::modified_picard: return "modified_picard";
      case SchemeKind::newton: return "newton";
      case SchemeKind::jaeger_kacur: return "jaeger_kacur";
      case SchemeKind::l_scheme: return "l_scheme";
      case SchemeKind::modified_l_scheme: return "modified_l_scheme";
    }
    return "?";
  }

  const TriMesh* mesh_;
  const PermeabilityField* Kbar_;
  Formulation form_;
  SourceModel source_;
  Gravity grav_;
  QuadRule quad_;
  P1Space inc_space_;
};

// ---------------------------------------------------------------------------
// Stopping rules
// ---------------------------------------------------------------------------
struct StoppingRule {
  bool adaptive = false;
  double fixed_tol = 1e-4;
  double gamma = 0.1;
  int max_iter = 200;
};

// Iterate one slab to convergence; q_init must satisfy the slab's Dirichlet
// data.  For the adaptive rule, `etaF` supplies the flux-estimator value of
// the current linearized state (required).
inline SlabRecord solve_slab(const SlabSolver& solver, const SchemeSpec& sch,
                             const StoppingRule& stop, int index, double t0,
                             double t1, const Vector& q_prev,
                             const Vector& q_init,
                             const EtaFCallback& etaF = nullptr) {
  SlabRecord rec;
  rec.index = index;
  rec.t0 = t0;
  rec.t1 = t1;
  rec.tau = t1 - t0;
  rec.q0 = q_prev;
  Vector q = q_init;
  for (int it = 1; it <= stop.max_iter; ++it) {
    double dqn = 0.0;
    Vector q_new =
        solver.linearization_step(sch, rec.tau, t1, q_prev, q, &dqn);
    rec.dq_norms.push_back(dqn);
    rec.iters = it;
    if (stop.adaptive) {
      if (!etaF)
        throw std::runtime_error("adaptive stopping requires a flux callback");
      rec.q_pre = q;
      q = q_new;
      // The first increment from the warm start measures the time step, not
      // the linearization error, so the certificate is only evaluated from
      // the second iterate onwards.
      if (it >= 2) {
        double l1, l2;
        solver.linearization_estimators(sch, rec.tau, t1, rec.q_pre, q, &l1,
                                        &l2);
        double ef =
            etaF(solver.flux_data(sch, rec.tau, t1, q_prev, rec.q_pre, q));
        rec.eta_lin1.push_back(l1);
        rec.eta_lin2.push_back(l2);
        rec.eta_flux.push_back(ef);
        if (l1 + l2 <= stop.gamma * ef) break;
      }
    } else {
      rec.q_pre = q;
      q = q_new;
      if (dqn <= stop.fixed_tol) break;
    }
    if (it == stop.max_iter)
      throw std::runtime_error("slab " + std::to_string(index) + " (" +
                               SlabSolver::scheme_name(sch) +
                               "): no convergence in " +
                               std::to_string(stop.max_iter) + " iterations");
  }
  rec.q1 = q;
  return rec;
}

// ---------------------------------------------------------------------------
// Time loop
// ---------------------------------------------------------------------------
struct RunConfig {
  double T = 1.0;
  int n_slabs = 25;
  SchemeSpec scheme;
  StoppingRule stop;
  // Dirichlet datum for the primary variable, (x, t) -> q.
  std::function<double(const Vec2&, double)> bc;
  // Initial saturation s0(x).
  std::function<double(const Vec2&)> s0;
  double s_clip_low = 1e-12;  // clip of the projected initial saturation
};

struct RunResult {
  Vector S0h;        // nodal projected initial saturation
  Vector q_initial;  // nodal primary variable at t = 0
  std::vector<SlabRecord> slabs;
  double avg_iters = 0.0;
};

inline RunResult run_time_loop(const SlabSolver& solver, const RunConfig& cfg,
                               const EtaFCallback& etaF = nullptr) {
  const TriMesh& m = *solver.mesh_;
  P1Space free_space = P1Space::unconstrained(m);
  DiscreteField s0h = l2_project_conforming(
      free_space, [&](int, const Vec2& x) { return cfg.s0(x); },
      solver.quad());
  RunResult out;
  out.S0h = s0h.coeffs;
  out.q_initial.resize(m.n_verts());
  for (int v = 0; v < m.n_verts(); ++v) {
    double s = std::clamp(out.S0h[v], cfg.s_clip_low, 1.0);
    out.S0h[v] = s;
    out.q_initial[v] = solver.form_.q_of_saturation(s);
  }
  double tau = cfg.T / cfg.n_slabs;
  Vector q_prev = out.q_initial;
  long total_iters = 0;
  for (int n = 1; n <= cfg.n_slabs; ++n) {
    double t0 = (n - 1) * tau, t1 = n * tau;
    Vector q_init = q_prev;
    for (int v = 0; v < m.n_verts(); ++v)
      if (m.on_dirichlet[v]) q_init[v] = cfg.bc(m.verts[v], t1);
    SlabRecord rec = solve_slab(solver, cfg.scheme, cfg.stop, n, t0, t1,
                                q_prev, q_init, etaF);
    total_iters += rec.iters;
    q_prev = rec.q1;
    out.slabs.push_back(std::move(rec));
  }
  out.avg_iters = static_cast<double>(total_iters) / cfg.n_slabs;
  return out;
}

// ---------------------------------------------------------------------------
// Time-continuous interpolant on one slab
// ---------------------------------------------------------------------------
class TimeInterpolant {
 public:
  TimeInterpolant(const TriMesh& mesh, const Formulation& form,
                  const Vector& q0, const Vector& q1, double t0, double t1)
      : mesh_(&mesh), form_(form), q0_(&q0), q1_(&q1), t0_(t0), t1_(t1) {}

  double t0() const { return t0_; }
  double t1() const { return t1_; }
  double tau() const { return t1_ - t0_; }
  const Formulation& form() const { return form_; }

  struct PointState {
    double S_lo, S_hi;      // sat(q) at the slab ends at this point
    double Psi_lo, Psi_hi;  // K(q) at the slab ends
    Vec2 gS_lo, gS_hi;      // grad sat(q_h) = sat'(q) grad q_h
    Vec2 gPsi_lo, gPsi_hi;  // grad K(q_h) = a(q) grad q_h
  };

  PointState point_state(int t, const std::array<double, 3>& b) const {
    const TriMesh& m = *mesh_;
    auto gh = hat_gradients(m, t);
    double v0 = 0, v1 = 0;
    Vec2 g0(0, 0), g1(0, 0);
    for (int i = 0; i < 3; ++i) {
      v0 += b[i] * (*q0_)[m.tris[t][i]];
      v1 += b[i] * (*q1_)[m.tris[t][i]];
      g0 += (*q0_)[m.tris[t][i]] * gh[i];
      g1 += (*q1_)[m.tris[t][i]] * gh[i];
    }
    PointState ps;
    ps.S_lo = form_.sat(v0);
    ps.S_hi = form_.sat(v1);
    ps.Psi_lo = form_.kirchhoff(v0);
    ps.Psi_hi = form_.kirchhoff(v1);
    ps.gS_lo = form_.dsat(v0) * g0;
    ps.gS_hi = form_.dsat(v1) * g1;
    ps.gPsi_lo = form_.a(v0) * g0;
    ps.gPsi_hi = form_.a(v1) * g1;
    return ps;
  }

  double weight(double t) const {
    return std::clamp((t - t0_) / (t1_ - t0_), 0.0, 1.0);
  }

  // Psi_ht(t) = P_c(S_interp) + [Psi_interp - P_M]_+ .
  double psi(double t, const PointState& ps) const {
    const MediumModel& M = *form_.model;
    double w = weight(t);
    double Shat = (1 - w) * ps.S_lo + w * ps.S_hi;
    double Phat = (1 - w) * ps.Psi_lo + w * ps.Psi_hi;
    double val = M.total_pressure(Shat);
    if (!M.linear && Phat > M.P_M) val += Phat - M.P_M;
    return val;
  }

  Vec2 grad_psi(double t, const PointState& ps) const {
    const MediumModel& M = *form_.model;
    double w = weight(t);
    double Shat = (1 - w) * ps.S_lo + w * ps.S_hi;
    double Phat = (1 - w) * ps.Psi_lo + w * ps.Psi_hi;
    Vec2 gS = (1 - w) * ps.gS_lo + w * ps.gS_hi;
    Vec2 g = M.diffusivity(Shat) * gS;
    if (!M.linear && Phat > M.P_M)
      g += (1 - w) * ps.gPsi_lo + w * ps.gPsi_hi;
    return g;
  }

  double s(double t, const PointState& ps) const {
    const MediumModel& M = *form_.model;
    if (M.linear) {  // theta = identity
      double w = weight(t);
      return (1 - w) * ps.S_lo + w * ps.S_hi;
    }
    return M.theta(psi(t, ps));
  }

  Vec2 grad_s(double t, const PointState& ps) const {
    const MediumModel& M = *form_.model;
    if (M.linear) {
      double w = weight(t);
      return (1 - w) * ps.gS_lo + w * ps.gS_hi;
    }
    return dtheta_onesided(psi(t, ps)) * grad_psi(t, ps);
  }

  // dt s_ht = theta'(Psi_ht) [ P_c'(S_interp) dS/tau + 1{Psi_interp > P_M} dPsi/tau ],
  // with the one-sided theta' from the nondegenerate side at the kink.
  double ds_dt(double t, const PointState& ps) const {
    const MediumModel& M = *form_.model;
    double dtau = t1_ - t0_;
    if (M.linear) return (ps.S_hi - ps.S_lo) / dtau;
    double w = weight(t);
    double Shat = (1 - w) * ps.S_lo + w * ps.S_hi;
    double Phat = (1 - w) * ps.Psi_lo + w * ps.Psi_hi;
    double dPsi_dt = M.diffusivity(Shat) * (ps.S_hi - ps.S_lo) / dtau;
    if (Phat > M.P_M) dPsi_dt += (ps.Psi_hi - ps.Psi_lo) / dtau;
    return dtheta_onesided(psi(t, ps)) * dPsi_dt;
  }

  // (S_hi - S_lo)/tau, the single-regime time derivative.
  double ds_dt_nodal(const PointState& ps) const {
    return (ps.S_hi - ps.S_lo) / (t1_ - t0_);
  }

  // Both slab ends on the same side of the saturation threshold at a point.
  bool single_regime(const PointState& ps) const {
    const MediumModel& M = *form_.model;
    if (M.linear) return true;
    return (ps.Psi_lo <= M.P_M && ps.Psi_hi <= M.P_M) ||
           (ps.Psi_lo >= M.P_M && ps.Psi_hi >= M.P_M);
  }

 private:
  double dtheta_onesided(double Psi) const {
    const MediumModel& M = *form_.model;
    if (Psi > M.P_M) return 0.0;
    if (Psi >= M.P_M - 1e-14) return 1.0 / M.diffusivity(1.0);
    return M.dtheta(Psi);
  }

  const TriMesh* mesh_;
  Formulation form_;
  const Vector* q0_;
  const Vector* q1_;
  double t0_, t1_;
};

// Elements whose maximum of Psi_ht(t) over vertices and quadrature points
// exceeds the saturation threshold P_M.
inline std::vector<int> detect_omega_deg(const TimeInterpolant& interp,
                                         const TriMesh& mesh, double t,
                                         const QuadRule& rule = tri_rule(10)) {
  const double P_M = interp.form().model->P_M;
  std::vector<int> out;
  std::vector<std::array<double, 3>> samples;
  samples.push_back({1, 0, 0});
  samples.push_back({0, 1, 0});
  samples.push_back({0, 0, 1});
  for (const auto& q : rule.pts) samples.push_back(q.bary);
  for (int k = 0; k < mesh.n_tris(); ++k) {
    double mx = -kInf;
    for (const auto& b : samples)
      mx = std::max(mx, interp.psi(t, interp.point_state(k, b)));
    if (mx > P_M) out.push_back(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Steady maximum-principle subsolution
// ---------------------------------------------------------------------------

// Solves (Kbar kappa(S(z)) [grad z + g], grad phi) = (rhs, phi) with z = J on
// the whole boundary, by Picard iteration on the coefficient; returns the
// nodal field and its saturation minimum.
struct SteadySubsolution {
  Vector z;
  double S_min = 1.0;
};

inline SteadySubsolution steady_subsolution(
    const TriMesh& mesh, const PermeabilityField& Kbar,
    const MediumModel& model, const ScalarFn& rhs, const Gravity& grav,
    double J, double tol = 1e-8, int max_iter = 500) {
  std::function<double(const Vec2&)> bc = [J](const Vec2&) { return J; };
  P1Space space = P1Space::with_dirichlet(mesh, bc);
  Vector z = Vector::Constant(mesh.n_verts(), J);
  SlabSolver aux(mesh, Kbar, pressure_form(model), SourceModel{}, grav);
  QuadRule rule = tri_rule(10);
  Vec2 g(grav.gx, grav.gy);
  for (int it = 0; it < max_iter; ++it) {
    auto w = [&](int t, const Vec2& x) {
      auto b = SlabSolver::barycentric(mesh, t, x);
      double zv = 0;
      for (int i = 0; i < 3; ++i) zv += b[i] * z[mesh.tris[t][i]];
      return model.kappa(model.saturation(zv));
    };
    SpMat A = assemble_stiffness(space, Kbar, w, rule);
    Vector b = assemble_load(space, rhs, rule);
    b -= assemble_flux_load(space, Kbar,
                            [&](int t, const Vec2& x) { return Vec2(w(t, x) * g); },
                            rule);
    Vector z_new = solve_dirichlet(space, A, b, "steady subsolution");
    double dz = aux.h1k_norm(z_new - z);
    z = z_new;
    if (dz <= tol) {
      SteadySubsolution out;
      out.z = z;
      out.S_min = 1.0;
      for (int v = 0; v < mesh.n_verts(); ++v)
        out.S_min = std::min(out.S_min, model.saturation(z[v]));
      return out;
    }
  }
  throw std::runtime_error("steady_subsolution: no convergence");
}

}  // namespace richards
