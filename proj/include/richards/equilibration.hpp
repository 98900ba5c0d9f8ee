// Patchwise equilibrated flux reconstruction.
//
// Around every mesh vertex a, the hat-weighted data
//   g^a  = psi_a Lambda(G) - grad psi_a . Kbar Pi_RT(F)      (broken P2)
//   tau^a = -psi_a Kbar Pi_RT(F)
// are lifted to a local H(div)-conforming Raviart-Thomas space of order 2 by
// the constrained minimization
//   sigma^a = argmin ||Kbar^{-1/2}(v - tau^a)||  s.t.  div v = g^a,
// solved as a dense mixed saddle-point system; the global flux is the
// dof-wise sum sigma = sum_a sigma^a (zero extension).  The resulting flux
// satisfies div sigma = Lambda(G) elementwise, which is the discrete mass
// balance used by the a posteriori bounds.
//
// RTN2 on a triangle (15 dofs): 3 normal-moment dofs per edge (Legendre
// moments along the globally oriented edge, canonical normal), 6 interior
// moments against P1 vectors.  Shared edge dofs make the assembled field
// H(div)-conforming.  Local bases are built as duals of the 15 functionals
// over the generator set P2(K)^2 + (homogeneous P2) * x in centroid-scaled
// coordinates.
//
// Patch boundary conditions: v.n = 0 on all of the patch boundary except
// edges lying on Dirichlet parts of the domain boundary, which stay free;
// Neumann parts carry the physical no-flux condition v.n = 0.  Patches with
// no free boundary trace (interior vertices, all-Neumann boundary vertices)
// get a zero-mean pressure constraint via one bordered Lagrange row, and
// their data must satisfy the compatibility identity (g^a, 1) = 0.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "richards/fem.hpp"
#include "richards/solver.hpp"

namespace richards {

namespace rtn2 {

// Scalar P2 monomials in scaled coordinates.
inline double p2_mono(int j, double X, double Y) {
  switch (j) {
    case 0: return 1.0;
    case 1: return X;
    case 2: return Y;
    case 3: return X * X;
    case 4: return X * Y;
    default: return Y * Y;
  }
}

// Generator fields m_k (k = 0..14) and their physical divergences; scaled
// coordinate X = (x - c)/h.
inline Vec2 generator(int k, const Vec2& Xh) {
  double X = Xh.x(), Y = Xh.y();
  if (k < 6) return Vec2(p2_mono(k, X, Y), 0.0);
  if (k < 12) return Vec2(0.0, p2_mono(k - 6, X, Y));
  double h = (k == 12) ? X * X : (k == 13 ? X * Y : Y * Y);
  return h * Vec2(X, Y);
}

inline double generator_div(int k, const Vec2& Xh, double hK) {
  double X = Xh.x(), Y = Xh.y();
  double d;
  if (k < 6) {
    const double dx[6] = {0.0, 1.0, 0.0, 2.0 * X, Y, 0.0};
    d = dx[k];
  } else if (k < 12) {
    const double dy[6] = {0.0, 0.0, 1.0, 0.0, X, 2.0 * Y};
    d = dy[k - 6];
  } else {
    // div(h x) = (grad h).x + 2h = 4h for homogeneous quadratic h
    d = 4.0 * ((k == 12) ? X * X : (k == 13 ? X * Y : Y * Y));
  }
  return d / hK;
}

// Shifted Legendre polynomials on [0,1].
inline double legendre01(int j, double s) {
  if (j == 0) return 1.0;
  if (j == 1) return 2.0 * s - 1.0;
  return 6.0 * s * s - 6.0 * s + 1.0;
}

}  // namespace rtn2

// ---------------------------------------------------------------------------
// RTN2Space: per-triangle dual bases and the global dof layout.
// ---------------------------------------------------------------------------
class RTN2Space {
 public:
  static constexpr int kLocal = 15;

  explicit RTN2Space(const TriMesh& mesh) : mesh_(&mesh) {
    Gauss1D ge = gauss_legendre01(4);
    QuadRule qr = tri_rule(10);
    dual_.resize(mesh.n_tris());
    l2g_.resize(mesh.n_tris());
    for (int t = 0; t < mesh.n_tris(); ++t) {
      Vec2 c = mesh.centroid(t);
      double h = mesh.h_K[t];
      Eigen::Matrix<double, kLocal, kLocal> V;
      V.setZero();
      // Edge-moment functionals: local edge i is opposite local vertex i.
      for (int i = 0; i < 3; ++i) {
        int e = mesh.tri_edges[t][i];
        const MeshEdge& ed = mesh.edges[e];
        Vec2 p0 = mesh.verts[ed.v0], p1 = mesh.verts[ed.v1];
        Vec2 d = p1 - p0;
        double len = d.norm();
        Vec2 n(d.y() / len, -d.x() / len);  // canonical (global) normal
        for (size_t gq = 0; gq < ge.x.size(); ++gq) {
          double s = ge.x[gq];
          Vec2 Xh = (p0 + s * d - c) / h;
          for (int k = 0; k < kLocal; ++k) {
            double vn = rtn2::generator(k, Xh).dot(n);
            for (int j = 0; j < 3; ++j)
              V(3 * i + j, k) += ge.w[gq] * len * vn * rtn2::legendre01(j, s);
          }
        }
        for (int j = 0; j < 3; ++j) l2g_[t][3 * i + j] = 3 * e + j;
      }
      // Interior functionals: moments against P1 vectors (scaled coords).
      for (const auto& qp : qr.pts) {
        Vec2 Xh = (bary_point(mesh, t, qp.bary) - c) / h;
        double w = qp.w * mesh.area[t];
        double lin[3] = {1.0, Xh.x(), Xh.y()};
        for (int k = 0; k < kLocal; ++k) {
          Vec2 m = rtn2::generator(k, Xh);
          for (int j = 0; j < 3; ++j) {
            V(9 + j, k) += w * m.x() * lin[j];
            V(12 + j, k) += w * m.y() * lin[j];
          }
        }
      }
      for (int j = 0; j < 6; ++j)
        l2g_[t][9 + j] = 3 * mesh.n_edges() + 6 * t + j;
      Eigen::FullPivLU<Eigen::Matrix<double, kLocal, kLocal>> lu(V);
      if (!lu.isInvertible())
        throw std::runtime_error("RTN2Space: singular local dof matrix");
      dual_[t] = lu.inverse();
    }
  }

  const TriMesh& mesh() const { return *mesh_; }
  int n_dofs() const { return 3 * mesh_->n_edges() + 6 * mesh_->n_tris(); }
  int global_dof(int t, int k) const { return l2g_[t][k]; }

  // All 15 local basis functions (and optionally divergences) at x.
  void eval(int t, const Vec2& x, std::array<Vec2, kLocal>& B,
            std::array<double, kLocal>* D = nullptr) const {
    Vec2 Xh = (x - mesh_->centroid(t)) / mesh_->h_K[t];
    Vec2 gen[kLocal];
    double gdiv[kLocal];
    for (int k = 0; k < kLocal; ++k) {
      gen[k] = rtn2::generator(k, Xh);
      if (D) gdiv[k] = rtn2::generator_div(k, Xh, mesh_->h_K[t]);
    }
    for (int k = 0; k < kLocal; ++k) {
      Vec2 v(0, 0);
      double dv = 0;
      for (int j = 0; j < kLocal; ++j) {
        v += dual_[t](j, k) * gen[j];
        if (D) dv += dual_[t](j, k) * gdiv[j];
      }
      B[k] = v;
      if (D) (*D)[k] = dv;
    }
  }

 private:
  const TriMesh* mesh_;
  std::vector<Eigen::Matrix<double, kLocal, kLocal>> dual_;
  std::vector<std::array<int, kLocal>> l2g_;
};

// ---------------------------------------------------------------------------
// EquilibratedFlux
// ---------------------------------------------------------------------------
struct EquilibratedFlux {
  const RTN2Space* space = nullptr;
  Vector coef;

  Vec2 eval(int t, const Vec2& x) const {
    std::array<Vec2, RTN2Space::kLocal> B;
    space->eval(t, x, B);
    Vec2 v(0, 0);
    for (int k = 0; k < RTN2Space::kLocal; ++k)
      v += coef[space->global_dof(t, k)] * B[k];
    return v;
  }
  double div(int t, const Vec2& x) const {
    std::array<Vec2, RTN2Space::kLocal> B;
    std::array<double, RTN2Space::kLocal> D;
    space->eval(t, x, B, &D);
    double d = 0;
    for (int k = 0; k < RTN2Space::kLocal; ++k)
      d += coef[space->global_dof(t, k)] * D[k];
    return d;
  }
};

// ---------------------------------------------------------------------------
// Patch problems
// ---------------------------------------------------------------------------
// One vertex patch, assembled over the free flux dofs only: minimize
// (1/2) sigma.A sigma - rhsA.sigma subject to B sigma = g, where A is the
// Kbar^{-1}-weighted Gram matrix of the local basis, B holds the broken-P2
// divergence moments, and rhsA = (Kbar^{-1} tau^a, v).
struct PatchProblem {
  int vertex = -1;
  std::vector<int> tris;
  std::vector<int> dof_of_free;  // global flux dof of each local unknown
  bool mean_constrained = false;
  Eigen::MatrixXd A, B;
  Eigen::VectorXd rhsA, g;
  Eigen::VectorXd pmass;  // moments (u_j, 1) of the pressure basis
  double g_scale = 0.0;   // integral of |g^a| over the patch
  Eigen::VectorXd sigma;  // filled by solve_patch
};

inline PatchProblem build_patch_problem(const RTN2Space& rt2,
                                        const PermeabilityField& Kbar, int a,
                                        const BrokenP1& LG,
                                        const BrokenRT1& PF,
                                        const QuadRule& rule) {
  const TriMesh& mesh = rt2.mesh();
  PatchProblem P;
  P.vertex = a;
  P.tris = mesh.patch[a];
  std::vector<int> tri_of(mesh.n_tris(), -1);
  for (size_t i = 0; i < P.tris.size(); ++i) tri_of[P.tris[i]] = (int)i;

  // Classify the edges appearing in the patch: interior edges and Dirichlet
  // domain-boundary edges carry unknowns, everything else is pinned to
  // v.n = 0.
  std::vector<char> edge_free(mesh.n_edges(), 0), seen(mesh.n_edges(), 0);
  bool has_free_boundary = false;
  for (int t : P.tris)
    for (int i = 0; i < 3; ++i) {
      int e = mesh.tri_edges[t][i];
      if (seen[e]) continue;
      seen[e] = 1;
      const MeshEdge& ed = mesh.edges[e];
      bool interior_to_patch =
          ed.t1 != -1 && tri_of[ed.t0] >= 0 && tri_of[ed.t1] >= 0;
      bool on_domain_dirichlet = (ed.t1 == -1 && ed.marker > 0);
      edge_free[e] = interior_to_patch || on_domain_dirichlet;
      if (on_domain_dirichlet) has_free_boundary = true;
    }
  P.mean_constrained = !has_free_boundary;

  std::vector<int> free_of_dof(rt2.n_dofs(), -1);
  auto add_dof = [&](int gd) {
    if (free_of_dof[gd] < 0) {
      free_of_dof[gd] = (int)P.dof_of_free.size();
      P.dof_of_free.push_back(gd);
    }
  };
  for (int t : P.tris) {
    for (int i = 0; i < 3; ++i) {
      int e = mesh.tri_edges[t][i];
      if (edge_free[e])
        for (int j = 0; j < 3; ++j) add_dof(3 * e + j);
    }
    for (int j = 0; j < 6; ++j) add_dof(rt2.global_dof(t, 9 + j));
  }
  int nf = (int)P.dof_of_free.size();
  int np = 6 * (int)P.tris.size();
  P.A.setZero(nf, nf);
  P.B.setZero(np, nf);
  P.rhsA.setZero(nf);
  P.g.setZero(np);
  P.pmass.setZero(np);

  for (size_t ti = 0; ti < P.tris.size(); ++ti) {
    int t = P.tris[ti];
    int la = -1;  // local index of the patch vertex in this triangle
    for (int i = 0; i < 3; ++i)
      if (mesh.tris[t][i] == a) la = i;
    Vec2 gpsi = hat_gradients(mesh, t)[la];
    const Mat2& K = Kbar.at(mesh.region[t]).K;
    const Mat2& Kinv = Kbar.at(mesh.region[t]).invK;
    Vec2 c = mesh.centroid(t);
    double hK = mesh.h_K[t];
    std::array<int, RTN2Space::kLocal> lf{};
    for (int k = 0; k < RTN2Space::kLocal; ++k)
      lf[k] = free_of_dof[rt2.global_dof(t, k)];

    for (const auto& qp : rule.pts) {
      Vec2 x = bary_point(mesh, t, qp.bary);
      double w = qp.w * mesh.area[t];
      std::array<Vec2, RTN2Space::kLocal> Bv;
      std::array<double, RTN2Space::kLocal> Dv;
      rt2.eval(t, x, Bv, &Dv);
      double psi = qp.bary[la];
      Vec2 pf = PF.eval(t, x);
      double ga = psi * LG.eval(t, qp.bary) - gpsi.dot(K * pf);
      P.g_scale += w * std::abs(ga);
      Vec2 Xh = (x - c) / hK;
      double pb[6];
      for (int j = 0; j < 6; ++j) pb[j] = rtn2::p2_mono(j, Xh.x(), Xh.y());
      for (int k = 0; k < RTN2Space::kLocal; ++k) {
        int I = lf[k];
        if (I < 0) continue;
        // (Kbar^{-1} tau^a, v) with tau^a = -psi Kbar Pi_RT F
        P.rhsA[I] += w * (-psi) * pf.dot(Bv[k]);
        for (int k2 = 0; k2 <= k; ++k2) {
          int J = lf[k2];
          if (J >= 0) {
            double aij = w * Bv[k].dot(Kinv * Bv[k2]);
            P.A(I, J) += aij;
            if (J != I) P.A(J, I) += aij;
          }
        }
        for (int j = 0; j < 6; ++j)
          P.B(6 * (int)ti + j, I) += w * Dv[k] * pb[j];
      }
      for (int j = 0; j < 6; ++j) {
        P.g[6 * (int)ti + j] += w * ga * pb[j];
        P.pmass[6 * (int)ti + j] += w * pb[j];
      }
    }
  }
  return P;
}

inline void solve_patch(PatchProblem& P) {
  int nf = (int)P.A.rows();
  int np = (int)P.B.rows();
  if (P.mean_constrained) {
    // Fully constrained normal trace forces (g^a, 1) = 0; reject data that
    // violates it beyond round-off accumulation.
    double g_int = 0.0;
    for (int ti = 0; 6 * ti < np; ++ti) g_int += P.g[6 * ti];
    if (std::abs(g_int) > 1e-7 * (P.g_scale + 1e-14))
      throw std::runtime_error(
          "equilibration: incompatible patch data at vertex " +
          std::to_string(P.vertex));
  }
  int nsys = nf + np + (P.mean_constrained ? 1 : 0);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nsys, nsys);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nsys);
  M.topLeftCorner(nf, nf) = P.A;
  M.block(0, nf, nf, np) = -P.B.transpose();  // -(r, div v)
  M.block(nf, 0, np, nf) = P.B;               // (div sigma, u)
  rhs.head(nf) = P.rhsA;
  rhs.segment(nf, np) = P.g;
  if (P.mean_constrained) {
    // Bordered Lagrange row pinning the mean of the pressure multiplier;
    // it removes the constant-pressure nullspace of the saddle system.
    M.block(nf, nsys - 1, np, 1) = P.pmass;
    M.block(nsys - 1, nf, 1, np) = P.pmass.transpose();
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  Eigen::VectorXd sol = lu.solve(rhs);
  sol += lu.solve(rhs - M * sol);  // one step of iterative refinement
  P.sigma = sol.head(nf);
}

// ---------------------------------------------------------------------------
// Global equilibration
// ---------------------------------------------------------------------------
inline EquilibratedFlux equilibrate_flux(const RTN2Space& rt2,
                                         const PermeabilityField& Kbar,
                                         const SlabFluxData& data,
                                         const QuadRule& rule = tri_rule(10)) {
  const TriMesh& mesh = rt2.mesh();
  BrokenP1 LG = l2_project_broken(mesh, data.G, rule);
  BrokenRT1 PF = rt_project(mesh, Kbar, data.F, rule);
  EquilibratedFlux flux;
  flux.space = &rt2;
  flux.coef = Vector::Zero(rt2.n_dofs());
  for (int a = 0; a < mesh.n_verts(); ++a) {
    PatchProblem P = build_patch_problem(rt2, Kbar, a, LG, PF, rule);
    solve_patch(P);
    for (size_t i = 0; i < P.dof_of_free.size(); ++i)
      flux.coef[P.dof_of_free[i]] += P.sigma[(int)i];
  }
  return flux;
}

// Per-element mass-balance residuals: integral over K of (div sigma - G);
// zero (to projection precision) when div sigma = Lambda(G).
inline std::vector<double> mass_balance_residuals(
    const EquilibratedFlux& flux, const SlabFluxData& data,
    const QuadRule& rule = tri_rule(10)) {
  const TriMesh& mesh = flux.space->mesh();
  std::vector<double> out(mesh.n_tris(), 0.0);
  for (int t = 0; t < mesh.n_tris(); ++t) {
    double s = 0.0;
    for (const auto& qp : rule.pts) {
      Vec2 x = bary_point(mesh, t, qp.bary);
      s += qp.w * mesh.area[t] * (flux.div(t, x) - data.G(t, x));
    }
    out[t] = s;
  }
  return out;
}

}  // namespace richards
