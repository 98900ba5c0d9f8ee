// P1 conforming finite-element machinery: spaces with Dirichlet handling,
// mass/stiffness/load assembly, elementwise L2 and weighted Raviart-Thomas
// projections, sparse SPD solves, and the discrete dual-norm lifting
//   (Kbar grad G, grad phi) = <rho, phi>,   ||rho||_{-1,K} := ||Kbar^{1/2} grad G||,
// computed on a once-refined copy of the run mesh (twice-refined submesh for
// the localized variant).

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "richards/mesh.hpp"
#include "richards/quadrature.hpp"

namespace richards {

using SpMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

// Scalar/vector integrands sampled at physical points; the triangle index is
// passed so integrands may be piecewise-defined.
using ScalarFn = std::function<double(int, const Vec2&)>;
using VectorFn = std::function<Vec2(int, const Vec2&)>;

inline Vec2 bary_point(const TriMesh& mesh, int t,
                       const std::array<double, 3>& b) {
  return b[0] * mesh.tri_vertex(t, 0) + b[1] * mesh.tri_vertex(t, 1) +
         b[2] * mesh.tri_vertex(t, 2);
}

// Constant gradients of the three hat functions on triangle t.
inline std::array<Vec2, 3> hat_gradients(const TriMesh& mesh, int t) {
  Vec2 a = mesh.tri_vertex(t, 0), b = mesh.tri_vertex(t, 1),
       c = mesh.tri_vertex(t, 2);
  double twoA = 2.0 * mesh.area[t];
  return {Vec2(b.y() - c.y(), c.x() - b.x()) / twoA,
          Vec2(c.y() - a.y(), a.x() - c.x()) / twoA,
          Vec2(a.y() - b.y(), b.x() - a.x()) / twoA};
}

// ---------------------------------------------------------------------------
// P1Space
// ---------------------------------------------------------------------------
class P1Space {
 public:
  // dirichlet_value = nullptr imposes nothing; otherwise every vertex lying
  // on a Dirichlet-marked boundary edge is constrained to its nodal value.
  P1Space(const TriMesh& mesh,
          const std::function<double(const Vec2&)>* dirichlet_value)
      : mesh_(&mesh) {
    int V = mesh.n_verts();
    free_of_dof_.assign(V, -1);
    dir_val_.assign(V, 0.0);
    is_dir_.assign(V, false);
    if (dirichlet_value) {
      for (int v = 0; v < V; ++v)
        if (mesh.on_dirichlet[v]) {
          is_dir_[v] = true;
          dir_val_[v] = (*dirichlet_value)(mesh.verts[v]);
        }
    }
    for (int v = 0; v < V; ++v)
      if (!is_dir_[v]) {
        free_of_dof_[v] = static_cast<int>(dof_of_free_.size());
        dof_of_free_.push_back(v);
      }
  }

  static P1Space with_dirichlet(const TriMesh& mesh,
                                std::function<double(const Vec2&)> g) {
    return P1Space(mesh, &g);
  }
  static P1Space homogeneous(const TriMesh& mesh) {
    std::function<double(const Vec2&)> z = [](const Vec2&) { return 0.0; };
    return P1Space(mesh, &z);
  }
  static P1Space unconstrained(const TriMesh& mesh) {
    return P1Space(mesh, nullptr);
  }

  const TriMesh& mesh() const { return *mesh_; }
  int n_dofs() const { return mesh_->n_verts(); }
  int n_free() const { return static_cast<int>(dof_of_free_.size()); }
  bool is_dirichlet(int v) const { return is_dir_[v]; }
  double dirichlet_value(int v) const { return dir_val_[v]; }
  int free_index(int v) const { return free_of_dof_[v]; }
  int dof_of_free(int i) const { return dof_of_free_[i]; }

  // Full-size vector holding the Dirichlet data (zero on free dofs).
  Vector dirichlet_vector() const {
    Vector d = Vector::Zero(n_dofs());
    for (int v = 0; v < n_dofs(); ++v)
      if (is_dir_[v]) d[v] = dir_val_[v];
    return d;
  }

 private:
  const TriMesh* mesh_;
  std::vector<int> free_of_dof_, dof_of_free_;
  std::vector<double> dir_val_;
  std::vector<bool> is_dir_;
};

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------
struct DiscreteField {
  const P1Space* space = nullptr;
  Vector coeffs;

  double eval(int t, const std::array<double, 3>& b) const {
    const TriMesh& m = space->mesh();
    return b[0] * coeffs[m.tris[t][0]] + b[1] * coeffs[m.tris[t][1]] +
           b[2] * coeffs[m.tris[t][2]];
  }
  Vec2 gradient(int t) const {  // piecewise constant for P1
    const TriMesh& m = space->mesh();
    auto g = hat_gradients(m, t);
    return coeffs[m.tris[t][0]] * g[0] + coeffs[m.tris[t][1]] * g[1] +
           coeffs[m.tris[t][2]] * g[2];
  }
};

// Elementwise-P1 (broken) scalar field in barycentric coefficients.
struct BrokenP1 {
  const TriMesh* mesh = nullptr;
  std::vector<std::array<double, 3>> coef;  // per triangle

  double eval(int t, const std::array<double, 3>& b) const {
    return coef[t][0] * b[0] + coef[t][1] * b[1] + coef[t][2] * b[2];
  }
};

// Broken Raviart-Thomas-Nedelec field of order 1:
// RTN1(K) = P1(K)^2 + P1tilde(K) x, 8 coefficients per triangle over the
// centroid-scaled monomial basis (for conditioning).
struct BrokenRT1 {
  const TriMesh* mesh = nullptr;
  std::vector<Eigen::Matrix<double, 8, 1>> coef;

  static void basis(const Vec2& xh, Vec2 out[8]) {
    double x = xh.x(), y = xh.y();
    out[0] = Vec2(1, 0);
    out[1] = Vec2(x, 0);
    out[2] = Vec2(y, 0);
    out[3] = Vec2(0, 1);
    out[4] = Vec2(0, x);
    out[5] = Vec2(0, y);
    out[6] = Vec2(x * x, x * y);  // x * (x, y)
    out[7] = Vec2(x * y, y * y);  // y * (x, y)
  }

  Vec2 eval(int t, const Vec2& x) const {
    Vec2 xh = (x - mesh->centroid(t)) / mesh->h_K[t];
    Vec2 b[8];
    basis(xh, b);
    Vec2 v(0, 0);
    for (int i = 0; i < 8; ++i) v += coef[t][i] * b[i];
    return v;
  }
};

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------
inline ScalarFn unit_weight() {
  return [](int, const Vec2&) { return 1.0; };
}

inline SpMat assemble_mass(const P1Space& space, const ScalarFn& w,
                           const QuadRule& rule = tri_rule_deg5()) {
  const TriMesh& m = space.mesh();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(m.n_tris()) * 9);
  for (int t = 0; t < m.n_tris(); ++t) {
    Eigen::Matrix3d loc = Eigen::Matrix3d::Zero();
    for (const auto& q : rule.pts) {
      double wq = w(t, bary_point(m, t, q.bary)) * q.w * m.area[t];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) loc(i, j) += wq * q.bary[i] * q.bary[j];
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trips.emplace_back(m.tris[t][i], m.tris[t][j], loc(i, j));
  }
  SpMat A(m.n_verts(), m.n_verts());
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

inline SpMat assemble_stiffness(const P1Space& space,
                                const PermeabilityField& Kbar,
                                const ScalarFn& w,
                                const QuadRule& rule = tri_rule_deg5()) {
  const TriMesh& m = space.mesh();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(m.n_tris()) * 9);
  for (int t = 0; t < m.n_tris(); ++t) {
    auto g = hat_gradients(m, t);
    const Mat2& K = Kbar.at(m.region[t]).K;
    double wint = 0.0;
    for (const auto& q : rule.pts)
      wint += w(t, bary_point(m, t, q.bary)) * q.w;
    wint *= m.area[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trips.emplace_back(m.tris[t][i], m.tris[t][j],
                           wint * g[i].dot(K * g[j]));
  }
  SpMat A(m.n_verts(), m.n_verts());
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

inline Vector assemble_load(const P1Space& space, const ScalarFn& fn,
                            const QuadRule& rule = tri_rule_deg5()) {
  const TriMesh& m = space.mesh();
  Vector b = Vector::Zero(m.n_verts());
  for (int t = 0; t < m.n_tris(); ++t)
    for (const auto& q : rule.pts) {
      double v = fn(t, bary_point(m, t, q.bary)) * q.w * m.area[t];
      for (int i = 0; i < 3; ++i) b[m.tris[t][i]] += v * q.bary[i];
    }
  return b;
}

// Load against hat gradients: b_a = int vf . (Kbar grad psi_a).
inline Vector assemble_flux_load(const P1Space& space,
                                 const PermeabilityField& Kbar,
                                 const VectorFn& vf,
                                 const QuadRule& rule = tri_rule_deg5()) {
  const TriMesh& m = space.mesh();
  Vector b = Vector::Zero(m.n_verts());
  for (int t = 0; t < m.n_tris(); ++t) {
    auto g = hat_gradients(m, t);
    const Mat2& K = Kbar.at(m.region[t]).K;
    Vec2 acc(0, 0);
    for (const auto& q : rule.pts)
      acc += q.w * vf(t, bary_point(m, t, q.bary));
    acc *= m.area[t];
    for (int i = 0; i < 3; ++i) b[m.tris[t][i]] += acc.dot(K * g[i]);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Dirichlet elimination and SPD solve
// ---------------------------------------------------------------------------
inline void reduce_system(const P1Space& space, const SpMat& A,
                          const Vector& b, SpMat& A_ff, Vector& b_f) {
  int nf = space.n_free();
  Vector d = space.dirichlet_vector();
  Vector bd = b - A * d;
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      int i = space.free_index(static_cast<int>(it.row()));
      int j = space.free_index(static_cast<int>(it.col()));
      if (i >= 0 && j >= 0) trips.emplace_back(i, j, it.value());
    }
  A_ff.resize(nf, nf);
  A_ff.setFromTriplets(trips.begin(), trips.end());
  b_f.resize(nf);
  for (int i = 0; i < nf; ++i) b_f[i] = bd[space.dof_of_free(i)];
}

inline Vector expand_solution(const P1Space& space, const Vector& x_f) {
  Vector x = space.dirichlet_vector();
  for (int i = 0; i < space.n_free(); ++i) x[space.dof_of_free(i)] = x_f[i];
  return x;
}

inline Vector solve_spd(const SpMat& A, const Vector& b,
                        const std::string& what = "system") {
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("solve_spd: factorization failed for " + what);
  Vector x = ldlt.solve(b);
  x += ldlt.solve(b - A * x);  // one step of iterative refinement
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("solve_spd: solve failed for " + what);
  return x;
}

// Full pipeline: assemble-reduced solve with Dirichlet data re-inserted.
inline Vector solve_dirichlet(const P1Space& space, const SpMat& A,
                              const Vector& b,
                              const std::string& what = "system") {
  SpMat A_ff;
  Vector b_f;
  reduce_system(space, A, b, A_ff, b_f);
  return expand_solution(space, solve_spd(A_ff, b_f, what));
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

// Conforming L2 projection (global mass solve, no boundary constraints).
inline DiscreteField l2_project_conforming(const P1Space& space,
                                           const ScalarFn& fn,
                                           const QuadRule& rule =
                                               tri_rule(10)) {
  SpMat M = assemble_mass(space, unit_weight(), rule);
  Vector b = assemble_load(space, fn, rule);
  DiscreteField f;
  f.space = &space;
  f.coeffs = solve_spd(M, b, "L2 projection mass matrix");
  return f;
}

// Elementwise L2 projection onto broken P1.
inline BrokenP1 l2_project_broken(const TriMesh& mesh, const ScalarFn& fn,
                                  const QuadRule& rule = tri_rule(10)) {
  BrokenP1 out;
  out.mesh = &mesh;
  out.coef.resize(mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t) {
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (const auto& q : rule.pts) {
      double v = fn(t, bary_point(mesh, t, q.bary)) * q.w;
      for (int i = 0; i < 3; ++i) {
        b[i] += v * q.bary[i];
        for (int j = 0; j < 3; ++j) M(i, j) += q.w * q.bary[i] * q.bary[j];
      }
    }
    Eigen::Vector3d c = M.ldlt().solve(b);
    out.coef[t] = {c[0], c[1], c[2]};
  }
  return out;
}

// Elementwise Kbar-weighted projection onto broken RTN1.
inline BrokenRT1 rt_project(const TriMesh& mesh, const PermeabilityField& Kbar,
                            const VectorFn& vf,
                            const QuadRule& rule = tri_rule(10)) {
  BrokenRT1 out;
  out.mesh = &mesh;
  out.coef.resize(mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const Mat2& K = Kbar.at(mesh.region[t]).K;
    Eigen::Matrix<double, 8, 8> G = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> b = Eigen::Matrix<double, 8, 1>::Zero();
    Vec2 c = mesh.centroid(t);
    double h = mesh.h_K[t];
    for (const auto& q : rule.pts) {
      Vec2 x = bary_point(mesh, t, q.bary);
      Vec2 bas[8];
      BrokenRT1::basis((x - c) / h, bas);
      Vec2 u = vf(t, x);
      for (int i = 0; i < 8; ++i) {
        b[i] += q.w * u.dot(K * bas[i]);
        for (int j = 0; j < 8; ++j) G(i, j) += q.w * bas[i].dot(K * bas[j]);
      }
    }
    Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(G);
    if (lu.rcond() < 1e-13) {
      // Near-singular local Gram matrix: regularize (shape-degenerate cell).
      G.diagonal().array() += 1e-12 * G.diagonal().maxCoeff();
      lu.compute(G);
    }
    out.coef[t] = lu.solve(b);
    out.coef[t] += lu.solve(b - G * out.coef[t]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete dual norm by lifting
// ---------------------------------------------------------------------------
class HminusLifting {
 public:
  // Zero trace is imposed on the Dirichlet part of the boundary; the
  // refinement depth defaults to one level of uniform refinement.
  HminusLifting(const TriMesh& run_mesh, const PermeabilityField& Kbar,
                int refinements = 1)
      : Kbar_(&Kbar) {
    fine_ = std::make_unique<TriMesh>(run_mesh);
    for (int r = 0; r < refinements; ++r) {
      TriMesh next = refine_uniform(*fine_);
      // refine_uniform's parent map points to the mesh being refined; keep
      // parent always relative to the run mesh.
      if (r > 0)
        for (int t = 0; t < next.n_tris(); ++t)
          next.parent[t] = fine_->parent[next.parent[t]];
      *fine_ = std::move(next);
    }
    space_ = std::make_unique<P1Space>(P1Space::homogeneous(*fine_));
    SpMat A = assemble_stiffness(*space_, Kbar, unit_weight());
    SpMat A_ff;
    Vector dummy = Vector::Zero(space_->n_dofs()), b_f;
    reduce_system(*space_, A, dummy, A_ff, b_f);
    ldlt_.compute(A_ff);
    if (ldlt_.info() != Eigen::Success)
      throw std::runtime_error("HminusLifting: factorization failed");
    A_ff_ = A_ff;
  }

  const TriMesh& fine_mesh() const { return *fine_; }
  const P1Space& space() const { return *space_; }

  // ||rho||_{-1,K} for an L2 density rho.
  double norm_density(const ScalarFn& rho,
                      const QuadRule& rule = tri_rule(10)) const {
    return norm_load(assemble_load(*space_, rho, rule));
  }

  // ||.||_{-1,K} of a functional given by its full-size load vector on the
  // lifting space.
  double norm_load(const Vector& b) const {
    Vector b_f(space_->n_free());
    for (int i = 0; i < space_->n_free(); ++i)
      b_f[i] = b[space_->dof_of_free(i)];
    Vector g = ldlt_.solve(b_f);
    g += ldlt_.solve(b_f - A_ff_ * g);
    double e2 = b_f.dot(g);  // = g^T A g = ||Kbar^{1/2} grad G||^2
    return std::sqrt(std::max(e2, 0.0));
  }

 private:
  const PermeabilityField* Kbar_;
  std::unique_ptr<TriMesh> fine_;
  std::unique_ptr<P1Space> space_;
  SpMat A_ff_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

// Localized dual norm on the subdomain made of the listed triangles: lifting
// on the twice-refined submesh with zero trace on its whole boundary.
inline double hminus_norm_local(const TriMesh& mesh,
                                const PermeabilityField& Kbar,
                                const std::vector<int>& tris,
                                const ScalarFn& rho,
                                int refinements = 2,
                                const QuadRule& rule = tri_rule(10)) {
  if (tris.empty()) return 0.0;
  TriMesh sub = extract_submesh(mesh, tris);
  // sub.parent maps each cell to its original triangle; keep that invariant
  // through every refinement level.
  for (int r = 0; r < refinements; ++r) {
    TriMesh fine = refine_uniform(sub);
    std::vector<int> newroot(fine.n_tris());
    for (int t = 0; t < fine.n_tris(); ++t)
      newroot[t] = sub.parent[fine.parent[t]];
    fine.parent = newroot;
    sub = std::move(fine);
  }
  if (sub.n_verts() == static_cast<int>(std::count(sub.on_boundary.begin(),
                                                   sub.on_boundary.end(),
                                                   true)))
    return 0.0;  // no interior dof (cannot happen after 2 refinements)
  P1Space space = P1Space::homogeneous(sub);
  auto rho_sub = [&](int t, const Vec2& x) { return rho(sub.parent[t], x); };
  SpMat A = assemble_stiffness(space, Kbar, unit_weight());
  Vector b = assemble_load(space, rho_sub, rule);
  SpMat A_ff;
  Vector b_f;
  reduce_system(space, A, b, A_ff, b_f);
  Vector g = solve_spd(A_ff, b_f, "local dual-norm lifting");
  return std::sqrt(std::max(b_f.dot(g), 0.0));
}

}  // namespace richards
