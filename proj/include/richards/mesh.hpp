// Conforming 2D triangulations with boundary markers, vertex patches, and the
// piecewise-constant permeability tensor field.
//
// Meshes are immutable after construction: the builder orients all triangles
// positively, derives the edge list with two-triangle adjacency, classifies
// boundary edges through a user marker function, assembles vertex patches
// with their diameters, and verifies conformity (every interior edge shared
// by exactly two triangles, no vertex in the interior of an edge).
//
// Boundary marker encoding (single integer per edge):
//   0   interior edge
//   +k  Dirichlet boundary edge of segment k (k >= 1)
//   -k  Neumann boundary edge of segment k
//
// Text format "trimesh v1": header line, then counts `V E T`, then V vertex
// lines `x y`, E edge lines `v0 v1 marker`, T triangle lines `v0 v1 v2
// region`; all indices 0-based ASCII.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace richards {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Marker function: edge midpoint -> marker (!= 0) for boundary edges.
using BoundaryMarkerFn = std::function<int(double, double)>;

inline int mark_all_dirichlet(double, double) { return 1; }

struct MeshEdge {
  int v0 = -1, v1 = -1;  // v0 < v1
  int t0 = -1, t1 = -1;  // adjacent triangles; t1 = -1 on the boundary
  int marker = 0;
};

struct TriMesh {
  std::vector<Vec2> verts;
  std::vector<std::array<int, 3>> tris;  // positively oriented
  std::vector<int> region;               // per triangle
  std::vector<MeshEdge> edges;
  std::vector<std::array<int, 3>> tri_edges;  // edge opposite local vertex i

  std::vector<double> area;      // per triangle
  std::vector<double> h_K;       // per-triangle diameter (longest edge)
  std::vector<double> shape;     // circumradius / inradius
  std::vector<std::vector<int>> patch;  // triangles around each vertex
  std::vector<double> h_patch;          // patch diameter
  std::vector<bool> on_boundary;        // vertex lies on a boundary edge
  std::vector<bool> on_dirichlet;       // vertex lies on a Dirichlet edge

  std::vector<int> parent;  // parent triangle in the pre-refinement mesh

  int n_verts() const { return static_cast<int>(verts.size()); }
  int n_tris() const { return static_cast<int>(tris.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  double total_area() const {
    double s = 0.0;
    for (double a : area) s += a;
    return s;
  }
  double max_shape_ratio() const {
    double s = 0.0;
    for (double r : shape) s = std::max(s, r);
    return s;
  }
  double h_max() const {
    double s = 0.0;
    for (double h : h_K) s = std::max(s, h);
    return s;
  }
  // Domain diameter (corner-to-corner over all vertices).
  double diameter() const {
    double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
    for (const auto& v : verts) {
      lo_x = std::min(lo_x, v.x());
      hi_x = std::max(hi_x, v.x());
      lo_y = std::min(lo_y, v.y());
      hi_y = std::max(hi_y, v.y());
    }
    return std::hypot(hi_x - lo_x, hi_y - lo_y);
  }
  Vec2 tri_vertex(int t, int i) const { return verts[tris[t][i]]; }
  Vec2 centroid(int t) const {
    return (tri_vertex(t, 0) + tri_vertex(t, 1) + tri_vertex(t, 2)) / 3.0;
  }
};

namespace detail {

inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) -
                (c.x() - a.x()) * (b.y() - a.y()));
}

// Orients triangles, builds edges/adjacency/patches, assigns boundary
// markers, and verifies conformity.  `preset_markers` (optional) carries
// markers keyed by sorted vertex pair, used by the loader and by uniform
// refinement instead of the marker function.
inline void finalize_mesh(
    TriMesh& m, const BoundaryMarkerFn& mark,
    const std::map<std::pair<int, int>, int>* preset_markers = nullptr) {
  int V = m.n_verts(), T = m.n_tris();
  if (m.region.empty()) m.region.assign(T, 0);
  if (static_cast<int>(m.region.size()) != T)
    throw std::runtime_error("mesh: region count mismatch");

  m.area.resize(T);
  m.h_K.resize(T);
  m.shape.resize(T);
  for (int t = 0; t < T; ++t) {
    auto& tri = m.tris[t];
    for (int i = 0; i < 3; ++i)
      if (tri[i] < 0 || tri[i] >= V)
        throw std::runtime_error("mesh: vertex index out of range");
    double A = signed_area(m.verts[tri[0]], m.verts[tri[1]], m.verts[tri[2]]);
    if (A < 0) {
      std::swap(tri[1], tri[2]);
      A = -A;
    }
    if (!(A > 1e-16)) throw std::runtime_error("mesh: degenerate triangle");
    m.area[t] = A;
    double a = (m.verts[tri[1]] - m.verts[tri[2]]).norm();
    double b = (m.verts[tri[2]] - m.verts[tri[0]]).norm();
    double c = (m.verts[tri[0]] - m.verts[tri[1]]).norm();
    m.h_K[t] = std::max({a, b, c});
    double s = 0.5 * (a + b + c);
    m.shape[t] = (a * b * c / (4.0 * A)) / (A / s);  // R / r
  }

  // Edge map keyed by sorted vertex pair, in first-seen order.
  std::map<std::pair<int, int>, int> edge_id;
  m.edges.clear();
  m.tri_edges.assign(T, {-1, -1, -1});
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < 3; ++i) {
      int a = m.tris[t][(i + 1) % 3], b = m.tris[t][(i + 2) % 3];
      auto key = std::minmax(a, b);
      auto it = edge_id.find(key);
      if (it == edge_id.end()) {
        MeshEdge e;
        e.v0 = key.first;
        e.v1 = key.second;
        e.t0 = t;
        edge_id.emplace(key, m.n_edges());
        m.tri_edges[t][i] = m.n_edges();
        m.edges.push_back(e);
      } else {
        MeshEdge& e = m.edges[it->second];
        if (e.t1 != -1)
          throw std::runtime_error("mesh: edge shared by more than 2 triangles");
        e.t1 = t;
        m.tri_edges[t][i] = it->second;
      }
    }

  // Hanging-node check: no vertex strictly inside a boundary or interior edge.
  for (const auto& e : m.edges) {
    Vec2 p0 = m.verts[e.v0], p1 = m.verts[e.v1];
    double len2 = (p1 - p0).squaredNorm();
    for (int v = 0; v < V; ++v) {
      if (v == e.v0 || v == e.v1) continue;
      Vec2 d = m.verts[v] - p0;
      double tproj = d.dot(p1 - p0) / len2;
      if (tproj <= 1e-12 || tproj >= 1.0 - 1e-12) continue;
      Vec2 foot = p0 + tproj * (p1 - p0);
      if ((m.verts[v] - foot).norm() < 1e-12 * std::sqrt(len2))
        throw std::runtime_error("mesh: hanging node on an edge");
    }
  }

  // Boundary markers.
  for (auto& e : m.edges) {
    if (e.t1 != -1) {
      e.marker = 0;
      continue;
    }
    if (preset_markers) {
      auto it = preset_markers->find({e.v0, e.v1});
      if (it == preset_markers->end() || it->second == 0)
        throw std::runtime_error("mesh: boundary edge without marker");
      e.marker = it->second;
    } else {
      Vec2 mid = 0.5 * (m.verts[e.v0] + m.verts[e.v1]);
      e.marker = mark(mid.x(), mid.y());
      if (e.marker == 0)
        throw std::runtime_error("mesh: marker function returned 0 on boundary");
    }
  }

  // Vertex patches and classification.
  m.patch.assign(V, {});
  m.on_boundary.assign(V, false);
  m.on_dirichlet.assign(V, false);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < 3; ++i) m.patch[m.tris[t][i]].push_back(t);
  for (const auto& e : m.edges)
    if (e.t1 == -1) {
      m.on_boundary[e.v0] = m.on_boundary[e.v1] = true;
      if (e.marker > 0) m.on_dirichlet[e.v0] = m.on_dirichlet[e.v1] = true;
    }
  m.h_patch.assign(V, 0.0);
  for (int v = 0; v < V; ++v) {
    if (m.patch[v].empty()) throw std::runtime_error("mesh: isolated vertex");
    std::vector<int> pv;
    for (int t : m.patch[v])
      for (int i = 0; i < 3; ++i) pv.push_back(m.tris[t][i]);
    std::sort(pv.begin(), pv.end());
    pv.erase(std::unique(pv.begin(), pv.end()), pv.end());
    double d = 0.0;
    for (size_t i = 0; i < pv.size(); ++i)
      for (size_t j = i + 1; j < pv.size(); ++j)
        d = std::max(d, (m.verts[pv[i]] - m.verts[pv[j]]).norm());
    m.h_patch[v] = d;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

// n x n grid of squares on the unit square with spacing h0/level, each square
// split along the same (lower-left to upper-right) diagonal.
inline TriMesh unit_square_structured(int level, double h0 = 0.2,
                                      const BoundaryMarkerFn& mark =
                                          mark_all_dirichlet) {
  if (level < 1) throw std::invalid_argument("unit_square_structured: level");
  int n = static_cast<int>(std::lround(1.0 / (h0 / level)));
  TriMesh m;
  m.verts.reserve(static_cast<size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.verts.emplace_back(static_cast<double>(i) / n,
                           static_cast<double>(j) / n);
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      int v00 = id(i, j), v10 = id(i + 1, j);
      int v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      m.tris.push_back({v00, v10, v11});
      m.tris.push_back({v00, v11, v01});
    }
  detail::finalize_mesh(m, mark);
  return m;
}

// One-dimensional grid on [a,b] with m cells whose sizes form a geometric
// progression shrinking by `factor` toward the end indicated by
// `toward_right`.
inline std::vector<double> graded_points_1d(double a, double b, int mcells,
                                            double factor, bool toward_right) {
  std::vector<double> sizes(mcells);
  double s = 1.0, tot = 0.0;
  for (int i = 0; i < mcells; ++i) {
    sizes[i] = s;
    tot += s;
    s *= factor;
  }
  if (!toward_right) std::reverse(sizes.begin(), sizes.end());
  std::vector<double> pts(mcells + 1);
  pts[0] = a;
  for (int i = 0; i < mcells; ++i)
    pts[i + 1] = pts[i] + (b - a) * sizes[i] / tot;
  pts[mcells] = b;
  return pts;
}

// Deterministic nonuniform unit-square mesh for the heterogeneous case:
// x graded toward the material interface x = 0.5 from both sides (which also
// refines toward the inlet/outlet boundary segments), y graded toward y = 0,
// region 0 for x < 0.5 and region 1 for x > 0.5.
inline TriMesh unit_square_graded(double factor = 0.7,
                                  const BoundaryMarkerFn& mark =
                                      mark_all_dirichlet,
                                  int half_cells = 3, int y_cells = 6) {
  std::vector<double> xl =
      graded_points_1d(0.0, 0.5, half_cells, factor, true);
  std::vector<double> xr =
      graded_points_1d(0.5, 1.0, half_cells, factor, false);
  std::vector<double> xs(xl);
  xs.insert(xs.end(), xr.begin() + 1, xr.end());
  std::vector<double> ys = graded_points_1d(0.0, 1.0, y_cells, factor, false);
  int nx = static_cast<int>(xs.size()) - 1, ny = static_cast<int>(ys.size()) - 1;
  TriMesh m;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.verts.emplace_back(xs[i], ys[j]);
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int v00 = id(i, j), v10 = id(i + 1, j);
      int v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      int reg = (0.5 * (xs[i] + xs[i + 1]) < 0.5) ? 0 : 1;
      m.tris.push_back({v00, v10, v11});
      m.tris.push_back({v00, v11, v01});
      m.region.push_back(reg);
      m.region.push_back(reg);
    }
  detail::finalize_mesh(m, mark);
  return m;
}

// ---------------------------------------------------------------------------
// Uniform (red) refinement: each triangle split into 4 by edge midpoints.
// ---------------------------------------------------------------------------
inline TriMesh refine_uniform(const TriMesh& mesh) {
  TriMesh m;
  m.verts = mesh.verts;
  int V = mesh.n_verts();
  std::vector<int> mid(mesh.n_edges());
  for (int e = 0; e < mesh.n_edges(); ++e) {
    mid[e] = V + e;
    m.verts.push_back(0.5 * (mesh.verts[mesh.edges[e].v0] +
                             mesh.verts[mesh.edges[e].v1]));
  }
  std::map<std::pair<int, int>, int> markers;
  auto set_marker = [&](int a, int b, int mk) {
    markers[std::minmax(a, b)] = mk;
  };
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    int m0 = mid[mesh.tri_edges[t][0]];  // midpoint opposite vertex 0
    int m1 = mid[mesh.tri_edges[t][1]];
    int m2 = mid[mesh.tri_edges[t][2]];
    m.tris.push_back({tri[0], m2, m1});
    m.tris.push_back({tri[1], m0, m2});
    m.tris.push_back({tri[2], m1, m0});
    m.tris.push_back({m0, m1, m2});
    for (int k = 0; k < 4; ++k) {
      m.region.push_back(mesh.region[t]);
      m.parent.push_back(t);
    }
  }
  for (const auto& e : mesh.edges)
    if (e.t1 == -1) {
      int mm = mid[&e - mesh.edges.data()];
      set_marker(e.v0, mm, e.marker);
      set_marker(mm, e.v1, e.marker);
    }
  detail::finalize_mesh(m, mark_all_dirichlet, &markers);
  return m;
}

// Submesh made of the listed triangles (local vertex numbering); all boundary
// edges of the submesh are marked Dirichlet.  Used for localized dual-norm
// lifting solves.
inline TriMesh extract_submesh(const TriMesh& mesh,
                               const std::vector<int>& tris) {
  TriMesh m;
  std::map<int, int> local;
  for (int t : tris) {
    std::array<int, 3> tri{};
    for (int i = 0; i < 3; ++i) {
      int g = mesh.tris[t][i];
      auto it = local.find(g);
      if (it == local.end()) {
        it = local.emplace(g, m.n_verts()).first;
        m.verts.push_back(mesh.verts[g]);
      }
      tri[i] = it->second;
    }
    m.tris.push_back(tri);
    m.region.push_back(mesh.region[t]);
    m.parent.push_back(t);
  }
  detail::finalize_mesh(m, mark_all_dirichlet);
  return m;
}

// ---------------------------------------------------------------------------
// Text I/O ("trimesh v1")
// ---------------------------------------------------------------------------
inline void save_mesh(const TriMesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mesh: cannot open " + path);
  out << "trimesh v1\n";
  out << m.n_verts() << ' ' << m.n_edges() << ' ' << m.n_tris() << '\n';
  char buf[80];
  for (const auto& v : m.verts) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x(), v.y());
    out << buf;
  }
  for (const auto& e : m.edges)
    out << e.v0 << ' ' << e.v1 << ' ' << e.marker << '\n';
  for (int t = 0; t < m.n_tris(); ++t)
    out << m.tris[t][0] << ' ' << m.tris[t][1] << ' ' << m.tris[t][2] << ' '
        << m.region[t] << '\n';
}

inline TriMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mesh: cannot open " + path);
  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> std::istringstream {
    if (!std::getline(in, line))
      throw std::runtime_error("load_mesh: " + path + ":" +
                               std::to_string(lineno + 1) + ": unexpected EOF");
    ++lineno;
    return std::istringstream(line);
  };
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("load_mesh: " + path + ":" +
                             std::to_string(lineno) + ": " + what);
  };
  next_line();
  if (line != "trimesh v1") fail("expected header 'trimesh v1'");
  int V = 0, E = 0, T = 0;
  {
    auto ss = next_line();
    if (!(ss >> V >> E >> T) || V <= 0 || E < 0 || T <= 0)
      fail("bad counts line");
  }
  TriMesh m;
  m.verts.resize(V);
  for (int i = 0; i < V; ++i) {
    auto ss = next_line();
    double x, y;
    if (!(ss >> x >> y)) fail("bad vertex line");
    m.verts[i] = Vec2(x, y);
  }
  std::map<std::pair<int, int>, int> markers;
  for (int i = 0; i < E; ++i) {
    auto ss = next_line();
    int a, b, mk;
    if (!(ss >> a >> b >> mk)) fail("bad edge line");
    if (a < 0 || a >= V || b < 0 || b >= V || a == b) fail("bad edge indices");
    markers[std::minmax(a, b)] = mk;
  }
  m.tris.resize(T);
  m.region.resize(T);
  for (int i = 0; i < T; ++i) {
    auto ss = next_line();
    if (!(ss >> m.tris[i][0] >> m.tris[i][1] >> m.tris[i][2] >> m.region[i]))
      fail("bad triangle line");
  }
  detail::finalize_mesh(m, mark_all_dirichlet, &markers);
  if (m.n_edges() != E)
    throw std::runtime_error("load_mesh: " + path +
                             ": declared edge count does not match topology");
  return m;
}

// ---------------------------------------------------------------------------
// Piecewise-constant permeability tensor field
// ---------------------------------------------------------------------------
struct TensorSet {
  Mat2 K, sqrtK, inv_sqrtK, invK;
  double lam_min = 0, lam_max = 0;
};

class PermeabilityField {
 public:
  explicit PermeabilityField(const std::vector<Mat2>& per_region) {
    if (per_region.empty())
      throw std::invalid_argument("PermeabilityField: no regions");
    for (const Mat2& K : per_region) {
      if (std::abs(K(0, 1) - K(1, 0)) > 1e-14)
        throw std::invalid_argument("PermeabilityField: tensor not symmetric");
      Eigen::SelfAdjointEigenSolver<Mat2> es(K);
      if (es.eigenvalues()(0) <= 0)
        throw std::invalid_argument("PermeabilityField: tensor not SPD");
      TensorSet t;
      t.K = K;
      t.lam_min = es.eigenvalues()(0);
      t.lam_max = es.eigenvalues()(1);
      Eigen::Vector2d sq = es.eigenvalues().cwiseSqrt();
      t.sqrtK = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().transpose();
      t.inv_sqrtK = es.eigenvectors() * sq.cwiseInverse().asDiagonal() *
                    es.eigenvectors().transpose();
      t.invK = K.inverse();
      regions_.push_back(t);
      K_m_ = std::min(K_m_, t.lam_min);
      K_M_ = std::max(K_M_, t.lam_max);
    }
  }

  static PermeabilityField isotropic(double k) {
    return PermeabilityField({Mat2(k * Mat2::Identity())});
  }

  const TensorSet& at(int region) const {
    if (region < 0 || region >= static_cast<int>(regions_.size()))
      throw std::out_of_range("PermeabilityField: region id");
    return regions_[region];
  }
  int n_regions() const { return static_cast<int>(regions_.size()); }
  double K_m() const { return K_m_; }
  double K_M() const { return K_M_; }

 private:
  std::vector<TensorSet> regions_;
  double K_m_ = 1e300, K_M_ = 0.0;
};

}  // namespace richards
