// The three benchmark problems on the unit square with T = 1:
//
//  * nondegenerate: kappa(s) = s^3, S(p) = (2-p)^{-1/3}, g = -e_x, Kbar = I,
//    manufactured pressure p = 2 - exp(16 (1+t^2) x y (1-x)(1-y)) with the
//    source, boundary, and initial data derived in closed form;
//  * degenerate: total-pressure unknown, kappa(s) = s, theta(Psi) =
//    exp(Psi - 1) capped at 1 (P_M = 1), Kbar = I, manufactured
//    Psi = 12 (1+t^2) x y (1-x)(1-y) which crosses the saturation threshold
//    at t = 1/sqrt(3), homogeneous Dirichlet data;
//  * realistic: nondegenerate-case nonlinearities, f = 0, heterogeneous
//    anisotropic Kbar split at x = 0.5 (tilt pi/3, porosity factor 0.1),
//    pressure-driven inflow/outflow through the lower thirds of the left and
//    right edges, no-flux elsewhere, discontinuous initial saturation, graded
//    mesh.  No exact solution; a finer run serves as reference.
//
// Source terms are closed-form compositions of the hand-derived derivatives
// of the manufactured solutions (guarded by finite-difference tests).

#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "richards/constitutive.hpp"
#include "richards/estimators.hpp"
#include "richards/mesh.hpp"

namespace richards {

struct CaseSpec {
  std::string name;
  MediumModel model;
  bool total_pressure_primary = false;  // primary unknown Psi instead of p
  Gravity grav;
  SourceModel source;
  BoundaryMarkerFn marker = mark_all_dirichlet;
  std::function<double(const Vec2&, double)> bc;  // Dirichlet datum for q
  std::function<double(const Vec2&)> s0;
  std::vector<Mat2> K_regions = {Mat2::Identity()};
  double lambda = 200.0;
  double T = 1.0;
  bool has_exact = false;
  ExactSolution exact;                                 // Psi, s and derivatives
  std::function<double(const Vec2&, double)> p_exact;  // physical pressure
  std::function<TriMesh(int)> mesh;                    // level -> mesh
  bool neumann_correction = false;  // add the no-flux term to eta_deg
  double s0_inf = 1.0;              // inf of s0 (maximum-principle bound)
  // Known lower bound of the saturation, t -> inf_x s(x, t); sharper than the
  // generic ODE bound for manufactured solutions (unset: use the ODE bound).
  std::function<double(double)> s_min;

  Formulation formulation() const {
    return total_pressure_primary ? ::richards::total_pressure_form(model)
                                  : pressure_form(model);
  }
};

namespace detail {

// Bump profile of both manufactured solutions: B(x,y,t) = c (1+t^2) w(x) w(y)
// with w(z) = z(1-z); all first and second partial derivatives closed-form.
struct Bump {
  double c;
  double val(double x, double y, double t) const {
    return c * (1 + t * t) * x * (1 - x) * y * (1 - y);
  }
  double dt(double x, double y, double t) const {
    return c * 2 * t * x * (1 - x) * y * (1 - y);
  }
  double dx(double x, double y, double t) const {
    return c * (1 + t * t) * (1 - 2 * x) * y * (1 - y);
  }
  double dy(double x, double y, double t) const {
    return c * (1 + t * t) * x * (1 - x) * (1 - 2 * y);
  }
  double lap(double x, double y, double t) const {
    return -2 * c * (1 + t * t) * (y * (1 - y) + x * (1 - x));
  }
};

// Minimum of an (x, y, t)-function over a sample grid of the space-time
// cylinder; used for the constant lower bound f_m of s-independent sources.
template <typename F>
double grid_min(const F& fn, double T, int nxy = 64, int nt = 16) {
  double mn = kInf;
  for (int k = 0; k <= nt; ++k)
    for (int j = 0; j <= nxy; ++j)
      for (int i = 0; i <= nxy; ++i)
        mn = std::min(mn, fn(double(i) / nxy, double(j) / nxy,
                             T * double(k) / nt));
  return mn;
}

}  // namespace detail

// Nondegenerate manufactured case.  With u = 16 (1+t^2) x y (1-x)(1-y):
// p = 2 - e^u, s = e^{-u/3}, Psi = ln 2 - u, and
// f = -(u_t/3) e^{-u/3} + Lap u + e^{-u} g . grad u.
inline CaseSpec case_nondegenerate() {
  CaseSpec c;
  c.name = "nondegenerate";
  c.model = make_case_nondeg();
  c.grav = Gravity{-1.0, 0.0};
  c.lambda = 200.0;
  detail::Bump u{16.0};

  c.p_exact = [u](const Vec2& x, double t) {
    return 2.0 - std::exp(u.val(x.x(), x.y(), t));
  };
  c.exact.psi = [u](const Vec2& x, double t) {
    return std::log(2.0) - u.val(x.x(), x.y(), t);
  };
  c.exact.grad_psi = [u](const Vec2& x, double t) {
    return Vec2(-u.dx(x.x(), x.y(), t), -u.dy(x.x(), x.y(), t));
  };
  c.exact.s = [u](const Vec2& x, double t) {
    return std::exp(-u.val(x.x(), x.y(), t) / 3.0);
  };
  c.exact.ds_dt = [u](const Vec2& x, double t) {
    return -u.dt(x.x(), x.y(), t) / 3.0 *
           std::exp(-u.val(x.x(), x.y(), t) / 3.0);
  };
  c.has_exact = true;

  Gravity g = c.grav;
  auto f_fn = [u, g](double x, double y, double t) {
    double uv = u.val(x, y, t);
    double gdotgrad = g.gx * u.dx(x, y, t) + g.gy * u.dy(x, y, t);
    return -u.dt(x, y, t) / 3.0 * std::exp(-uv / 3.0) + u.lap(x, y, t) +
           std::exp(-uv) * gdotgrad;
  };
  c.source.f = [f_fn](double, double x, double y, double t) {
    return f_fn(x, y, t);
  };
  double fmin = detail::grid_min(f_fn, c.T);
  c.source.f_m = [fmin](double) { return fmin; };
  c.source.dfds_max = 0.0;
  c.source.depends_on_s = false;

  auto pex = c.p_exact;
  c.bc = [pex](const Vec2& x, double t) { return pex(x, t); };
  auto sex = c.exact.s;
  c.s0 = [sex](const Vec2& x) { return sex(x, 0.0); };
  c.s0_inf = std::exp(-1.0 / 3.0);  // max of u(.,0) is 16/16 = 1
  // min_x s(x, t) = e^{-(1+t^2)/3} (max of u(., t) is 1 + t^2)
  c.s_min = [](double t) { return std::exp(-(1.0 + t * t) / 3.0); };
  c.mesh = [](int level) { return unit_square_structured(level); };
  return c;
}

// Degenerate manufactured case (total-pressure unknown, no gravity).
// With v = 12 (1+t^2) x y (1-x)(1-y):
// Psi = v, s = min(e^{v-1}, 1), f = e^{v-1} v_t 1{v<1} - Lap v.
inline CaseSpec case_degenerate() {
  CaseSpec c;
  c.name = "degenerate";
  c.model = make_case_deg();
  c.total_pressure_primary = true;
  c.grav = Gravity{0.0, 0.0};
  c.lambda = 100.0;
  detail::Bump v{12.0};

  c.exact.psi = [v](const Vec2& x, double t) {
    return v.val(x.x(), x.y(), t);
  };
  c.exact.grad_psi = [v](const Vec2& x, double t) {
    return Vec2(v.dx(x.x(), x.y(), t), v.dy(x.x(), x.y(), t));
  };
  c.exact.s = [v](const Vec2& x, double t) {
    return std::min(std::exp(v.val(x.x(), x.y(), t) - 1.0), 1.0);
  };
  c.exact.ds_dt = [v](const Vec2& x, double t) {
    double vv = v.val(x.x(), x.y(), t);
    return vv < 1.0 ? std::exp(vv - 1.0) * v.dt(x.x(), x.y(), t) : 0.0;
  };
  c.has_exact = true;
  // physical pressure via P_c(s): p = E - e^{1 - v} where v < 1, else
  // continued linearly (p_M + v - 1)
  double E = std::exp(1.0), pM = E - 1.0;
  c.p_exact = [v, E, pM](const Vec2& x, double t) {
    double vv = v.val(x.x(), x.y(), t);
    return vv < 1.0 ? E - std::exp(1.0 - vv) : pM + (vv - 1.0);
  };

  auto f_fn = [v](double x, double y, double t) {
    double vv = v.val(x, y, t);
    double dth = vv < 1.0 ? std::exp(vv - 1.0) * v.dt(x, y, t) : 0.0;
    return dth - v.lap(x, y, t);
  };
  c.source.f = [f_fn](double, double x, double y, double t) {
    return f_fn(x, y, t);
  };
  double fmin = detail::grid_min(f_fn, c.T);
  c.source.f_m = [fmin](double) { return fmin; };
  c.source.dfds_max = 0.0;
  c.source.depends_on_s = false;

  c.bc = [](const Vec2&, double) { return 0.0; };  // Psi = 0 on the boundary
  auto sex = c.exact.s;
  c.s0 = [sex](const Vec2& x) { return sex(x, 0.0); };
  c.s0_inf = std::exp(-1.0);  // theta(0)
  // min_x s(x, t) = theta(0) = e^{-1} (Psi >= 0, zero on the boundary)
  c.s_min = [](double) { return std::exp(-1.0); };
  // an even cell count puts a vertex at the bump peak (0.5, 0.5); otherwise
  // the nodal maximum undersamples Psi and the saturation onset is detected
  // a full cell-crossing later
  c.mesh = [](int level) { return unit_square_structured(level, 1.0 / 6.0); };
  return c;
}

// Heterogeneous anisotropic case without exact solution.
// Defaults (configurable): inlet = lower third of the left edge at p_in,
// outlet = lower third of the right edge at p_out, no-flux elsewhere;
// s0 = s_left for x < 0.5 and s_right beyond.
inline CaseSpec case_realistic(double p_in = 0.8, double p_out = -3.0,
                               double inlet_top = 1.0 / 3.0,
                               double s_left = 0.9, double s_right = 0.3) {
  CaseSpec c;
  c.name = "realistic";
  c.model = make_case_nondeg();
  c.grav = Gravity{-1.0, 0.0};
  c.lambda = 100.0;
  c.neumann_correction = true;
  c.has_exact = false;

  Mat2 K1;
  K1 << 1.0, 0.0, 0.0, 0.5;
  double th = M_PI / 3.0, K_phi = 0.1;
  Mat2 Q;
  Q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  c.K_regions = {K1, K_phi * Q.transpose() * K1 * Q};

  c.source = SourceModel{};  // f = 0
  const double eps = 1e-12;
  c.marker = [inlet_top, eps](double x, double y) {
    bool on_left = x < eps, on_right = x > 1.0 - eps;
    if ((on_left || on_right) && y <= inlet_top + eps) return 1;  // Dirichlet
    return -1;                                                    // no-flux
  };
  c.bc = [p_in, p_out](const Vec2& x, double) {
    return x.x() < 0.5 ? p_in : p_out;
  };
  c.s0 = [s_left, s_right](const Vec2& x) {
    return x.x() < 0.5 ? s_left : s_right;
  };
  c.s0_inf = std::min(s_left, s_right);
  BoundaryMarkerFn mark = c.marker;
  c.mesh = [mark](int level) {
    return unit_square_graded(0.7, mark, 3 * level, 6 * level);
  };
  return c;
}

inline CaseSpec make_case(const std::string& id) {
  if (id == "nondegenerate") return case_nondegenerate();
  if (id == "degenerate") return case_degenerate();
  if (id == "realistic") return case_realistic();
  throw std::invalid_argument("unknown case: " + id);
}

}  // namespace richards
