// Quadrature rules on the reference triangle and on intervals.
//
// Triangle rules are stored in barycentric coordinates with weights summing
// to 1, so that  ∫_K f ≈ |K| · Σ_q w_q f(x_q).  Two families are provided:
//   - a 7-point degree-5 rule (light default for mass/stiffness assembly),
//   - collapsed (Duffy) Gauss product rules of arbitrary degree, used wherever
//     one fixed rule must be shared between the nonlinear solver assembly and
//     the flux-equilibration projections so that their discrete identities
//     hold to solver precision.
// Interval rules are Gauss–Legendre, computed by Newton iteration.

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace richards {

struct QuadPoint {
  std::array<double, 3> bary;  // barycentric coordinates, sum to 1
  double w;                    // weight, rule weights sum to 1
};

struct QuadRule {
  std::vector<QuadPoint> pts;
  int degree = 0;  // polynomial exactness degree
};

// Gauss-Legendre nodes/weights on [-1,1].
struct Gauss1D {
  std::vector<double> x, w;  // weights sum to 2 on [-1,1]
};

inline Gauss1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  Gauss1D g;
  g.x.resize(n);
  g.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Initial guess (Chebyshev) followed by Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    g.x[i] = -x;
    g.x[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    g.w[i] = w;
    g.w[n - 1 - i] = w;
  }
  return g;
}

// Gauss-Legendre on [0,1]; weights sum to 1.
inline Gauss1D gauss_legendre01(int n) {
  Gauss1D g = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    g.x[i] = 0.5 * (g.x[i] + 1.0);
    g.w[i] *= 0.5;
  }
  return g;
}

// Classical 7-point rule, exact for polynomials of degree 5.
inline QuadRule tri_rule_deg5() {
  QuadRule r;
  r.degree = 5;
  const double s15 = std::sqrt(15.0);
  const double b1 = (6.0 + s15) / 21.0, a1 = 1.0 - 2.0 * b1;
  const double b2 = (6.0 - s15) / 21.0, a2 = 1.0 - 2.0 * b2;
  const double w0 = 9.0 / 40.0;
  const double w1 = (155.0 + s15) / 1200.0;
  const double w2 = (155.0 - s15) / 1200.0;
  r.pts.push_back({{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, w0});
  r.pts.push_back({{a1, b1, b1}, w1});
  r.pts.push_back({{b1, a1, b1}, w1});
  r.pts.push_back({{b1, b1, a1}, w1});
  r.pts.push_back({{a2, b2, b2}, w2});
  r.pts.push_back({{b2, a2, b2}, w2});
  r.pts.push_back({{b2, b2, a2}, w2});
  return r;
}

// Collapsed (Duffy) Gauss product rule: n x n points, exact for total degree
// 2n-2.  Maps the unit square (u,v) -> (x,y) = (u, v(1-u)) with Jacobian 1-u.
inline QuadRule tri_rule_collapsed(int n) {
  Gauss1D g = gauss_legendre01(n);
  QuadRule r;
  r.degree = 2 * n - 2;
  r.pts.reserve(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double u = g.x[i], v = g.x[j];
      double x = u, y = v * (1.0 - u);
      // Reference-triangle weight (1-u) w_i w_j integrates over area 1/2;
      // multiply by 2 so rule weights sum to 1 under the |K|-scaling convention.
      double w = 2.0 * g.w[i] * g.w[j] * (1.0 - u);
      r.pts.push_back({{1.0 - x - y, x, y}, w});
    }
  return r;
}

// Smallest available rule with at least the requested exactness degree.
inline QuadRule tri_rule(int degree) {
  if (degree <= 5) return tri_rule_deg5();
  int n = (degree + 1) / 2 + 1;  // 2n-2 >= degree
  return tri_rule_collapsed(n);
}

}  // namespace richards
