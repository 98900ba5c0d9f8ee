// Constitutive relations for unsaturated flow: relative permeability kappa(s),
// saturation S(p), capillary pressure p_c = S^{-1}, diffusivity D = kappa p_c',
// total pressure P_c(s) = int_{S(0)}^s D, its inverse theta, and the Kirchhoff
// transform K(p).  Model families: Brooks-Corey, van Genuchten, linear heat,
// and the two closed-form benchmark models used by the experiment cases.
//
// Also houses the maximum-principle lower bound S_m(t) (an ODE integrated with
// the classical 4th-order Runge-Kutta method) and the Gronwall-type coefficient
// functions c1, c2, c3 entering the guaranteed upper bounds.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace richards {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Cached antiderivative with Hermite-cubic lookup.
//
// Tabulates A(x) = int_{x0}^{x} F on a uniform 4096-point grid by adaptive
// Simpson refinement (abs tol 1e-10 overall) and interpolates with cubic
// Hermite segments using the exact derivatives A'(x) = F(x).  Used for model
// families whose Kirchhoff transform has no elementary antiderivative.
// ---------------------------------------------------------------------------
class CachedAntiderivative {
 public:
  CachedAntiderivative() = default;

  CachedAntiderivative(std::function<double(double)> f, double lo, double hi,
                       int npts = 4096)
      : f_(std::move(f)), lo_(lo), hi_(hi) {
    if (!(hi > lo) || npts < 2)
      throw std::invalid_argument("CachedAntiderivative: bad interval");
    val_.resize(npts);
    der_.resize(npts);
    h_ = (hi - lo) / (npts - 1);
    double acc = 0.0;
    val_[0] = 0.0;
    der_[0] = f_(lo);
    for (int i = 1; i < npts; ++i) {
      double a = lo + (i - 1) * h_, b = lo + i * h_;
      acc += adaptive_simpson(a, b, 1e-10 / npts);
      val_[i] = acc;
      der_[i] = f_(b);
    }
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double total() const { return val_.back(); }

  // A(x); linear extension outside [lo, hi] with the end slopes.
  double value(double x) const {
    if (x <= lo_) return val_.front() + der_.front() * (x - lo_);
    if (x >= hi_) return val_.back() + der_.back() * (x - hi_);
    int i = static_cast<int>((x - lo_) / h_);
    i = std::min<int>(i, static_cast<int>(val_.size()) - 2);
    double t = (x - (lo_ + i * h_)) / h_;
    double y0 = val_[i], y1 = val_[i + 1];
    double m0 = der_[i] * h_, m1 = der_[i + 1] * h_;
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 +
           (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
  }

  // Solve A(x) = y for x, assuming F >= 0 (A nondecreasing).
  double inverse(double y) const {
    double a = lo_, b = hi_;
    if (y <= val_.front()) {
      if (der_.front() > 0) return lo_ + (y - val_.front()) / der_.front();
      return lo_;
    }
    if (y >= val_.back()) {
      if (der_.back() > 0) return hi_ + (y - val_.back()) / der_.back();
      return hi_;
    }
    for (int it = 0; it < 200; ++it) {
      double m = 0.5 * (a + b);
      if (value(m) < y)
        a = m;
      else
        b = m;
      if (b - a < 1e-15 * (std::abs(b) + 1.0)) break;
    }
    return 0.5 * (a + b);
  }

 private:
  double adaptive_simpson(double a, double b, double tol, int depth = 0) const {
    double m = 0.5 * (a + b);
    double fa = f_(a), fm = f_(m), fb = f_(b);
    double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
    return simpson_rec(a, b, fa, fm, fb, whole, tol, depth);
  }
  double simpson_rec(double a, double b, double fa, double fm, double fb,
                     double whole, double tol, int depth) const {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f_(lm), frm = f_(rm);
    double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    if (depth > 40 || std::abs(left + right - whole) < 15 * tol)
      return left + right + (left + right - whole) / 15.0;
    return simpson_rec(a, m, fa, flm, fm, left, tol / 2, depth + 1) +
           simpson_rec(m, b, fm, frm, fb, right, tol / 2, depth + 1);
  }

  std::function<double(double)> f_;
  double lo_ = 0, hi_ = 1, h_ = 1;
  std::vector<double> val_, der_;
};

// ---------------------------------------------------------------------------
// MediumModel
// ---------------------------------------------------------------------------
struct MediumModel {
  std::string name;

  std::function<double(double)> kappa;       // s in [0,1] -> [0,1]
  std::function<double(double)> dkappa;      // kappa'
  std::function<double(double)> saturation;  // S(p)
  std::function<double(double)> dsaturation; // S'(p)
  std::function<double(double)> capillary;   // p_c(s) = S^{-1}(s), s in (0,1]
  std::function<double(double)> diffusivity; // D(s) = kappa p_c'
  std::function<double(double)> ddiffusivity;// D'(s)
  std::function<double(double)> total_pressure;  // P_c(s)
  std::function<double(double)> theta;       // theta(Psi)
  std::function<double(double)> dtheta;      // theta' on (P_m, P_M]
  std::function<double(double)> kirchhoff;   // K(p)

  double p_M = kInf;   // S(p) = 1 for p >= p_M
  double P_m = -kInf;  // lim_{s->0} P_c(s)
  double P_M = kInf;   // P_c(1)
  double S0 = 0.0;     // S(0)
  double kappa_lip = 0.0;  // sup |kappa'| on [0,1] (sampled if unbounded)

  bool linear = false;  // heat model: S unbounded, no capping
};

namespace detail {

// max of fn over [lo, hi]: 256-point scan refined by golden-section search.
inline double scan_golden_max(const std::function<double(double)>& fn,
                              double lo, double hi) {
  if (!(hi > lo)) return fn(lo);
  const int n = 256;
  double best = -kInf;
  int besti = 0;
  for (int i = 0; i <= n; ++i) {
    double x = lo + (hi - lo) * i / n;
    double v = fn(x);
    if (v > best) {
      best = v;
      besti = i;
    }
  }
  double a = lo + (hi - lo) * std::max(0, besti - 1) / n;
  double b = lo + (hi - lo) * std::min(n, besti + 1) / n;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = fn(c), fd = fn(d);
  for (int it = 0; it < 80 && (b - a) > 1e-13 * (hi - lo); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = fn(d);
    }
  }
  return std::max({best, fc, fd});
}

inline double scan_golden_min(const std::function<double(double)>& fn,
                              double lo, double hi) {
  return -scan_golden_max([&](double x) { return -fn(x); }, lo, hi);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model factories
// ---------------------------------------------------------------------------

inline MediumModel make_heat_model() {
  MediumModel m;
  m.name = "heat";
  m.linear = true;
  auto id = [](double x) { return x; };
  auto one = [](double) { return 1.0; };
  auto zero = [](double) { return 0.0; };
  m.kappa = one;
  m.dkappa = zero;
  m.saturation = id;
  m.dsaturation = one;
  m.capillary = id;
  m.diffusivity = one;
  m.ddiffusivity = zero;
  m.total_pressure = id;
  m.theta = id;
  m.dtheta = one;
  m.kirchhoff = id;
  m.p_M = kInf;
  m.P_m = -kInf;
  m.P_M = kInf;
  m.S0 = 0.0;
  m.kappa_lip = 0.0;
  return m;
}

inline MediumModel make_brooks_corey(double lambda1, double p_M) {
  if (!(lambda1 > 0) || !(p_M > 0))
    throw std::invalid_argument("brooks_corey: need lambda1 > 0 and p_M > 0");
  MediumModel m;
  m.name = "brooks_corey";
  const double l = lambda1;
  const double ek = (2 + 3 * l) / l;       // kappa exponent
  const double c3 = 1 + 3 * l;             // recurring constant
  const double s0 = std::pow(2.0, -l);     // S(0)
  m.p_M = p_M;
  m.S0 = s0;
  m.P_M = p_M / c3 * (1.0 - std::pow(2.0, -c3));
  m.P_m = -p_M / c3 * std::pow(2.0, -c3);
  m.kappa = [ek](double s) { return std::pow(std::max(s, 0.0), ek); };
  m.dkappa = [ek](double s) { return ek * std::pow(std::max(s, 0.0), ek - 1); };
  m.saturation = [l, p_M](double p) {
    return p >= p_M ? 1.0 : std::pow(2.0 - p / p_M, -l);
  };
  m.dsaturation = [l, p_M](double p) {
    return p >= p_M ? 0.0 : (l / p_M) * std::pow(2.0 - p / p_M, -l - 1);
  };
  m.capillary = [l, p_M](double s) {
    return p_M * (2.0 - std::pow(s, -1.0 / l));
  };
  m.diffusivity = [l, p_M](double s) {
    return (p_M / l) * std::pow(s, 2.0 + 1.0 / l);
  };
  m.ddiffusivity = [l, p_M](double s) {
    return (p_M / l) * (2.0 + 1.0 / l) * std::pow(s, 1.0 + 1.0 / l);
  };
  m.total_pressure = [l, p_M, c3](double s) {
    return p_M / c3 * (std::pow(s, 3.0 + 1.0 / l) - std::pow(2.0, -c3));
  };
  m.theta = [l, p_M, c3, PM = m.P_M, Pm = m.P_m](double Psi) {
    if (Psi >= PM) return 1.0;
    if (Psi <= Pm) return 0.0;
    return std::pow(c3 / p_M * Psi + std::pow(2.0, -c3), l / c3);
  };
  m.dtheta = [th = m.theta, D = m.diffusivity](double Psi) {
    return 1.0 / D(th(Psi));
  };
  m.kirchhoff = [S = m.saturation, Pc = m.total_pressure, p_M,
                 PM = m.P_M](double p) {
    return p <= p_M ? Pc(S(p)) : PM + (p - p_M);
  };
  m.kappa_lip = ek;  // kappa' increasing on [0,1], max at s=1
  return m;
}

inline MediumModel make_van_genuchten(double lambda2, double p_M) {
  if (!(lambda2 > 0) || !(lambda2 < 1) || !(p_M > 0))
    throw std::invalid_argument(
        "van_genuchten: need lambda2 in (0,1) and p_M > 0");
  MediumModel m;
  m.name = "van_genuchten";
  const double l = lambda2;
  const double e = 1.0 / (1.0 - l);
  m.p_M = p_M;
  m.kappa = [l](double s) {
    s = std::clamp(s, 0.0, 1.0);
    double u = std::pow(s, 1.0 / l);
    double t = 1.0 - std::pow(1.0 - u, l);
    return std::sqrt(s) * t * t;
  };
  m.dkappa = [l](double s) {
    s = std::clamp(s, 1e-300, 1.0);
    double u = std::pow(s, 1.0 / l);
    double q = std::pow(1.0 - u, l);
    double t = 1.0 - q;
    double dt_ds = (u < 1.0)
                       ? std::pow(1.0 - u, l - 1.0) * std::pow(s, 1.0 / l - 1.0)
                       : kInf;
    return 0.5 / std::sqrt(s) * t * t + 2.0 * std::sqrt(s) * t * dt_ds;
  };
  m.saturation = [l, e, p_M](double p) {
    if (p >= p_M) return 1.0;
    return std::pow(1.0 + std::pow(p_M - p, e), -l);
  };
  m.dsaturation = [l, e, p_M](double p) {
    if (p >= p_M) return 0.0;
    double w = p_M - p;
    return l * e * std::pow(w, e - 1.0) *
           std::pow(1.0 + std::pow(w, e), -l - 1.0);
  };
  m.capillary = [l, p_M](double s) {
    if (s >= 1.0) return p_M;
    return p_M - std::pow(std::pow(s, -1.0 / l) - 1.0, 1.0 - l);
  };
  auto dpc = [l](double s) {  // p_c'(s)
    double u = std::pow(s, -1.0 / l) - 1.0;
    return (1.0 - l) / l * std::pow(u, -l) * std::pow(s, -1.0 / l - 1.0);
  };
  m.diffusivity = [kap = m.kappa, dpc](double s) { return kap(s) * dpc(s); };
  m.ddiffusivity = [D = m.diffusivity](double s) {  // central difference
    double h = 1e-7 * std::max(1.0, std::abs(s));
    double hi = std::min(s + h, 1.0), lo = std::max(s - h, 1e-12);
    return (D(hi) - D(lo)) / (hi - lo);
  };
  m.S0 = m.saturation(0.0);
  // Kirchhoff transform by adaptive quadrature cached on a 4096-point
  // Hermite-cubic lookup (exact slopes K'(p) = kappa(S(p))).
  auto kern = [kap = m.kappa, S = m.saturation](double p) { return kap(S(p)); };
  auto cache = std::make_shared<CachedAntiderivative>(kern, p_M - 64.0, p_M);
  const double KpM = cache->total();  // K(p_M) - K(p_M - 64)
  // Normalize so K(0) = 0, per the definition int_0^p kappa(S).
  const double K0 = cache->value(0.0);
  m.kirchhoff = [cache, K0, p_M, KpM](double p) {
    if (p <= p_M) return cache->value(p) - K0;
    return (KpM - K0) + (p - p_M);  // kappa(1) = 1 above p_M
  };
  m.P_M = KpM - K0;
  m.P_m = -K0;  // K(p) ~ const below the cache window (kappa(S(p)) ~ 0)
  m.total_pressure = [K = m.kirchhoff, pc = m.capillary](double s) {
    return K(pc(std::min(s, 1.0)));
  };
  m.theta = [cache, K0, S = m.saturation, PM = m.P_M](double Psi) {
    if (Psi >= PM) return 1.0;
    return S(cache->inverse(Psi + K0));
  };
  m.dtheta = [th = m.theta, D = m.diffusivity](double Psi) {
    return 1.0 / D(th(Psi));
  };
  // |kappa'| is unbounded as s -> 1 for lambda2 < 1; record a sampled sup
  // away from the singular endpoint.
  m.kappa_lip = detail::scan_golden_max(m.dkappa, 0.0, 1.0 - 1e-6);
  return m;
}

// Benchmark model of the nondegenerate experiment:
//   kappa(s) = s^3, S(p) = (2-p)^{-1/3} for p < 1.
inline MediumModel make_case_nondeg() {
  MediumModel m;
  m.name = "case_nondeg";
  m.p_M = 1.0;
  m.S0 = std::pow(2.0, -1.0 / 3.0);
  m.P_M = std::log(2.0);
  m.P_m = -kInf;
  m.kappa = [](double s) { return s * s * s; };
  m.dkappa = [](double s) { return 3.0 * s * s; };
  m.saturation = [](double p) {
    return p >= 1.0 ? 1.0 : std::pow(2.0 - p, -1.0 / 3.0);
  };
  m.dsaturation = [](double p) {
    return p >= 1.0 ? 0.0 : (1.0 / 3.0) * std::pow(2.0 - p, -4.0 / 3.0);
  };
  m.capillary = [](double s) { return 2.0 - 1.0 / (s * s * s); };
  m.diffusivity = [](double s) { return 3.0 / s; };
  m.ddiffusivity = [](double s) { return -3.0 / (s * s); };
  m.total_pressure = [](double s) { return 3.0 * std::log(s) + std::log(2.0); };
  m.theta = [PM = m.P_M](double Psi) {
    return Psi >= PM ? 1.0 : std::exp((Psi - std::log(2.0)) / 3.0);
  };
  m.dtheta = [th = m.theta](double Psi) { return th(Psi) / 3.0; };
  m.kirchhoff = [PM = m.P_M](double p) {
    return p <= 1.0 ? std::log(2.0 / (2.0 - p)) : PM + (p - 1.0);
  };
  m.kappa_lip = 3.0;
  return m;
}

// Benchmark model of the degenerate experiment (total-pressure form):
//   kappa(s) = s, theta(Psi) = exp(Psi - 1) for Psi < 1.
// Completed consistently: P_c(s) = 1 + ln s, S(p) = 1/(e - p), p_M = e - 1.
inline MediumModel make_case_deg() {
  MediumModel m;
  m.name = "case_deg";
  const double E = std::exp(1.0);
  m.p_M = E - 1.0;
  m.S0 = 1.0 / E;
  m.P_M = 1.0;
  m.P_m = -kInf;
  m.kappa = [](double s) { return s; };
  m.dkappa = [](double) { return 1.0; };
  m.saturation = [E, pM = m.p_M](double p) {
    return p >= pM ? 1.0 : 1.0 / (E - p);
  };
  m.dsaturation = [E, pM = m.p_M](double p) {
    return p >= pM ? 0.0 : 1.0 / ((E - p) * (E - p));
  };
  m.capillary = [E](double s) { return E - 1.0 / s; };
  m.diffusivity = [](double s) { return 1.0 / s; };
  m.ddiffusivity = [](double s) { return -1.0 / (s * s); };
  m.total_pressure = [](double s) { return 1.0 + std::log(s); };
  m.theta = [](double Psi) { return Psi >= 1.0 ? 1.0 : std::exp(Psi - 1.0); };
  m.dtheta = [th = m.theta](double Psi) { return th(Psi); };
  m.kirchhoff = [E, pM = m.p_M](double p) {
    return p <= pM ? 1.0 - std::log(E - p) : 1.0 + (p - pM);
  };
  m.kappa_lip = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// Gravity and source
// ---------------------------------------------------------------------------
struct Gravity {
  double gx = 0.0, gy = 0.0;
  double norm() const { return std::hypot(gx, gy); }
};

struct SourceModel {
  // f(s, x, y, t)
  std::function<double(double, double, double, double)> f =
      [](double, double, double, double) { return 0.0; };
  // partial_s f(s, x, y, t); identically 0 when f is independent of s
  std::function<double(double, double, double, double)> df_ds =
      [](double, double, double, double) { return 0.0; };
  // f_m(s) <= inf_{x,t} f(s, x, t)
  std::function<double(double)> f_m = [](double) { return 0.0; };
  // max over [0,1] x Omega x [0,T] of |partial_s f| (sampled by the case)
  double dfds_max = 0.0;
  bool depends_on_s = false;
};

// ---------------------------------------------------------------------------
// Maximum-principle lower bound S_m(t)
// ---------------------------------------------------------------------------

// Integrates Sbar' = f_m(Sbar), Sbar(0) = min(s0_inf, S(0)) by RK4 on the
// given time grid; returns S_m = min(Sbar, S(0)) clipped below at eps_floor.
inline std::vector<double> lower_bound_time(const MediumModel& model,
                                            const SourceModel& source,
                                            double s0_inf,
                                            const std::vector<double>& times,
                                            double eps_floor = 1e-6,
                                            int substeps = 32) {
  if (!(s0_inf > 0.0) || s0_inf > 1.0)
    throw std::invalid_argument("lower_bound_time: s0_inf must be in (0,1]");
  std::vector<double> out(times.size());
  double Sb = std::min(s0_inf, model.S0 > 0 ? model.S0 : s0_inf);
  auto clampv = [&](double v) { return std::max(v, eps_floor); };
  out[0] = clampv(std::min(Sb, model.S0 > 0 ? model.S0 : Sb));
  for (size_t i = 1; i < times.size(); ++i) {
    double h = (times[i] - times[i - 1]) / substeps;
    for (int k = 0; k < substeps; ++k) {
      double k1 = source.f_m(Sb);
      double k2 = source.f_m(Sb + 0.5 * h * k1);
      double k3 = source.f_m(Sb + 0.5 * h * k2);
      double k4 = source.f_m(Sb + h * k3);
      Sb += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      Sb = std::max(Sb, eps_floor);
    }
    out[i] = clampv(std::min(Sb, model.S0 > 0 ? model.S0 : Sb));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gronwall coefficient functions
// ---------------------------------------------------------------------------
struct GeomConstants {
  double K_m = 1.0;       // ellipticity lower bound of Kbar
  double K_M = 1.0;       // ellipticity upper bound of Kbar
  double g_norm = 0.0;    // |g|
  double C_P = M_1_PI;    // Poincare constant of Omega (1/pi for convex)
  double h_Omega = 1.0;   // diameter of Omega
  double cp_h_alpha = 0;  // max_a { C_{P,omega_a} h_{omega_a} }; 0 -> C_P*h
};

struct BoundFunctions {
  std::vector<double> t;         // sample times
  std::vector<double> S_m;       // lower bound samples
  std::vector<double> D_m;       // min D on [S_m(t), 1]
  std::vector<double> D_M;       // max |D'| on [S_m(t), 1]
  std::vector<double> theta_dM;  // max theta'(P_c(rho)) on [S_m(t), 1]
  std::vector<double> f_dM;      // max |partial_s f| (constant in t here)
  std::vector<double> C1, C2, C3;
  std::vector<double> alpha_eff;  // alpha of the efficiency theorem
};

inline BoundFunctions bound_quantities(const MediumModel& model,
                                       const SourceModel& source,
                                       const std::vector<double>& times,
                                       const std::vector<double>& S_m,
                                       const std::vector<double>& C_hinf,
                                       const GeomConstants& geom) {
  if (times.size() != S_m.size() || times.size() != C_hinf.size())
    throw std::invalid_argument("bound_quantities: sample size mismatch");
  BoundFunctions b;
  b.t = times;
  b.S_m = S_m;
  size_t n = times.size();
  b.D_m.resize(n);
  b.D_M.resize(n);
  b.theta_dM.resize(n);
  b.f_dM.assign(n, source.dfds_max);
  b.C1.resize(n);
  b.C2.resize(n);
  b.C3.resize(n);
  b.alpha_eff.resize(n);
  const double klip2 = model.kappa_lip * model.kappa_lip;
  const double cph = geom.C_P * geom.h_Omega;
  const double cph_a = geom.cp_h_alpha > 0 ? geom.cp_h_alpha : cph;
  double fdm_running = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double lo = std::clamp(S_m[i], 1e-12, 1.0);
    b.D_m[i] = detail::scan_golden_min(model.diffusivity, lo, 1.0);
    b.D_M[i] = detail::scan_golden_max(
        [&](double s) { return std::abs(model.ddiffusivity(s)); }, lo, 1.0);
    b.theta_dM[i] = detail::scan_golden_max(
        [&](double s) { return model.dtheta(model.total_pressure(s)); }, lo,
        1.0);
    double fdm = b.f_dM[i];
    fdm_running = std::max(fdm_running, fdm);
    b.C1[i] = 2.0 * b.theta_dM[i] *
              (geom.K_M * geom.g_norm * geom.g_norm * klip2 +
               cph * cph / geom.K_m * fdm * fdm);
    b.C2[i] = 1.0 / b.D_m[i] *
                  (b.D_M[i] * b.D_M[i] * C_hinf[i] +
                   4.0 * geom.K_M * geom.g_norm * geom.g_norm * klip2) +
              2.0 * fdm;
    b.C3[i] = std::pow(cph / std::sqrt(geom.K_m) * fdm_running +
                           std::sqrt(geom.K_M) * geom.g_norm * model.kappa_lip,
                       2.0);
    b.alpha_eff[i] = cph_a / std::sqrt(geom.K_m) * fdm +
                     geom.g_norm * std::sqrt(geom.K_M) * model.kappa_lip;
  }
  return b;
}

}  // namespace richards
