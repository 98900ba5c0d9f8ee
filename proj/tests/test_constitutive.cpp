// Tests for the constitutive relations: closed-form spot values, the
// inverse-pair and transform identities shared by every model family,
// derivative consistency against central finite differences, the
// maximum-principle ODE bound, and the Gronwall coefficient functions.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "richards/constitutive.hpp"

using namespace richards;
using Catch::Approx;

namespace {

std::vector<MediumModel> all_models() {
  std::vector<MediumModel> v;
  v.push_back(make_brooks_corey(0.75, 1.0));
  v.push_back(make_van_genuchten(0.5, 1.0));
  v.push_back(make_heat_model());
  v.push_back(make_case_nondeg());
  v.push_back(make_case_deg());
  return v;
}

// Pressure grid below p_M (finite window for the linear heat model).
std::vector<double> p_grid(const MediumModel& m, int n) {
  double hi = m.linear ? 1.0 : m.p_M - 1e-6;
  double lo = hi - 30.0;
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
  return g;
}

// Total-pressure grid inside (P_m, P_M].
std::vector<double> psi_grid(const MediumModel& m, int n) {
  double hi = m.linear ? 1.0 : m.P_M;
  double lo = std::isfinite(m.P_m) ? m.P_m + 1e-3 * (hi - m.P_m) : hi - 20.0;
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
  return g;
}

double simpson(const std::function<double(double)>& f, double a, double b,
               int n) {
  double h = (b - a) / n, s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("cached antiderivative reproduces sine") {
  CachedAntiderivative A([](double x) { return std::cos(x); }, 0.0, 1.4);
  for (double x : {0.1, 0.5, 1.0, 1.3})
    REQUIRE(A.value(x) == Approx(std::sin(x)).margin(1e-10));
  REQUIRE(A.inverse(std::sin(1.2)) == Approx(1.2).margin(1e-10));
}

TEST_CASE("heat model is the identity") {
  MediumModel m = make_heat_model();
  REQUIRE(m.kirchhoff(0.7) == Approx(0.7).margin(1e-15));
  REQUIRE(m.theta(0.7) == Approx(0.7).margin(1e-15));
  REQUIRE(m.saturation(0.3) == Approx(0.3).margin(1e-15));
  REQUIRE(m.total_pressure(0.4) == Approx(0.4).margin(1e-15));
  REQUIRE(m.kappa(0.9) == 1.0);
  REQUIRE(m.diffusivity(0.2) == 1.0);
}

TEST_CASE("case_nondeg closed forms") {
  MediumModel m = make_case_nondeg();
  REQUIRE(m.saturation(-6.0) == Approx(0.5).margin(1e-14));
  REQUIRE(m.P_M == Approx(std::log(2.0)).margin(1e-14));
  for (double p : {-5.0, -1.0, 0.0, 0.5, 0.99})
    REQUIRE(m.kirchhoff(p) == Approx(std::log(2.0 / (2.0 - p))).margin(1e-13));
  // Independent oracle: numeric quadrature of kappa(S(rho)) from 0 to p.
  auto kern = [&](double rho) { return m.kappa(m.saturation(rho)); };
  REQUIRE(m.kirchhoff(0.5) == Approx(simpson(kern, 0.0, 0.5, 2000)).margin(1e-10));
  REQUIRE(m.theta(m.kirchhoff(0.5)) ==
          Approx(std::pow(1.5, -1.0 / 3.0)).margin(1e-12));  // S(0.5) ~ 0.87358
  REQUIRE(m.theta(0.2) ==
          Approx(std::pow(2.0, -1.0 / 3.0) * std::exp(0.2 / 3.0)).margin(1e-13));
}

TEST_CASE("case_deg closed forms") {
  MediumModel m = make_case_deg();
  REQUIRE(m.theta(1.0) == 1.0);
  REQUIRE(m.theta(0.3) == Approx(std::exp(0.3 - 1.0)).margin(1e-14));
  REQUIRE(m.P_M == 1.0);
  REQUIRE(m.saturation(0.0) == Approx(std::exp(-1.0)).margin(1e-14));
  auto kern = [&](double rho) { return m.kappa(m.saturation(rho)); };
  REQUIRE(m.kirchhoff(1.0) == Approx(simpson(kern, 0.0, 1.0, 2000)).margin(1e-10));
}

TEST_CASE("Brooks-Corey exponents at lambda1 = 0.75") {
  MediumModel m = make_brooks_corey(0.75, 1.0);
  for (double s : {0.2, 0.5, 0.8}) {
    REQUIRE(m.kappa(s) == Approx(std::pow(s, 17.0 / 3.0)).epsilon(1e-13));
    REQUIRE(m.diffusivity(s) / m.diffusivity(1.0) ==
            Approx(std::pow(s, 10.0 / 3.0)).epsilon(1e-13));
  }
  REQUIRE(m.S0 == Approx(std::pow(2.0, -0.75)).margin(1e-15));
}

TEST_CASE("transform identity theta(K(p)) = S(p)") {
  for (const auto& m : all_models()) {
    INFO(m.name);
    for (double p : p_grid(m, 200))
      REQUIRE(m.theta(m.kirchhoff(p)) == Approx(m.saturation(p)).margin(1e-10));
    if (!m.linear) {  // saturated branch
      REQUIRE(m.theta(m.kirchhoff(m.p_M + 2.0)) == 1.0);
      REQUIRE(m.saturation(m.p_M + 2.0) == 1.0);
    }
  }
}

TEST_CASE("inverse-pair round trips") {
  for (const auto& m : all_models()) {
    INFO(m.name);
    for (double p : p_grid(m, 1000))
      REQUIRE(m.capillary(m.saturation(p)) == Approx(p).margin(1e-9));
    for (double Psi : psi_grid(m, 500))
      REQUIRE(m.total_pressure(m.theta(Psi)) == Approx(Psi).margin(1e-9));
  }
}

TEST_CASE("theta' D(theta) = 1 on (P_m, P_M]") {
  for (const auto& m : all_models()) {
    INFO(m.name);
    for (double Psi : psi_grid(m, 200)) {
      // D blows up as s -> 1 for van Genuchten; stay just below P_M where
      // the identity is classical.
      if (!m.linear) Psi = std::min(Psi, m.P_M - 1e-6);
      REQUIRE(m.dtheta(Psi) * m.diffusivity(m.theta(Psi)) ==
              Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("K'(p) = kappa(S(p)) against central differences") {
  for (const auto& m : all_models()) {
    INFO(m.name);
    for (double p : p_grid(m, 60)) {
      double h = 1e-6;
      double fd = (m.kirchhoff(p + h) - m.kirchhoff(p - h)) / (2 * h);
      double exact = m.kappa(m.saturation(p));
      REQUIRE(fd == Approx(exact).epsilon(1e-6).margin(1e-10));
    }
  }
}

TEST_CASE("stored derivatives match central differences") {
  const double h = 1e-6;
  for (const auto& m : all_models()) {
    INFO(m.name);
    for (double s = 0.05; s <= 0.951; s += 0.05) {
      double fdk = (m.kappa(s + h) - m.kappa(s - h)) / (2 * h);
      REQUIRE(m.dkappa(s) == Approx(fdk).epsilon(1e-5).margin(1e-9));
      double fdD = (m.diffusivity(s + h) - m.diffusivity(s - h)) / (2 * h);
      REQUIRE(m.ddiffusivity(s) == Approx(fdD).epsilon(1e-4).margin(1e-8));
    }
    double hi = m.linear ? 1.0 : m.p_M - 0.2;
    for (double p = hi - 10.0; p <= hi; p += 0.5) {
      double fdS = (m.saturation(p + h) - m.saturation(p - h)) / (2 * h);
      REQUIRE(m.dsaturation(p) == Approx(fdS).epsilon(1e-5).margin(1e-10));
    }
    double Phi = m.linear ? 0.8 : m.P_M - 0.05 * (m.P_M - psi_grid(m, 2)[0]);
    double Plo = psi_grid(m, 2)[0] + 0.05;
    for (int i = 0; i < 10; ++i) {
      double Psi = Plo + (Phi - Plo) * i / 9.0;
      double fdt = (m.theta(Psi + h) - m.theta(Psi - h)) / (2 * h);
      REQUIRE(m.dtheta(Psi) == Approx(fdt).epsilon(1e-5).margin(1e-10));
    }
  }
}

TEST_CASE("monotonicity of kappa, S, P_c, theta") {
  for (const auto& m : all_models()) {
    INFO(m.name);
    double prev = -kInf;
    for (double s = 0.01; s <= 1.0001; s += 0.01) {
      REQUIRE(m.kappa(s) >= prev - 1e-14);
      prev = m.kappa(s);
    }
    prev = -kInf;
    for (double p : p_grid(m, 200)) {
      REQUIRE(m.saturation(p) >= prev - 1e-14);
      prev = m.saturation(p);
    }
    prev = -kInf;
    for (double s = 0.05; s <= 1.0001; s += 0.01) {
      REQUIRE(m.total_pressure(s) >= prev - 1e-12);
      prev = m.total_pressure(s);
    }
    prev = -kInf;
    for (double Psi : psi_grid(m, 200)) {
      REQUIRE(m.theta(Psi) >= prev - 1e-14);
      prev = m.theta(Psi);
    }
  }
}

TEST_CASE("kappa(1) = 1 and saturated plateaus") {
  for (const auto& m : all_models()) {
    INFO(m.name);
    REQUIRE(m.kappa(1.0) == Approx(1.0).margin(1e-12));
    if (!m.linear) {
      REQUIRE(m.saturation(m.p_M) == 1.0);
      REQUIRE(m.saturation(m.p_M + 5.0) == 1.0);
      REQUIRE(m.theta(m.P_M + 5.0) == 1.0);
    }
  }
}

TEST_CASE("invalid model parameters are rejected") {
  REQUIRE_THROWS(make_brooks_corey(-1.0, 1.0));
  REQUIRE_THROWS(make_van_genuchten(1.5, 1.0));
  REQUIRE_THROWS(make_van_genuchten(0.5, -1.0));
}

TEST_CASE("lower bound: zero source keeps the initial infimum") {
  MediumModel m = make_heat_model();
  m.S0 = 0.5;
  SourceModel src;  // f_m = 0
  std::vector<double> t{0.0, 0.25, 0.5, 1.0};
  auto Sm = lower_bound_time(m, src, 0.3, t);
  for (double v : Sm) REQUIRE(v == Approx(0.3).margin(1e-14));
}

TEST_CASE("lower bound: exponential decay source") {
  MediumModel m = make_heat_model();
  m.S0 = 1.0;
  SourceModel src;
  src.f_m = [](double s) { return -s; };
  std::vector<double> t(11);
  for (int i = 0; i <= 10; ++i) t[i] = 0.1 * i;
  auto Sm = lower_bound_time(m, src, 1.0, t);
  for (int i = 0; i <= 10; ++i)
    REQUIRE(Sm[i] == Approx(std::exp(-t[i])).margin(1e-8));
}

TEST_CASE("lower bound: nonnegative source is capped at S(0)") {
  MediumModel m = make_heat_model();
  m.S0 = 0.4;
  SourceModel src;
  src.f_m = [](double) { return 2.0; };
  std::vector<double> t{0.0, 0.5, 1.0};
  auto Sm = lower_bound_time(m, src, 0.9, t);
  for (double v : Sm) REQUIRE(v == Approx(0.4).margin(1e-14));
}

TEST_CASE("lower bound floor keeps S_m positive") {
  MediumModel m = make_heat_model();
  m.S0 = 1.0;
  SourceModel src;
  src.f_m = [](double) { return -40.0; };
  std::vector<double> t{0.0, 1.0};
  auto Sm = lower_bound_time(m, src, 1.0, t);
  REQUIRE(Sm[1] == Approx(1e-6).margin(1e-18));
}

TEST_CASE("Gronwall coefficients vanish for the heat model") {
  MediumModel m = make_heat_model();
  SourceModel src;
  GeomConstants geom;
  geom.g_norm = 1.0;
  std::vector<double> t{0.0, 1.0}, Sm{1.0, 1.0}, Ch{2.0, 3.0};
  BoundFunctions b = bound_quantities(m, src, t, Sm, Ch, geom);
  for (size_t i = 0; i < t.size(); ++i) {
    REQUIRE(b.D_m[i] == Approx(1.0).margin(1e-12));
    REQUIRE(b.D_M[i] == Approx(0.0).margin(1e-12));
    REQUIRE(b.theta_dM[i] == Approx(1.0).margin(1e-12));
    REQUIRE(b.C1[i] == Approx(0.0).margin(1e-12));
    REQUIRE(b.C2[i] == Approx(0.0).margin(1e-12));
    REQUIRE(b.C3[i] == Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("Gronwall coefficients for case_nondeg at S_m = 0.5") {
  MediumModel m = make_case_nondeg();
  SourceModel src;  // f independent of s: dfds_max = 0
  GeomConstants geom;
  geom.g_norm = 1.0;
  geom.K_m = geom.K_M = 1.0;
  std::vector<double> t{0.0}, Sm{0.5}, Ch{0.0};
  BoundFunctions b = bound_quantities(m, src, t, Sm, Ch, geom);
  REQUIRE(b.D_m[0] == Approx(3.0).epsilon(1e-10));    // min 3/s on [0.5,1]
  REQUIRE(b.D_M[0] == Approx(12.0).epsilon(1e-10));   // max 3/s^2 on [0.5,1]
  REQUIRE(b.theta_dM[0] == Approx(1.0 / 3.0).epsilon(1e-10));  // max s/3
  REQUIRE(b.C1[0] == Approx(6.0).epsilon(1e-9));  // 2*(1/3)*(1*1*3^2 + 0)
  // C2 = (1/3)*(144*C_hinf + 4*9) + 0 with C_hinf = 0
  REQUIRE(b.C2[0] == Approx(12.0).epsilon(1e-9));
  // C3 = (0 + 1*1*3)^2
  REQUIRE(b.C3[0] == Approx(9.0).epsilon(1e-9));
  REQUIRE(b.alpha_eff[0] == Approx(3.0).epsilon(1e-9));
}
