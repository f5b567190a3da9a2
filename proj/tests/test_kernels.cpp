#include <biphoton/kernels.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracle.hpp"

using namespace biphoton;
using oracle::cd;

namespace {

SystemParams fig_params(double delta_c_ghz = 0.0) { return presets::coupling_15mw(delta_c_ghz); }

} // namespace

// Spot values against the test-side dense trapezoid

TEST(Kernels, RhoMMatchesOracleAtResonance) {
  const auto p = fig_params(0.0);
  EXPECT_LT(oracle::rel(rho_m_bar(0.0, p), oracle::rho_m(0.0, p)), 1e-8);
}

TEST(Kernels, RhoCMatchesOracle) {
  const auto p = fig_params(0.0);
  EXPECT_LT(oracle::rel(rho_c_bar(0.1, p), oracle::rho_c(0.1, p)), 1e-8);
}

TEST(Kernels, KappaMatchesOracleAtOneGHz) {
  const auto p = fig_params(1.0);
  EXPECT_LT(oracle::rel(kappa_bar(0.0, p), oracle::kappa(0.0, p)), 1e-8);
}

TEST(Kernels, AnalyticMatchesOracleOverGrid) {
  for (double dc : {0.0, 0.2, 0.7, 1.0, 3.0}) {
    const auto p = fig_params(dc);
    const KernelModel m(p);
    for (double d : {-50.0, -5.0, -0.1, 0.0, 0.1, 5.0, 50.0}) {
      EXPECT_LT(oracle::rel(m.rho_m(d), oracle::rho_m(d, p)), 1e-6) << d << " " << dc;
      EXPECT_LT(oracle::rel(m.rho_c(d), oracle::rho_c(d, p)), 1e-6) << d << " " << dc;
      EXPECT_LT(oracle::rel(m.kappa(d), oracle::kappa(d, p)), 1e-6) << d << " " << dc;
    }
  }
}

TEST(Kernels, NegativeDetuningsAndPoleSigns) {
  // sign-spanning grid: the coupling pole's imaginary part changes sign with delta
  auto p = fig_params(-0.7);
  p.gamma_dec = 0.5;
  p.omega_c = 30.0;
  const KernelModel m(p);
  for (double d : {-20.0, -1.0, -0.3, 0.3, 1.0, 20.0}) {
    EXPECT_LT(oracle::rel(m.rho_c(d), oracle::rho_c(d, p)), 1e-8) << d;
    EXPECT_LT(oracle::rel(m.kappa(d), oracle::kappa(d, p)), 1e-8) << d;
  }
}

TEST(Kernels, AllMatchesIndividualCalls) {
  const auto p = fig_params(0.7);
  const KernelModel m(p);
  for (double d : {-3.0, 0.0, 0.02, 7.0}) {
    const auto v = m.all(d);
    EXPECT_EQ(v.kappa, m.kappa(d));
    EXPECT_EQ(v.rho_c, m.rho_c(d));
    EXPECT_EQ(v.rho_m, m.rho_m(d));
  }
}

TEST(Kernels, QuadratureRoutesAgreeWithAnalytic) {
  const auto p = fig_params(0.2);
  const auto adaptive = QuadratureSpec::adaptive(1e-11);
  for (double d : {-5.0, 0.1}) {
    EXPECT_LT(oracle::rel(kappa_bar(d, p, adaptive), kappa_bar(d, p)), 1e-8);
    EXPECT_LT(oracle::rel(rho_c_bar(d, p, adaptive), rho_c_bar(d, p)), 1e-8);
    EXPECT_LT(oracle::rel(rho_m_bar(d, p, adaptive), rho_m_bar(d, p)), 1e-8);
  }
}

// Trivial cases

TEST(Kernels, RhoMVanishesWithoutImpurities) {
  auto p = fig_params();
  p.b = 0.0;
  for (double d : {-3.0, 0.0, 2.0}) EXPECT_EQ(rho_m_bar(d, p), cd(0.0));
}

TEST(Kernels, RhoCVanishesAtZeroTwoPhotonDetuningWithoutDecoherence) {
  auto p = fig_params();
  p.gamma_dec = 0.0;
  EXPECT_EQ(rho_c_bar(0.0, p), cd(0.0));
}

TEST(Kernels, FullImpurityKillsCoherentTerms) {
  auto p = fig_params();
  p.b = 1.0;
  EXPECT_EQ(rho_c_bar(0.3, p), cd(0.0));
  EXPECT_EQ(kappa_bar(0.3, p), cd(0.0));
}

TEST(Kernels, KappaVanishesWithoutPump) {
  auto p = fig_params();
  p.omega_p = 0.0;
  EXPECT_EQ(kappa_bar(0.3, p), cd(0.0));
}

TEST(Kernels, FarDetunedImpuritySuppressed) {
  const auto near = std::abs(rho_m_bar(0.0, fig_params(0.0)));
  const auto far = std::abs(rho_m_bar(0.0, fig_params(3.0)));
  // test-side oracle values agree on the ordering
  EXPECT_LT(far, near);
  EXPECT_LT(std::abs(oracle::rho_m(0.0, fig_params(3.0))), std::abs(oracle::rho_m(0.0, fig_params(0.0))));
}

TEST(Kernels, ZeroCouplingLimit) {
  auto p = fig_params(0.3);
  p.omega_c = 0.0;
  for (double d : {-2.0, 0.0, 0.5}) {
    EXPECT_LT(oracle::rel(rho_c_bar(d, p), oracle::rho_c(d, p)), 1e-8) << d;
    EXPECT_EQ(kappa_bar(d, p), cd(0.0));
  }
}

TEST(Kernels, ZeroTwoPhotonDetuningWithoutDecoherence) {
  // q = 0 with coupling on: the coupling factor is the constant 1/Oc^2
  auto p = fig_params(0.4);
  p.gamma_dec = 0.0;
  EXPECT_EQ(rho_c_bar(0.0, p), cd(0.0));
  EXPECT_LT(oracle::rel(kappa_bar(0.0, p), oracle::kappa(0.0, p)), 1e-8);
}

TEST(Kernels, CoincidentPolesFallBackToQuadrature) {
  // gamma = 0, delta = 1, Oc = 2, Dc = Dp puts both poles at -Dp - i/2
  auto p = fig_params();
  p.gamma_dec = 0.0;
  p.omega_c = 2.0;
  p.delta_c = p.delta_p;
  const auto v = kappa_bar(1.0, p);
  EXPECT_TRUE(std::isfinite(v.real()) && std::isfinite(v.imag()));
  EXPECT_LT(oracle::rel(v, oracle::kappa(1.0, p)), 1e-8);
}

// Properties

TEST(Kernels, RhoMLinearInImpurityDensity) {
  auto p = fig_params(0.2);
  const auto base = rho_m_bar(0.3, p);
  p.b *= 2.0;
  EXPECT_LT(oracle::rel(rho_m_bar(0.3, p), 2.0 * base), 1e-14);
  p.alpha *= 3.0;
  EXPECT_LT(oracle::rel(rho_m_bar(0.3, p), 6.0 * base), 1e-14);
}

TEST(Kernels, KappaLinearInPumpAndCoherentDensity) {
  auto p = fig_params(0.2);
  const auto base = kappa_bar(0.05, p);
  auto q = p;
  q.omega_p = 2.5;
  EXPECT_LT(oracle::rel(kappa_bar(0.05, q), 2.5 * base), 1e-14);
  q = p;
  q.alpha *= 2.0;
  EXPECT_LT(oracle::rel(kappa_bar(0.05, q), 2.0 * base), 1e-14);
  q = p;
  q.b = 1.0 - (1.0 - p.b) / 2.0; // halves (1 - b)
  EXPECT_LT(oracle::rel(kappa_bar(0.05, q), 0.5 * base), 1e-13);
}

TEST(Kernels, ImpurityTermIsAbsorptive) {
  for (double dc : {0.0, 1.0, -2.0}) {
    const KernelModel m(fig_params(dc));
    for (double d = -600.0; d <= 600.0; d += 0.37) EXPECT_GT(m.rho_m(d).imag(), 0.0) << d;
  }
}

TEST(Kernels, Validation) {
  auto p = fig_params();
  p.b = 1.5;
  EXPECT_THROW(rho_m_bar(0.0, p), Error);
  p = fig_params();
  p.gamma_doppler = 0.0;
  EXPECT_THROW(kappa_bar(0.0, p), Error);
  p = fig_params();
  p.gamma_dec = -1e-3;
  EXPECT_THROW(rho_c_bar(0.0, p), Error);
  try {
    kappa_bar(NAN, fig_params());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_parameter);
  }
}

TEST(Kernels, AdaptiveBudgetExhaustion) {
  // budget equal to the initial panel count: any refinement step throws
  QuadratureSpec q = QuadratureSpec::adaptive(1e-15);
  q.panel_budget = 256;
  EXPECT_THROW(rho_m_bar(0.0, fig_params(), q), ConvergenceError);
}

// Etalon

TEST(Etalon, Values) {
  EXPECT_EQ(etalon_response(0.0, 8.9), 1.0);
  EXPECT_DOUBLE_EQ(etalon_response(8.9 / 2.0, 8.9), 0.25);
  EXPECT_NEAR(etalon_response(89.0, 8.9), 1.0 / (401.0 * 401.0), 1e-18);
  EXPECT_THROW(etalon_response(0.0, 0.0), Error);
}

TEST(Etalon, EvenMonotoneBounded) {
  double prev = 2.0;
  for (double d = 0.0; d < 200.0; d += 0.25) {
    const double v = etalon_response(d, 8.9);
    EXPECT_EQ(v, etalon_response(-d, 8.9));
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_LT(v, prev);
    EXPECT_NEAR(v, oracle::etalon(d, 8.9), 1e-14 * v);
    prev = v;
  }
}

// Sinc

TEST(ComplexSinc, Values) {
  EXPECT_EQ(complex_sinc(cd(0.0)), cd(1.0));
  EXPECT_NEAR(std::abs(complex_sinc(cd(std::numbers::pi))), 0.0, 1e-12);
  const auto v = complex_sinc(cd(0.0, 1.0));
  EXPECT_NEAR(v.real(), 1.1752011936438014, 1e-12);
  EXPECT_NEAR(v.imag(), 0.0, 1e-15);
}

TEST(ComplexSinc, ContinuousAcrossSeriesThreshold) {
  for (double arg : {0.0, 0.7, 1.6, 3.0}) {
    for (double r : {0.999 * sinc_series_threshold, 1.001 * sinc_series_threshold}) {
      const cd z = std::polar(r, arg);
      // series reference with more terms than the library keeps
      const cd z2 = z * z;
      const cd ref = 1.0 - z2 / 6.0 + z2 * z2 / 120.0 - z2 * z2 * z2 / 5040.0;
      EXPECT_LT(oracle::rel(complex_sinc(z), ref), 1e-12) << z;
    }
  }
}

TEST(ComplexSinc, ConjugateSymmetry) {
  for (cd z : {cd(0.3, -0.2), cd(1e-4, 3e-4), cd(-4.0, 2.0), cd(12.0, 0.01)})
    EXPECT_EQ(complex_sinc(std::conj(z)), std::conj(complex_sinc(z)));
}
