#pragma once

// Faddeeva function w(z) = exp(-z^2) erfc(-iz) for Im z >= 0, using
// Weideman's rational expansion (SIAM J. Numer. Anal. 31, 1994):
//
//   w(z) = 2 p(Z) / (L - iz)^2 + (1/sqrt(pi)) / (L - iz),  Z = (L + iz)/(L - iz)
//
// with p a polynomial of degree N-1 whose coefficients are a cosine
// transform of exp(-t^2)(L^2 + t^2) on the mapped grid t = L tan(theta/2).
// With N = 40 the relative error is below 1e-13 on the closed upper
// half-plane, including the real axis and |z| up to 1e5.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace biphoton::faddeeva {

using cplx = std::complex<double>;

inline constexpr int weideman_terms = 40;

struct WeidemanTable {
  double L = 0.0;
  std::array<double, weideman_terms> a{}; // a[n-1] multiplies Z^(n-1)
};

inline WeidemanTable make_weideman_table() {
  constexpr int N = weideman_terms;
  constexpr int M = 2 * N;
  constexpr int M2 = 2 * M;
  WeidemanTable t;
  t.L = std::sqrt(N / std::numbers::sqrt2);
  const double L = t.L;
  // sample F(k) for k = -M+1 .. M-1; F(-M) = 0 since tan(-pi/2) diverges
  std::array<double, M2> f{};
  for (int k = -M + 1; k <= M - 1; ++k) {
    const double theta = k * std::numbers::pi / M;
    const double s = L * std::tan(theta / 2.0);
    f[static_cast<std::size_t>(k + M)] = std::exp(-s * s) * (L * L + s * s);
  }
  for (int n = 1; n <= N; ++n) {
    double acc = 0.0;
    for (int k = -M + 1; k <= M - 1; ++k)
      acc += f[static_cast<std::size_t>(k + M)] *
             std::cos(std::numbers::pi * n * k / M);
    t.a[static_cast<std::size_t>(n - 1)] = acc / M2;
  }
  return t;
}

inline const WeidemanTable& weideman_table() {
  static const WeidemanTable table = make_weideman_table();
  return table;
}

/// w(z) for Im z >= 0. Callers needing the lower half-plane should reflect.
inline cplx w_upper(cplx z) {
  const auto& t = weideman_table();
  const cplx iz{-z.imag(), z.real()};
  const cplx lm = t.L - iz;
  const cplx Z = (t.L + iz) / lm;
  cplx p = t.a[weideman_terms - 1];
  for (int n = weideman_terms - 2; n >= 0; --n)
    p = p * Z + t.a[static_cast<std::size_t>(n)];
  const cplx inv = 1.0 / lm;
  return 2.0 * p * inv * inv + inv / std::sqrt(std::numbers::pi);
}

/// Faddeeva function on the whole plane. In the lower half-plane uses
/// w(z) = 2 exp(-z^2) - conj(w(conj z)), which overflows for large |Im z|.
inline cplx w(cplx z) {
  if (z.imag() >= 0.0) return w_upper(z);
  return 2.0 * std::exp(-z * z) - std::conj(w_upper(std::conj(z)));
}

/// Gaussian-weighted Cauchy integral
///   I(zeta) = (1/sqrt(pi)) * integral exp(-t^2) / (t - zeta) dt
/// over the real line, for zeta off the real axis. The integral is analytic
/// separately in each half-plane; Im zeta < 0 follows from the upper one by
/// I(zeta) = conj(I(conj zeta)), so no exponential growth is ever evaluated.
/// On the real axis the upper-half-plane limit is returned.
inline cplx gaussian_cauchy(cplx zeta) {
  constexpr double sqrt_pi = 1.7724538509055160273;
  if (zeta.imag() >= 0.0) return cplx{0.0, sqrt_pi} * w_upper(zeta);
  return std::conj(cplx{0.0, sqrt_pi} * w_upper(std::conj(zeta)));
}

/// Doppler average of 1/(omega_D - pole) with the normalized Gaussian weight
/// exp(-omega_D^2/gd^2)/(sqrt(pi) gd).
inline cplx doppler_pole_average(cplx pole, double gamma_doppler) {
  return gaussian_cauchy(pole / gamma_doppler) / gamma_doppler;
}

} // namespace biphoton::faddeeva
