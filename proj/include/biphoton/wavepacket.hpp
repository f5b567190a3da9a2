#pragma once

// Spectral amplitude of the biphoton and its delay-time wave packet
//
//   A(d)    = kappa(d) sinc(rho_c + rho_m) exp(i (rho_c + rho_m)) B(d)
//   G2(tau) = | integral dd exp(-i d tau) / (2 pi) A(d) |^2

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "fft.hpp"
#include "kernels.hpp"
#include "params.hpp"
#include "parallel.hpp"
#include "units.hpp"

namespace biphoton {

/// Uniform two-photon-detuning grid on [-delta_max, +delta_max], both ends
/// included.
struct DetuningGrid {
  double delta_max = 44.5;
  std::size_t n_points = std::size_t{1} << 15;

  static constexpr std::size_t min_points = std::size_t{1} << 14;
  static constexpr std::size_t max_points = std::size_t{1} << 22;

  double spacing() const { return 2.0 * delta_max / static_cast<double>(n_points - 1); }
  double value(std::size_t k) const {
    return -delta_max + spacing() * static_cast<double>(k);
  }
  std::vector<double> values() const {
    std::vector<double> v(n_points);
    for (std::size_t k = 0; k < n_points; ++k) v[k] = value(k);
    return v;
  }

  void validate() const {
    require(std::isfinite(delta_max) && delta_max > 0.0,
            ErrorCode::invalid_parameter, "grid delta_max must be > 0");
    require(n_points >= min_points && std::has_single_bit(n_points),
            ErrorCode::invalid_parameter,
            "grid n_points must be a power of two >= 2^14");
    require(n_points <= max_points, ErrorCode::grid_overflow,
            "grid n_points exceeds 2^22");
  }
};

/// Decoherence rates below this are treated as this for grid sizing only.
inline constexpr double grid_gamma_floor = 1e-3;

/// Narrowest spectral feature the grid has to resolve.
inline double feature_width(const SystemParams& p) {
  return std::min(std::max(p.gamma_dec, grid_gamma_floor), p.gamma_etalon / 100.0);
}

/// Default grid: delta_max = max(20, 5 Gamma_e), spacing <= feature_width/4.
inline DetuningGrid auto_grid(const SystemParams& p) {
  DetuningGrid g;
  g.delta_max = std::max(20.0 * p.gamma_natural, 5.0 * p.gamma_etalon);
  const double target = feature_width(p) / 4.0;
  const double needed = 2.0 * g.delta_max / target + 1.0;
  g.n_points = DetuningGrid::min_points;
  while (static_cast<double>(g.n_points) < needed) {
    require(g.n_points < DetuningGrid::max_points, ErrorCode::grid_overflow,
            "decoherence rate too small to resolve within 2^22 grid points");
    g.n_points *= 2;
  }
  return g;
}

struct SpectralAmplitude {
  DetuningGrid grid;
  std::vector<std::complex<double>> amplitude;
  SystemParams params;
};

/// Relative edge magnitude the amplitude must decay to.
inline constexpr double edge_decay_limit = 1e-6;
inline constexpr int max_grid_widenings = 3;

namespace detail {

inline std::vector<std::complex<double>>
sample_amplitude(const SystemParams& p, const DetuningGrid& grid,
                 const QuadratureSpec& quad) {
  std::vector<std::complex<double>> amp(grid.n_points);
  const KernelModel model(p);
  parallel_for(grid.n_points, [&](std::size_t k) {
    const double d = grid.value(k);
    KernelValues kv;
    if (quad.method == QuadratureMethod::faddeeva_analytic) {
      kv = model.all(d);
    } else {
      kv.kappa = kappa_bar(d, p, quad);
      kv.rho_c = rho_c_bar(d, p, quad);
      kv.rho_m = rho_m_bar(d, p, quad);
    }
    const cplx rho = kv.rho_c + kv.rho_m;
    amp[k] = kv.kappa * complex_sinc(rho) * std::exp(cplx{0.0, 1.0} * rho) *
             etalon_response(d, p.gamma_etalon);
  });
  return amp;
}

inline bool edges_decayed(const std::vector<std::complex<double>>& amp) {
  double peak = 0.0;
  for (const auto& a : amp) peak = std::max(peak, std::abs(a));
  if (peak == 0.0) return true;
  const double edge = std::max(std::abs(amp.front()), std::abs(amp.back()));
  return edge < edge_decay_limit * peak;
}

} // namespace detail

/// Samples A(delta). Without a hint the grid is sized from the parameters;
/// either way it is doubled in width (same spacing) until the amplitude at
/// both edges is below 1e-6 of its peak, at most three times.
inline SpectralAmplitude
sample_spectral_amplitude(const SystemParams& params,
                          std::optional<DetuningGrid> grid_hint = std::nullopt,
                          const QuadratureSpec& quad = {}) {
  params.validate();
  quad.validate();
  DetuningGrid grid = grid_hint ? *grid_hint : auto_grid(params);
  grid.validate();
  if (grid_hint) {
    require(grid.spacing() <= feature_width(params) / 4.0 * (1.0 + 1e-12),
            ErrorCode::invalid_parameter,
            "grid hint too coarse: spacing must resolve the narrowest feature "
            "with at least 4 samples");
  }
  for (int widen = 0;; ++widen) {
    auto amp = detail::sample_amplitude(params, grid, quad);
    if (detail::edges_decayed(amp))
      return SpectralAmplitude{grid, std::move(amp), params};
    if (widen == max_grid_widenings)
      fail(ErrorCode::grid_overflow,
           "spectral amplitude does not decay to 1e-6 of its peak within "
           "delta_max = " + std::to_string(grid.delta_max));
    // 2n points over 2(2d + h/2) keep the spacing h = 2d/(n-1)
    grid.delta_max = 2.0 * grid.delta_max + 0.5 * grid.spacing();
    grid.n_points *= 2;
    grid.validate();
  }
}

/// G2 on a uniform delay grid (units of 1/Gamma), ascending tau.
struct WavePacket {
  std::vector<double> tau;
  std::vector<double> g2;
  SystemParams params;

  double tau_step() const { return tau.size() > 1 ? tau[1] - tau[0] : 0.0; }
  std::vector<double> tau_ns() const {
    std::vector<double> t(tau.size());
    std::transform(tau.begin(), tau.end(), t.begin(), units::to_ns);
    return t;
  }
};

/// Zero-padding factor of the delay-time transform; sets tau resolution to
/// 2 pi / (pad * 2 delta_max).
inline constexpr std::size_t time_padding = 4;

namespace detail {

struct Transformed {
  std::vector<std::complex<double>> buf; // DFT output, FFT order
  double dtau = 0.0;
  std::size_t half = 0;

  std::size_t fft_index(std::size_t j) const { return (j + half) % buf.size(); }
  double tau(std::size_t j) const {
    return (static_cast<double>(j) - static_cast<double>(half)) * dtau;
  }
};

inline Transformed transform(const SpectralAmplitude& sa) {
  sa.grid.validate();
  const std::size_t n = sa.grid.n_points;
  require(sa.amplitude.size() == n, ErrorCode::invalid_parameter,
          "spectral amplitude size does not match its grid");
  Transformed t;
  const std::size_t m_len = n * time_padding;
  t.buf.assign(m_len, {});
  std::copy(sa.amplitude.begin(), sa.amplitude.end(), t.buf.begin());
  t.buf.front() *= 0.5; // trapezoid end weights
  t.buf[n - 1] *= 0.5;
  forward_dft(t.buf);
  t.dtau = units::two_pi / (static_cast<double>(m_len) * sa.grid.spacing());
  t.half = m_len / 2;
  return t;
}

} // namespace detail

/// Continuous Fourier transform of A by a trapezoid-weighted DFT:
///   G(tau_m) = (h / 2pi) exp(-i d_min tau_m) sum_k w_k A_k exp(-i k h tau_m)
/// with tau_m = 2 pi m / (M h), M the padded length and w the trapezoid
/// weights. The tau window is one full period, [-pi/h, pi/h).
inline WavePacket wave_packet(const SpectralAmplitude& sa) {
  const auto t = detail::transform(sa);
  const double norm = sa.grid.spacing() / units::two_pi;
  WavePacket wp;
  wp.params = sa.params;
  wp.tau.resize(t.buf.size());
  wp.g2.resize(t.buf.size());
  for (std::size_t j = 0; j < t.buf.size(); ++j) {
    // the phase factor has unit modulus and drops out of G2
    wp.tau[j] = t.tau(j);
    wp.g2[j] = std::norm(t.buf[t.fft_index(j)]) * norm * norm;
  }
  return wp;
}

/// Complex G(tau) before the modulus, on the wave_packet delay grid.
inline std::vector<std::complex<double>>
complex_wave_packet(const SpectralAmplitude& sa) {
  const auto t = detail::transform(sa);
  const double norm = sa.grid.spacing() / units::two_pi;
  const double d_min = sa.grid.value(0);
  std::vector<std::complex<double>> out(t.buf.size());
  for (std::size_t j = 0; j < t.buf.size(); ++j)
    out[j] = t.buf[t.fft_index(j)] * std::exp(cplx{0.0, -d_min * t.tau(j)}) * norm;
  return out;
}

/// |A(delta)|^2 normalized to unit peak.
inline std::vector<double> biphoton_spectrum(const SpectralAmplitude& sa) {
  std::vector<double> s(sa.amplitude.size());
  double peak = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = std::norm(sa.amplitude[k]);
    peak = std::max(peak, s[k]);
  }
  require(peak > 0.0, ErrorCode::empty_spectrum, "empty spectrum");
  for (auto& v : s) v /= peak;
  return s;
}

/// (1/2pi) * trapezoid integral of |A|^2 over the grid.
inline double spectral_energy(const SpectralAmplitude& sa) {
  const double h = sa.grid.spacing();
  double sum = 0.0;
  const std::size_t n = sa.amplitude.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double w = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
    sum += w * std::norm(sa.amplitude[k]);
  }
  return sum * h / units::two_pi;
}

} // namespace biphoton
