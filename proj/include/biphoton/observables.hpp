#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "format.hpp"
#include "records.hpp"
#include "units.hpp"
#include "wavepacket.hpp"

namespace biphoton {

/// Full width at half maximum of a sampled non-negative curve. The two
/// half-maximum crossings next to the global peak are located by linear
/// interpolation between the bracketing samples.
inline double fwhm(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCode::extraction,
          "fwhm: abscissa and ordinate lengths differ");
  require(y.size() >= 3, ErrorCode::extraction, "fwhm: need at least 3 samples");
  const auto peak_it = std::max_element(y.begin(), y.end());
  const std::size_t k = static_cast<std::size_t>(peak_it - y.begin());
  const double peak = *peak_it;
  require(peak > 0.0, ErrorCode::extraction, "fwhm: curve has no positive peak");
  require(k != 0, ErrorCode::extraction, "fwhm: peak at left endpoint");
  require(k + 1 != y.size(), ErrorCode::extraction, "fwhm: peak at right endpoint");
  const double half = 0.5 * peak;

  std::size_t i = k;
  while (i > 0 && y[i] > half) --i;
  require(y[i] <= half, ErrorCode::extraction,
          "fwhm: no half-maximum crossing on the left side");
  const double left = x[i] + (half - y[i]) / (y[i + 1] - y[i]) * (x[i + 1] - x[i]);

  std::size_t j = k;
  while (j + 1 < y.size() && y[j] > half) ++j;
  require(y[j] <= half, ErrorCode::extraction,
          "fwhm: no half-maximum crossing on the right side");
  const double right =
      x[j - 1] + (half - y[j - 1]) / (y[j] - y[j - 1]) * (x[j] - x[j - 1]);
  return right - left;
}

/// R_g = scale * integral G2 dtau (trapezoid on the delay grid, tau in 1/Gamma).
/// Without a scale the result is in arbitrary units.
inline Rate generation_rate(const WavePacket& wp, std::optional<double> scale = std::nullopt) {
  require(wp.tau.size() == wp.g2.size(), ErrorCode::invalid_parameter,
          "wave packet arrays differ in length");
  if (scale)
    require(std::isfinite(*scale) && *scale > 0.0, ErrorCode::invalid_parameter,
            "calibration scale must be > 0");
  double sum = 0.0;
  const std::size_t n = wp.g2.size();
  for (std::size_t i = 0; i + 1 < n; ++i)
    sum += 0.5 * (wp.g2[i] + wp.g2[i + 1]) * (wp.tau[i + 1] - wp.tau[i]);
  return Rate{scale.value_or(1.0) * sum, scale.has_value()};
}

/// Ratio of pair generation rate to heralding-photon generation rate.
inline double heralding_probability(Rate r_g, Rate singles) {
  require(singles.value > 0.0, ErrorCode::invalid_parameter,
          "singles rate must be > 0");
  require(r_g.value >= 0.0, ErrorCode::invalid_parameter,
          "generation rate must be >= 0");
  require(r_g.calibrated == singles.calibrated, ErrorCode::inconsistent_rates,
          "generation and singles rates have different calibration status");
  require(r_g.value <= singles.value, ErrorCode::inconsistent_rates,
          "pair generation rate exceeds singles generation rate (h_p > 1)");
  return r_g.value / singles.value;
}

/// SBR = max g2 - 1 for a curve whose background level is normalized to 1.
inline double sbr_from_g2(const G2Curve& curve) {
  require(curve.background_counts_per_bin > 0.0 &&
              std::isfinite(curve.background_counts_per_bin),
          ErrorCode::missing_background,
          "g2 curve is not normalized to a background level");
  require(!curve.g2.empty(), ErrorCode::missing_background, "g2 curve is empty");
  return *std::max_element(curve.g2.begin(), curve.g2.end()) - 1.0;
}

struct GeneratedRates {
  Rate fiber; ///< referred to the collection fibers
  Rate cell;  ///< right after the vapor cell
};

/// Divides a (saturation-corrected) detected pair rate by D_s D_p.
inline GeneratedRates detected_to_generated(Rate r_d, const DetectionChain& chain) {
  chain.validate();
  const double fiber = r_d.value / (chain.d_s * chain.d_p);
  return {Rate{fiber, r_d.calibrated},
          Rate{chain.fiber_factor * fiber, r_d.calibrated}};
}

/// Generation rate per MHz of linewidth; delta_omega_mhz is Delta omega / 2pi.
inline Rate spectral_brightness(Rate r_g, double delta_omega_mhz) {
  require(std::isfinite(delta_omega_mhz) && delta_omega_mhz > 0.0,
          ErrorCode::invalid_parameter, "linewidth must be > 0");
  require(r_g.value >= 0.0, ErrorCode::invalid_parameter, "rate must be >= 0");
  return Rate{r_g.value / delta_omega_mhz, r_g.calibrated};
}

struct BiphotonObservables {
  Rate r_g;
  double tau_w_ns = 0.0;
  double delta_omega_mhz = 0.0; ///< Delta omega / 2pi
  std::optional<double> sbr;
  std::optional<double> h_p;
  Rate sb;
  bool calibrated = false;
};

/// tau_w, Delta omega, R_g and SB of a modelled biphoton.
inline BiphotonObservables model_observables(const SpectralAmplitude& sa,
                                             const WavePacket& wp,
                                             std::optional<double> scale = std::nullopt) {
  BiphotonObservables o;
  o.r_g = generation_rate(wp, scale);
  o.calibrated = o.r_g.calibrated;
  o.tau_w_ns = fwhm(wp.tau_ns(), wp.g2);
  const auto spectrum = biphoton_spectrum(sa);
  std::vector<double> f_mhz(spectrum.size());
  for (std::size_t k = 0; k < f_mhz.size(); ++k)
    f_mhz[k] = units::to_mhz(sa.grid.value(k));
  o.delta_omega_mhz = fwhm(f_mhz, spectrum);
  o.sb = spectral_brightness(o.r_g, o.delta_omega_mhz);
  return o;
}

/// One line of a `name,value,units,calibrated` report.
struct ReportRow {
  std::string name;
  double value = 0.0;
  std::string units;
  bool calibrated = false;
};

inline std::vector<ReportRow> report_rows(const BiphotonObservables& o) {
  const std::string rate_units = o.calibrated ? "1/s" : "arb";
  const std::string sb_units = o.calibrated ? "1/s/MHz" : "arb/MHz";
  std::vector<ReportRow> rows{
      {"r_g", o.r_g.value, rate_units, o.r_g.calibrated},
      {"tau_w", o.tau_w_ns, "ns", o.calibrated},
      {"delta_omega", o.delta_omega_mhz, "MHz", o.calibrated},
      {"sb", o.sb.value, sb_units, o.sb.calibrated},
  };
  if (o.sbr) rows.push_back({"sbr", *o.sbr, "1", o.calibrated});
  if (o.h_p) rows.push_back({"h_p", *o.h_p, "1", o.calibrated});
  return rows;
}

inline void write_report(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << "name,value,units,calibrated\n";
  for (const auto& r : rows)
    os << r.name << ',' << format_double(r.value) << ',' << r.units << ','
       << (r.calibrated ? "true" : "false") << '\n';
}

} // namespace biphoton
