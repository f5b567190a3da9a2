#pragma once

// Measured-histogram chain: background -> g2 -> SBR, R_d -> R_g -> h_p.

#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "ingest.hpp"
#include "observables.hpp"

namespace biphoton {

struct AnalyzeOptions {
  std::optional<TauWindow> background_window; ///< default: trailing 25%
  SupportRule support;
  bool absolute_rates = true;
};

struct HistogramAnalysis {
  BackgroundEstimate background;
  G2Curve g2;
  double sbr = 0.0;
  std::optional<PairRate> detected;   ///< empty when no wave packet was found
  std::optional<GeneratedRates> generated;
  std::optional<double> h_p;
  std::vector<std::string> warnings;  ///< machine-readable codes
};

/// Saturation correction happens upstream; absolute rates from uncorrected
/// data are refused.
inline void require_saturation_corrected(const CoincidenceHistogram& h, bool absolute) {
  require(!absolute || h.saturation_corrected, ErrorCode::uncorrected_rates,
          "histogram is not saturation-corrected; absolute rates refused "
          "(set saturation_corrected = true after correcting, or request "
          "arbitrary units)");
}

inline HistogramAnalysis analyze_histogram(const CoincidenceHistogram& h,
                                           const AnalyzeOptions& opt = {}) {
  h.validate();
  require_saturation_corrected(h, opt.absolute_rates);
  HistogramAnalysis a;
  a.background = estimate_background(h, opt.background_window.value_or(default_background_window(h)));
  a.g2 = to_g2(h, a.background.mean);
  a.sbr = sbr_from_g2(a.g2);
  try {
    a.detected = detected_pair_rate(h, a.background, opt.support);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::no_wavepacket) throw;
    a.warnings.emplace_back("NO_WAVEPACKET");
    return a;
  }
  Rate r_d = a.detected->rate;
  r_d.calibrated = opt.absolute_rates;
  a.generated = detected_to_generated(r_d, h.chain);
  if (h.singles_signal_per_s > 0.0) {
    // detected signal singles / D_s = generated heralding photons
    const Rate singles{h.singles_signal_per_s / h.chain.d_s, r_d.calibrated};
    a.h_p = heralding_probability(a.generated->fiber, singles);
  }
  return a;
}

inline std::vector<ReportRow> report_rows(const HistogramAnalysis& a) {
  const bool cal = a.generated ? a.generated->fiber.calibrated : false;
  const std::string rate_units = cal ? "1/s" : "arb";
  std::vector<ReportRow> rows{
      {"background_per_bin", a.background.mean, "counts", true},
      {"background_std_error", a.background.std_error, "counts", true},
      {"sbr", a.sbr, "1", true},
  };
  rows.push_back({"r_d", a.detected ? a.detected->rate.value : 0.0, rate_units, cal});
  if (a.generated) {
    rows.push_back({"r_g_fiber", a.generated->fiber.value, rate_units, cal});
    rows.push_back({"r_g_cell", a.generated->cell.value, rate_units, cal});
  }
  if (a.h_p) rows.push_back({"h_p", *a.h_p, "1", cal});
  return rows;
}

} // namespace biphoton
