#pragma once

// Small value types shared by ingest and observables.

#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"

namespace biphoton {

/// A rate in pairs/s when calibrated, otherwise arbitrary units.
struct Rate {
  double value = 0.0;
  bool calibrated = false;
};

/// Overall detection efficiencies and the fiber-to-cell conversion factor.
struct DetectionChain {
  double d_s = 0.13;
  double d_p = 0.094;
  double fiber_factor = 1.9;

  void validate() const {
    require(d_s > 0.0 && d_s <= 1.0, ErrorCode::invalid_parameter,
            "d_s must lie in (0, 1]");
    require(d_p > 0.0 && d_p <= 1.0, ErrorCode::invalid_parameter,
            "d_p must lie in (0, 1]");
    require(std::isfinite(fiber_factor) && fiber_factor >= 1.0,
            ErrorCode::invalid_parameter, "fiber_factor must be >= 1");
  }
};

/// Background-normalized signal/probe cross-correlation.
struct G2Curve {
  std::vector<double> tau_ns;
  std::vector<double> g2;
  double background_counts_per_bin = 0.0; ///< 0 means not normalized
};

} // namespace biphoton
