#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biphoton {

/// Machine-readable error codes. The CLI prints the code name and maps the
/// category to its exit status.
enum class ErrorCode {
  invalid_parameter,
  convergence,
  grid_overflow,
  non_finite,
  empty_spectrum,
  extraction,
  inconsistent_rates,
  uncorrected_rates,
  missing_background,
  parse,
  background_window,
  no_wavepacket,
  residual,
  series_too_short,
  config_missing_key,
  config_unknown_key,
  config_bad_value,
  config_sweep_too_short,
  usage,
  io,
};

enum class ErrorCategory { usage = 2, data = 3, numerical = 4 };

constexpr std::string_view code_name(ErrorCode c) {
  switch (c) {
  case ErrorCode::invalid_parameter: return "INVALID_PARAMETER";
  case ErrorCode::convergence: return "CONVERGENCE";
  case ErrorCode::grid_overflow: return "GRID_OVERFLOW";
  case ErrorCode::non_finite: return "NON_FINITE";
  case ErrorCode::empty_spectrum: return "EMPTY_SPECTRUM";
  case ErrorCode::extraction: return "EXTRACTION";
  case ErrorCode::inconsistent_rates: return "INCONSISTENT_RATES";
  case ErrorCode::uncorrected_rates: return "UNCORRECTED_RATES";
  case ErrorCode::missing_background: return "MISSING_BACKGROUND";
  case ErrorCode::parse: return "PARSE_ERROR";
  case ErrorCode::background_window: return "BACKGROUND_WINDOW";
  case ErrorCode::no_wavepacket: return "NO_WAVEPACKET";
  case ErrorCode::residual: return "RESIDUAL";
  case ErrorCode::series_too_short: return "SERIES_TOO_SHORT";
  case ErrorCode::config_missing_key: return "CONFIG_MISSING_KEY";
  case ErrorCode::config_unknown_key: return "CONFIG_UNKNOWN_KEY";
  case ErrorCode::config_bad_value: return "CONFIG_BAD_VALUE";
  case ErrorCode::config_sweep_too_short: return "CONFIG_SWEEP_TOO_SHORT";
  case ErrorCode::usage: return "USAGE";
  case ErrorCode::io: return "IO_ERROR";
  }
  return "UNKNOWN";
}

constexpr ErrorCategory category_of(ErrorCode c) {
  switch (c) {
  case ErrorCode::convergence:
  case ErrorCode::grid_overflow:
  case ErrorCode::non_finite:
  case ErrorCode::empty_spectrum:
  case ErrorCode::extraction:
  case ErrorCode::residual:
    return ErrorCategory::numerical;
  case ErrorCode::parse:
  case ErrorCode::background_window:
  case ErrorCode::no_wavepacket:
  case ErrorCode::inconsistent_rates:
  case ErrorCode::missing_background:
  case ErrorCode::io:
    return ErrorCategory::data;
  default:
    return ErrorCategory::usage;
  }
}

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Raised by adaptive quadrature when the panel budget runs out.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double achieved)
      : Error(ErrorCode::convergence, what), achieved_(achieved) {}

  /// Relative error estimate reached before giving up.
  double achieved_tolerance() const noexcept { return achieved_; }

private:
  double achieved_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

} // namespace biphoton
