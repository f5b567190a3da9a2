#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "error.hpp"
#include "format.hpp"
#include "units.hpp"

namespace biphoton {

/// Physical constants and knobs of the impurity-atom biphoton model.
///
/// Every frequency is stored in units of Gamma, so gamma_natural is 1 for any
/// record built through the user-unit helpers. Signed detunings are allowed.
struct SystemParams {
  double alpha = 500.0;         ///< optical depth
  double b = 0.0;               ///< impurity fraction, [0, 1]
  double gamma_natural = 1.0;   ///< excited-state decay rate
  double gamma_doppler = 54.0;  ///< Doppler e^-1 half-width
  double gamma_etalon = 8.9;    ///< effective etalon width
  double omega_p = 1.0;         ///< pump Rabi frequency
  double omega_c = 11.4;        ///< coupling Rabi frequency
  double delta_p = units::from_ghz(1.9);
  double delta_c = 0.0;
  double gamma_dec = 0.013;     ///< ground-state decoherence rate

  void validate() const {
    auto check = [](bool ok, std::string_view what) {
      require(ok, ErrorCode::invalid_parameter,
              "invalid system parameter: " + std::string(what));
    };
    check(std::isfinite(alpha) && alpha > 0.0, "alpha must be > 0");
    check(std::isfinite(b) && b >= 0.0 && b <= 1.0, "b must lie in [0, 1]");
    check(std::isfinite(gamma_natural) && gamma_natural > 0.0,
          "gamma_natural must be > 0");
    check(std::isfinite(gamma_doppler) && gamma_doppler > 0.0,
          "gamma_doppler must be > 0");
    check(std::isfinite(gamma_etalon) && gamma_etalon > 0.0,
          "gamma_etalon must be > 0");
    check(std::isfinite(gamma_dec) && gamma_dec >= 0.0,
          "gamma_dec must be >= 0");
    check(std::isfinite(omega_p), "omega_p must be finite");
    check(std::isfinite(omega_c), "omega_c must be finite");
    check(std::isfinite(delta_p), "delta_p must be finite");
    check(std::isfinite(delta_c), "delta_c must be finite");
  }
};

/// Parameters in laboratory units. Rabi frequencies are given in units of
/// Gamma because that is how they are quoted; everything else is MHz or GHz.
struct UserParams {
  double alpha = 500.0;
  double b = 0.0;
  double gamma_doppler_mhz = 324.0;
  double gamma_etalon_mhz = 53.4;
  double omega_p_gamma = 1.0;
  double omega_c_gamma = 11.4;
  double delta_p_ghz = 1.9;
  double delta_c_ghz = 0.0;
  double gamma_dec_mhz = 0.078;
};

inline SystemParams from_user_units(const UserParams& u) {
  SystemParams p;
  p.alpha = u.alpha;
  p.b = u.b;
  p.gamma_natural = 1.0;
  p.gamma_doppler = units::from_mhz(u.gamma_doppler_mhz);
  p.gamma_etalon = units::from_mhz(u.gamma_etalon_mhz);
  p.omega_p = u.omega_p_gamma;
  p.omega_c = u.omega_c_gamma;
  p.delta_p = units::from_ghz(u.delta_p_ghz);
  p.delta_c = units::from_ghz(u.delta_c_ghz);
  p.gamma_dec = units::from_mhz(u.gamma_dec_mhz);
  p.validate();
  return p;
}

inline UserParams to_user_units(const SystemParams& p) {
  UserParams u;
  u.alpha = p.alpha;
  u.b = p.b;
  u.gamma_doppler_mhz = units::to_mhz(p.gamma_doppler);
  u.gamma_etalon_mhz = units::to_mhz(p.gamma_etalon);
  u.omega_p_gamma = p.omega_p;
  u.omega_c_gamma = p.omega_c;
  u.delta_p_ghz = units::to_ghz(p.delta_p);
  u.delta_c_ghz = units::to_ghz(p.delta_c);
  u.gamma_dec_mhz = units::to_mhz(p.gamma_dec);
  return u;
}

namespace presets {

// Fitted parameter sets for the 15 mW and 30 mW coupling-power detuning scans
// (OD 500, pump detuning 1.9 GHz). Omega_p is arbitrary: it only scales rates.
inline SystemParams coupling_15mw(double delta_c_ghz = 0.0) {
  SystemParams p;
  p.b = 0.375;
  p.omega_c = 11.4;
  p.gamma_dec = 0.013;
  p.delta_c = units::from_ghz(delta_c_ghz);
  return p;
}

inline SystemParams coupling_30mw(double delta_c_ghz = 0.0) {
  SystemParams p;
  p.b = 0.315;
  p.omega_c = 16.6;
  p.gamma_dec = 0.010;
  p.delta_c = units::from_ghz(delta_c_ghz);
  return p;
}

} // namespace presets

enum class QuadratureMethod { faddeeva_analytic, adaptive_panels, dense_trapezoid };

inline std::string_view method_name(QuadratureMethod m) {
  switch (m) {
  case QuadratureMethod::faddeeva_analytic: return "faddeeva_analytic";
  case QuadratureMethod::adaptive_panels: return "adaptive_panels";
  case QuadratureMethod::dense_trapezoid: return "dense_trapezoid";
  }
  return "?";
}

inline QuadratureMethod parse_method(std::string_view s) {
  s = trim(s);
  if (s == "faddeeva_analytic") return QuadratureMethod::faddeeva_analytic;
  if (s == "adaptive_panels") return QuadratureMethod::adaptive_panels;
  if (s == "dense_trapezoid") return QuadratureMethod::dense_trapezoid;
  fail(ErrorCode::config_bad_value,
       "unknown quadrature method '" + std::string(s) + "'");
}

/// How Doppler integrals are evaluated.
struct QuadratureSpec {
  QuadratureMethod method = QuadratureMethod::faddeeva_analytic;
  double panel_tolerance = 1e-10;   ///< relative, adaptive path
  std::size_t trapezoid_points = 1'000'000;
  double support_halfwidth = 8.0;   ///< in units of gamma_doppler
  std::size_t panel_budget = 20000; ///< adaptive path gives up beyond this

  void validate() const {
    require(panel_tolerance > 0.0, ErrorCode::invalid_parameter,
            "panel_tolerance must be > 0");
    require(trapezoid_points >= 1000, ErrorCode::invalid_parameter,
            "trapezoid_points must be >= 1000");
    require(support_halfwidth >= 6.0, ErrorCode::invalid_parameter,
            "support_halfwidth must be >= 6");
    require(panel_budget >= 1, ErrorCode::invalid_parameter,
            "panel_budget must be >= 1");
  }

  static QuadratureSpec dense(std::size_t points = 1'000'000) {
    QuadratureSpec q;
    q.method = QuadratureMethod::dense_trapezoid;
    q.trapezoid_points = points;
    return q;
  }

  static QuadratureSpec adaptive(double tol = 1e-10) {
    QuadratureSpec q;
    q.method = QuadratureMethod::adaptive_panels;
    q.panel_tolerance = tol;
    return q;
  }
};

} // namespace biphoton
