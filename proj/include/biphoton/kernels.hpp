#pragma once

// Doppler-averaged response functions of the double-Lambda medium:
//
//   kappa(d) = (1-b) a/4 <Op/(Dp + w + iG/2) * Oc G/(Oc^2 - 4(d+ig)(d+Dc+w+iG/2))>
//   rho_c(d) = (1-b) a/2 <(d+ig) G/(Oc^2 - 4(d+ig)(d+Dc+w+iG/2))>
//   rho_m(d) = -b a/2    <G/(4(d+Dc+w+iG/2))>
//
// where <.> is the normalized Gaussian average over the Doppler shift w.
// rho_m is the impurity (two-level) absorber; it equals the Oc -> 0 limit of
// rho_c with the (1-b) population replaced by b, so Im rho_m > 0.
//
// Every denominator is linear in w, so each average reduces to one or two
// evaluations of the Gaussian Cauchy integral (a Faddeeva function).

#include <cmath>
#include <complex>
#include <string>

#include "error.hpp"
#include "faddeeva.hpp"
#include "params.hpp"
#include "quadrature.hpp"

namespace biphoton {

using ComplexResponse = std::complex<double>;

struct KernelValues {
  ComplexResponse kappa;
  ComplexResponse rho_c;
  ComplexResponse rho_m;
};

namespace detail {

inline ComplexResponse checked(ComplexResponse v, const char* what) {
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
    fail(ErrorCode::non_finite, std::string(what) + " evaluated to a non-finite value");
  return v;
}

} // namespace detail

/// Analytic evaluator for one parameter set. Precomputes the delta-independent
/// pump-pole average so that a spectral scan costs two Faddeeva calls per point.
class KernelModel {
public:
  explicit KernelModel(const SystemParams& params) : p_(params) {
    p_.validate();
    pump_pole_ = cplx{-p_.delta_p, -0.5 * p_.gamma_natural};
    pump_avg_ = faddeeva::doppler_pole_average(pump_pole_, p_.gamma_doppler);
  }

  const SystemParams& params() const { return p_; }

  ComplexResponse rho_m(double delta) const {
    if (p_.b == 0.0) return {0.0, 0.0};
    const cplx pole = -one_photon(delta);
    const cplx avg = faddeeva::doppler_pole_average(pole, p_.gamma_doppler);
    return detail::checked(-0.125 * p_.b * p_.alpha * p_.gamma_natural * avg,
                           "rho_m_bar");
  }

  ComplexResponse rho_c(double delta) const {
    if (p_.b == 1.0) return {0.0, 0.0};
    cplx pole;
    if (!coupling_pole(delta, pole)) return {0.0, 0.0};
    const cplx avg = faddeeva::doppler_pole_average(pole, p_.gamma_doppler);
    return detail::checked(
        -0.125 * (1.0 - p_.b) * p_.alpha * p_.gamma_natural * avg, "rho_c_bar");
  }

  ComplexResponse kappa(double delta) const {
    if (p_.b == 1.0 || p_.omega_p == 0.0 || p_.omega_c == 0.0) return {0.0, 0.0};
    cplx pole;
    const bool has_pole = coupling_pole(delta, pole);
    const cplx avg = has_pole
                         ? faddeeva::doppler_pole_average(pole, p_.gamma_doppler)
                         : cplx{};
    return kappa_from(delta, has_pole, pole, avg);
  }

  KernelValues all(double delta) const {
    KernelValues v;
    v.rho_m = rho_m(delta);
    if (p_.b == 1.0) return v;
    cplx pole;
    const bool has_pole = coupling_pole(delta, pole);
    const cplx avg = has_pole
                         ? faddeeva::doppler_pole_average(pole, p_.gamma_doppler)
                         : cplx{};
    if (has_pole)
      v.rho_c = detail::checked(
          -0.125 * (1.0 - p_.b) * p_.alpha * p_.gamma_natural * avg, "rho_c_bar");
    if (p_.omega_p != 0.0 && p_.omega_c != 0.0)
      v.kappa = kappa_from(delta, has_pole, pole, avg);
    return v;
  }

private:
  cplx one_photon(double delta) const {
    return {delta + p_.delta_c, 0.5 * p_.gamma_natural};
  }

  // Oc^2 - 4q(w + a) = -4q (w - pole) with pole = Oc^2/(4q) - a. Returns false
  // when q = 0 and Oc != 0, where the coupling factor has no w dependence.
  bool coupling_pole(double delta, cplx& pole) const {
    const cplx q{delta, p_.gamma_dec};
    const cplx a = one_photon(delta);
    if (p_.omega_c == 0.0) {
      pole = -a;
      return true;
    }
    if (q == cplx{0.0, 0.0}) return false;
    pole = p_.omega_c * p_.omega_c / (4.0 * q) - a;
    return true;
  }

  ComplexResponse kappa_from(double delta, bool has_pole, cplx pole,
                             cplx pole_avg) const {
    const double pref = 0.25 * (1.0 - p_.b) * p_.alpha * p_.omega_p *
                        p_.omega_c * p_.gamma_natural;
    if (!has_pole) // q = 0: coupling factor is the constant 1/Oc^2
      return detail::checked(pref / (p_.omega_c * p_.omega_c) * pump_avg_,
                             "kappa_bar");
    const cplx q{delta, p_.gamma_dec};
    const cplx gap = pump_pole_ - pole;
    if (std::abs(gap) < 1e-6 * std::max(1.0, std::abs(pump_pole_)))
      return coincident_fallback(delta);
    // 1/((w-p1)(w-p2)) = (1/(w-p1) - 1/(w-p2)) / (p1 - p2)
    const cplx avg = (pump_avg_ - pole_avg) / gap;
    return detail::checked(pref * (-1.0 / (4.0 * q)) * avg, "kappa_bar");
  }

  ComplexResponse coincident_fallback(double delta) const;

  SystemParams p_;
  cplx pump_pole_;
  cplx pump_avg_;
};

/// Literal integrands of the three averages, used by the quadrature routes.
namespace integrands {

inline auto rho_m(double delta, const SystemParams& p) {
  return [delta, p](double w) -> cplx {
    return -0.5 * p.b * p.alpha * p.gamma_natural /
           (4.0 * cplx{delta + p.delta_c + w, 0.5 * p.gamma_natural});
  };
}

inline auto rho_c(double delta, const SystemParams& p) {
  return [delta, p](double w) -> cplx {
    const cplx q{delta, p.gamma_dec};
    const cplx a{delta + p.delta_c + w, 0.5 * p.gamma_natural};
    const double pref = 0.5 * (1.0 - p.b) * p.alpha;
    if (p.omega_c == 0.0) return pref * (-p.gamma_natural / (4.0 * a));
    return pref * q * p.gamma_natural / (p.omega_c * p.omega_c - 4.0 * q * a);
  };
}

inline auto kappa(double delta, const SystemParams& p) {
  return [delta, p](double w) -> cplx {
    const cplx q{delta, p.gamma_dec};
    const cplx a{delta + p.delta_c + w, 0.5 * p.gamma_natural};
    const cplx pump{p.delta_p + w, 0.5 * p.gamma_natural};
    return 0.25 * (1.0 - p.b) * p.alpha * p.omega_p / pump * p.omega_c *
           p.gamma_natural / (p.omega_c * p.omega_c - 4.0 * q * a);
  };
}

} // namespace integrands

inline ComplexResponse KernelModel::coincident_fallback(double delta) const {
  return detail::checked(
      doppler_average(integrands::kappa(delta, p_), p_, QuadratureSpec::adaptive(1e-12)),
      "kappa_bar");
}

inline ComplexResponse rho_m_bar(double delta, const SystemParams& params,
                                 const QuadratureSpec& quad = {}) {
  require(std::isfinite(delta), ErrorCode::invalid_parameter, "delta must be finite");
  if (quad.method == QuadratureMethod::faddeeva_analytic)
    return KernelModel(params).rho_m(delta);
  return doppler_average(integrands::rho_m(delta, params), params, quad);
}

inline ComplexResponse rho_c_bar(double delta, const SystemParams& params,
                                 const QuadratureSpec& quad = {}) {
  require(std::isfinite(delta), ErrorCode::invalid_parameter, "delta must be finite");
  if (quad.method == QuadratureMethod::faddeeva_analytic)
    return KernelModel(params).rho_c(delta);
  return doppler_average(integrands::rho_c(delta, params), params, quad);
}

inline ComplexResponse kappa_bar(double delta, const SystemParams& params,
                                 const QuadratureSpec& quad = {}) {
  require(std::isfinite(delta), ErrorCode::invalid_parameter, "delta must be finite");
  if (quad.method == QuadratureMethod::faddeeva_analytic)
    return KernelModel(params).kappa(delta);
  return doppler_average(integrands::kappa(delta, params), params, quad);
}

/// Combined signal/probe etalon transmission, a squared Lorentzian.
inline double etalon_response(double delta, double gamma_etalon) {
  require(std::isfinite(gamma_etalon) && gamma_etalon > 0.0,
          ErrorCode::invalid_parameter, "gamma_etalon must be > 0");
  const double x = 2.0 * delta / gamma_etalon;
  const double l = 1.0 / (1.0 + x * x);
  return l * l;
}

/// Below this modulus sinc is evaluated from its Taylor series.
inline constexpr double sinc_series_threshold = 1e-3;

/// sin(z)/z with the removable singularity filled in.
inline cplx complex_sinc(cplx z) {
  if (std::abs(z) < sinc_series_threshold) {
    // truncation error ~ |z|^8 / 9! < 3e-30
    const cplx z2 = z * z;
    return 1.0 - z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0));
  }
  return std::sin(z) / z;
}

} // namespace biphoton
