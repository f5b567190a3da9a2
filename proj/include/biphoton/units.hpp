#pragma once

// Unit conventions. Inside the library every angular frequency is measured in
// units of the excited-state decay rate Gamma and every time in units of
// 1/Gamma. Gamma/2pi is fixed at 6 MHz; only the converters below know that.

#include <numbers>

namespace biphoton::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Gamma / 2pi in MHz.
inline constexpr double gamma_mhz = 6.0;

constexpr double from_mhz(double f_mhz) { return f_mhz / gamma_mhz; }
constexpr double to_mhz(double w_gamma) { return w_gamma * gamma_mhz; }
constexpr double from_ghz(double f_ghz) { return f_ghz * 1000.0 / gamma_mhz; }
constexpr double to_ghz(double w_gamma) { return w_gamma * gamma_mhz / 1000.0; }

// 1/Gamma = 1 / (2pi * 6 MHz) = 26.5258... ns
inline constexpr double ns_per_inverse_gamma = 1000.0 / (two_pi * gamma_mhz);

constexpr double from_ns(double t_ns) { return t_ns / ns_per_inverse_gamma; }
constexpr double to_ns(double t_gamma) { return t_gamma * ns_per_inverse_gamma; }

} // namespace biphoton::units
