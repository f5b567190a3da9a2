#pragma once

// Numerical Doppler averaging: integral of
//   exp(-w^2/gd^2) / (sqrt(pi) gd) * f(w)
// over w in [-h gd, h gd]. Two independent routes: a dense trapezoid rule and a
// globally adaptive Gauss-Kronrod (10/21) panel scheme. Both sum in a fixed
// order so results are reproducible.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <limits>
#include <queue>
#include <tuple>
#include <string>
#include <vector>

#include "error.hpp"
#include "params.hpp"

namespace biphoton {

using cplx = std::complex<double>;

namespace detail {

// QUADPACK qk21 abscissae and weights on [-1, 1]; xgk[1,3,..,9] are the
// 10-point Gauss nodes.
inline constexpr std::array<double, 11> gk21_x = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> gk21_wk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208369953611, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> g10_w = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Panel {
  double a = 0.0;
  double b = 0.0;
  cplx value;
  double error = 0.0;
  std::size_t order = 0; // creation index; breaks ties deterministically
};

struct PanelLess {
  bool operator()(const Panel& l, const Panel& r) const {
    if (l.error != r.error) return l.error < r.error;
    return l.order > r.order;
  }
};

} // namespace detail

/// Gauss-Kronrod 21-point rule on [a, b]. Returns the Kronrod value and stores
/// |K21 - G10| in err.
template <class F>
cplx gauss_kronrod21(F&& f, double a, double b, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const cplx fc = f(c);
  cplx kron = fc * detail::gk21_wk[10];
  cplx gauss{0.0, 0.0};
  for (std::size_t j = 0; j < 10; ++j) {
    const double dx = h * detail::gk21_x[j];
    const cplx s = f(c - dx) + f(c + dx);
    kron += s * detail::gk21_wk[j];
    if (j % 2 == 1) gauss += s * detail::g10_w[j / 2];
  }
  err = std::abs((kron - gauss) * h);
  return kron * h;
}

/// Globally adaptive integration of f on [a, b] to relative tolerance rel_tol.
/// Starts from `initial_panels` equal panels and keeps bisecting the panel
/// with the largest error estimate. Throws ConvergenceError when the number
/// of panels exceeds `budget`. An error estimate already at the rounding level
/// of sum |panel| also counts as converged, so integrals that cancel to ~0
/// terminate.
template <class F>
cplx integrate_adaptive(F&& f, double a, double b, double rel_tol,
                        std::size_t budget, std::size_t initial_panels = 64) {
  std::priority_queue<detail::Panel, std::vector<detail::Panel>,
                      detail::PanelLess>
      heap;
  std::size_t order = 0;
  const double width = (b - a) / static_cast<double>(initial_panels);
  for (std::size_t i = 0; i < initial_panels; ++i) {
    detail::Panel p;
    p.a = a + width * static_cast<double>(i);
    p.b = (i + 1 == initial_panels) ? b : a + width * static_cast<double>(i + 1);
    p.value = gauss_kronrod21(f, p.a, p.b, p.error);
    p.order = order++;
    heap.push(p);
  }

  auto totals = [&heap]() {
    // copy out and sum in creation order for a deterministic result
    std::vector<detail::Panel> all;
    auto copy = heap;
    while (!copy.empty()) {
      all.push_back(copy.top());
      copy.pop();
    }
    std::sort(all.begin(), all.end(),
              [](const auto& l, const auto& r) { return l.order < r.order; });
    cplx v{0.0, 0.0};
    double e = 0.0, m = 0.0;
    for (const auto& p : all) {
      v += p.value;
      e += p.error;
      m += std::abs(p.value);
    }
    return std::tuple{v, e, m};
  };

  // running sums only steer refinement; the result is re-summed at the end
  cplx value{0.0, 0.0};
  double error = 0.0, mass = 0.0;
  {
    auto [v, e, m] = totals();
    value = v;
    error = e;
    mass = m;
  }
  constexpr double roundoff = 64.0 * std::numeric_limits<double>::epsilon();
  while (error > rel_tol * std::abs(value) && error > roundoff * mass && error > 1e-300) {
    if (heap.size() >= budget) {
      const double achieved = std::abs(value) > 0 ? error / std::abs(value) : error;
      throw ConvergenceError("adaptive quadrature exceeded panel budget of " +
                                 std::to_string(budget) +
                                 " (achieved relative error " +
                                 std::to_string(achieved) + ")",
                             achieved);
    }
    const detail::Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    detail::Panel left{worst.a, mid, {}, 0.0, order++};
    detail::Panel right{mid, worst.b, {}, 0.0, order++};
    left.value = gauss_kronrod21(f, left.a, left.b, left.error);
    right.value = gauss_kronrod21(f, right.a, right.b, right.error);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    mass += std::abs(left.value) + std::abs(right.value) - std::abs(worst.value);
    heap.push(left);
    heap.push(right);
  }
  return std::get<0>(totals());
}

/// Normalized Gaussian Doppler weight.
inline double doppler_weight(double omega_d, double gamma_doppler) {
  constexpr double inv_sqrt_pi = 0.56418958354775628695;
  const double x = omega_d / gamma_doppler;
  return std::exp(-x * x) * inv_sqrt_pi / gamma_doppler;
}

/// Doppler average of a complex integrand by the numerical route selected in
/// `quad`. There is no closed form for an arbitrary integrand, so the
/// faddeeva_analytic method is served by the adaptive route.
template <class F>
cplx doppler_average(F&& integrand, const SystemParams& params,
                     const QuadratureSpec& quad) {
  params.validate();
  quad.validate();
  const double gd = params.gamma_doppler;
  const double half = quad.support_halfwidth * gd;
  auto weighted = [&](double w) -> cplx {
    return doppler_weight(w, gd) * cplx(integrand(w));
  };

  if (quad.method == QuadratureMethod::dense_trapezoid) {
    const std::size_t n = quad.trapezoid_points;
    const double h = 2.0 * half / static_cast<double>(n - 1);
    cplx sum = 0.5 * (weighted(-half) + weighted(half));
    for (std::size_t i = 1; i + 1 < n; ++i)
      sum += weighted(-half + h * static_cast<double>(i));
    return sum * h;
  }
  // 256 starting panels are ~3 gamma wide at the default Doppler width, so
  // a natural-width Lorentzian is always seen by at least one panel
  return integrate_adaptive(weighted, -half, half, quad.panel_tolerance,
                            quad.panel_budget, 256);
}

} // namespace biphoton
