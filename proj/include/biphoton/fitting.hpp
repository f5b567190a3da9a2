#pragma once

// Simultaneous fit of (b, Omega_c, gamma, scale) to measured R_g and tau_w
// versus coupling detuning. R_g predictions are scale * integral G2 dtau;
// tau_w predictions do not depend on scale.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "format.hpp"
#include "observables.hpp"
#include "params.hpp"
#include "units.hpp"
#include "wavepacket.hpp"

namespace biphoton {

/// Free parameters. omega_c and gamma_dec are in units of Gamma.
struct Theta {
  double b = 0.3;
  double omega_c = 11.4;
  double gamma_dec = 0.01;
  double scale = 1.0;

  static constexpr std::size_t size = 4;

  std::array<double, size> to_array() const { return {b, omega_c, gamma_dec, scale}; }
  static Theta from_array(const std::array<double, size>& a) {
    return Theta{a[0], a[1], a[2], a[3]};
  }

  void validate() const {
    require(std::isfinite(b) && b >= 0.0 && b <= 1.0, ErrorCode::invalid_parameter,
            "theta: b must lie in [0, 1]");
    require(std::isfinite(omega_c) && omega_c > 0.0, ErrorCode::invalid_parameter,
            "theta: omega_c must be > 0");
    require(std::isfinite(gamma_dec) && gamma_dec >= 0.0, ErrorCode::invalid_parameter,
            "theta: gamma_dec must be >= 0");
    require(std::isfinite(scale) && scale > 0.0, ErrorCode::invalid_parameter,
            "theta: scale must be > 0");
  }
};

struct SeriesPoint {
  double delta_c_ghz = 0.0;
  double r_g = 0.0;
  double r_g_err = 0.0;
  double tau_w_ns = 0.0;
  double tau_w_err = 0.0;
};

/// Measured (R_g, tau_w) versus coupling detuning at one power setting.
/// `fixed` supplies alpha, Gamma_D, Gamma_e, Delta_p and Omega_p; its b,
/// omega_c, gamma_dec and delta_c are overwritten during evaluation.
struct DetuningSeries {
  std::vector<SeriesPoint> points;
  SystemParams fixed;
  std::string label;

  static constexpr std::size_t min_points = 4;

  void validate() const {
    require(points.size() >= min_points, ErrorCode::series_too_short,
            "series '" + label + "' has " + std::to_string(points.size()) +
                " points; at least 4 are required");
    std::set<double> seen;
    for (const auto& p : points) {
      require(p.r_g_err > 0.0 && p.tau_w_err > 0.0, ErrorCode::invalid_parameter,
              "series '" + label + "': error bars must be > 0");
      require(seen.insert(p.delta_c_ghz).second, ErrorCode::invalid_parameter,
              "series '" + label + "': duplicate detuning " + format_double(p.delta_c_ghz));
    }
    fixed.validate();
  }
};

/// Unscaled model output at one detuning.
struct PointPrediction {
  double r_g_unscaled = 0.0; ///< integral of G2 over tau (1/Gamma units)
  double tau_w_ns = 0.0;
};

/// Runs kernels -> wave packet -> observables for one parameter set.
inline PointPrediction predict_point(const SystemParams& p) {
  const auto sa = sample_spectral_amplitude(p);
  const auto wp = wave_packet(sa);
  return {generation_rate(wp).value, fwhm(wp.tau_ns(), wp.g2)};
}

inline SystemParams with_theta(SystemParams p, const Theta& t, double delta_c_ghz) {
  p.b = t.b;
  p.omega_c = t.omega_c;
  p.gamma_dec = t.gamma_dec;
  p.delta_c = units::from_ghz(delta_c_ghz);
  return p;
}

/// Memoizing forward model keyed on the physics parameters, so Jacobian
/// columns for `scale` and repeated points reuse pipeline runs.
class ForwardModel {
public:
  PointPrediction operator()(const SystemParams& p) {
    const Key key{p.alpha, p.b, p.gamma_natural, p.gamma_doppler, p.gamma_etalon,
                  p.omega_p, p.omega_c, p.delta_p, p.delta_c, p.gamma_dec};
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const auto pred = predict_point(p);
    std::lock_guard lock(mutex_);
    ++runs_;
    cache_.emplace(key, pred);
    return pred;
  }

  std::size_t pipeline_runs() const {
    std::lock_guard lock(mutex_);
    return runs_;
  }

private:
  using Key = std::array<double, 10>;
  mutable std::mutex mutex_;
  std::map<Key, PointPrediction> cache_;
  std::size_t runs_ = 0;
};

inline std::vector<PointPrediction> predict_series(const Theta& theta,
                                                   const DetuningSeries& series,
                                                   ForwardModel& model) {
  std::vector<PointPrediction> out;
  out.reserve(series.points.size());
  for (const auto& pt : series.points) {
    try {
      out.push_back(model(with_theta(series.fixed, theta, pt.delta_c_ghz)));
    } catch (const Error& e) {
      throw Error(ErrorCode::residual, "pipeline failed at delta_c = " +
                                           format_double(pt.delta_c_ghz) +
                                           " GHz: " + e.what());
    }
  }
  return out;
}

/// Error-weighted residuals, two per point in series order:
/// (R_pred - R_meas)/sigma_R, (tau_pred - tau_meas)/sigma_tau.
inline std::vector<double> residuals(const Theta& theta, const DetuningSeries& series,
                                     ForwardModel& model) {
  theta.validate();
  const auto pred = predict_series(theta, series, model);
  std::vector<double> r;
  r.reserve(2 * pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& pt = series.points[i];
    r.push_back((theta.scale * pred[i].r_g_unscaled - pt.r_g) / pt.r_g_err);
    r.push_back((pred[i].tau_w_ns - pt.tau_w_ns) / pt.tau_w_err);
  }
  return r;
}

inline std::vector<double> residuals(const Theta& theta, const DetuningSeries& series) {
  ForwardModel model;
  return residuals(theta, series, model);
}

/// Sum of squares in a fixed order (ascending detuning), so the objective does
/// not depend on how the points are listed.
inline double chi_square(const std::vector<double>& r, const DetuningSeries& series) {
  std::vector<std::size_t> order(series.points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return series.points[a].delta_c_ghz < series.points[b].delta_c_ghz;
  });
  double s = 0.0;
  for (auto i : order) s += r[2 * i] * r[2 * i] + r[2 * i + 1] * r[2 * i + 1];
  return s;
}

struct FitOptions {
  std::size_t max_iterations = 60;
  /// Converged when, for every free parameter, the residual vector projected
  /// on that Jacobian column is below this (error-bar units), relative to
  /// max(1, |r|).
  double gradient_tolerance = 1e-3;
  double relative_step = 1e-4;     ///< central-difference step
  double initial_damping = 1e-3;
  std::array<bool, Theta::size> free{true, true, true, true};
  /// Called with every parameter vector the fitter evaluates.
  std::function<void(const Theta&)> observer;
};

struct PointFit {
  double delta_c_ghz = 0.0;
  double rg_meas = 0.0;
  double rg_pred = 0.0;
  double tauw_meas = 0.0;
  double tauw_pred = 0.0;
};

struct FitResult {
  Theta theta;
  Theta std_error;        ///< 0 for frozen parameters
  double chi2 = 0.0;
  double gradient_measure = 0.0;
  std::vector<PointFit> per_point;
  bool converged = false;
  std::size_t iterations = 0;
  std::string label;
};

namespace detail {

inline constexpr std::array<double, Theta::size> step_floor{1e-2, 1.0, 1e-3, 0.0};

inline std::array<double, Theta::size> project(std::array<double, Theta::size> x,
                                               double scale_floor) {
  x[0] = std::clamp(x[0], 0.0, 1.0);
  x[1] = std::max(x[1], 1e-6);
  x[2] = std::max(x[2], 0.0);
  x[3] = std::max(x[3], scale_floor);
  return x;
}

inline bool within_bounds(std::size_t j, double v) {
  switch (j) {
  case 0: return v >= 0.0 && v <= 1.0;
  case 1: return v > 0.0;
  case 2: return v >= 0.0;
  default: return v > 0.0;
  }
}

} // namespace detail

/// Bounded Levenberg-Marquardt with Marquardt diagonal scaling, central
/// finite-difference Jacobian and projection onto the bounds. Never throws on
/// non-convergence: returns the best point with converged = false.
inline FitResult fit_series(const DetuningSeries& series, const Theta& init,
                            const FitOptions& opt, ForwardModel& model) {
  series.validate();
  init.validate();
  const std::size_t m = 2 * series.points.size();
  std::vector<std::size_t> free_idx;
  for (std::size_t j = 0; j < Theta::size; ++j)
    if (opt.free[j]) free_idx.push_back(j);
  const std::size_t nf = free_idx.size();
  const double scale_floor = 1e-12 * init.scale;

  auto eval = [&](const std::array<double, Theta::size>& x) {
    if (opt.observer) opt.observer(Theta::from_array(x));
    return residuals(Theta::from_array(x), series, model);
  };

  std::array<double, Theta::size> x = init.to_array();
  std::vector<double> r = eval(x);
  double chi2 = chi_square(r, series);
  double lambda = opt.initial_damping;

  FitResult result;
  result.label = series.label;
  Eigen::MatrixXd jac(m, nf);
  double gmeasure = 0.0;

  auto jacobian = [&]() {
    for (std::size_t c = 0; c < nf; ++c) {
      const std::size_t j = free_idx[c];
      const double h = opt.relative_step * std::max(std::abs(x[j]), detail::step_floor[j]);
      auto xp = x;
      auto xm = x;
      xp[j] += h;
      xm[j] -= h;
      std::vector<double> rp, rm;
      double denom = 2.0 * h;
      if (!detail::within_bounds(j, xp[j])) {
        rp = r;
        rm = eval(xm);
        denom = h;
      } else if (!detail::within_bounds(j, xm[j])) {
        rp = eval(xp);
        rm = r;
        denom = h;
      } else {
        rp = eval(xp);
        rm = eval(xm);
      }
      for (std::size_t i = 0; i < m; ++i) jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = (rp[i] - rm[i]) / denom;
    }
  };

  auto gradient_measure = [&]() {
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(m));
    const double rn = std::max(1.0, rv.norm());
    double g = 0.0;
    for (std::size_t c = 0; c < nf; ++c) {
      const auto col = jac.col(static_cast<Eigen::Index>(c));
      const double cn = col.norm();
      if (cn > 0.0) g = std::max(g, std::abs(col.dot(rv)) / cn / rn);
    }
    return g;
  };

  std::size_t iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    jacobian();
    gmeasure = gradient_measure();
    if (gmeasure < opt.gradient_tolerance) {
      result.converged = true;
      break;
    }
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(m));
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * rv;
    bool accepted = false;
    while (lambda < 1e12) {
      Eigen::MatrixXd damped = a;
      for (Eigen::Index k = 0; k < damped.rows(); ++k)
        damped(k, k) += lambda * std::max(a(k, k), 1e-300);
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      auto xn = x;
      for (std::size_t c = 0; c < nf; ++c) xn[free_idx[c]] += step(static_cast<Eigen::Index>(c));
      xn = detail::project(xn, scale_floor);
      std::vector<double> rn;
      bool ok = true;
      try {
        rn = eval(xn);
      } catch (const Error&) {
        ok = false; // treat a failed trial point as uphill
      }
      const double chi2n = ok ? chi_square(rn, series) : INFINITY;
      if (chi2n < chi2) {
        x = xn;
        r = std::move(rn);
        chi2 = chi2n;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break; // stalled: no downhill step at any damping
  }
  if (iter == opt.max_iterations || !result.converged) {
    // report the gradient at the final point
    jacobian();
    gmeasure = gradient_measure();
    result.converged = gmeasure < opt.gradient_tolerance;
  }

  result.theta = Theta::from_array(x);
  result.chi2 = chi2;
  result.gradient_measure = gmeasure;
  result.iterations = iter;
  result.std_error = Theta{0.0, 0.0, 0.0, 0.0};
  {
    const Eigen::MatrixXd a = jac.transpose() * jac;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.isInvertible()) {
      const Eigen::MatrixXd cov = lu.inverse();
      auto se = result.std_error.to_array();
      for (std::size_t c = 0; c < nf; ++c)
        se[free_idx[c]] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c))));
      result.std_error = Theta::from_array(se);
    }
  }
  const auto pred = predict_series(result.theta, series, model);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& pt = series.points[i];
    result.per_point.push_back({pt.delta_c_ghz, pt.r_g, result.theta.scale * pred[i].r_g_unscaled,
                                pt.tau_w_ns, pred[i].tau_w_ns});
  }
  return result;
}

inline FitResult fit_series(const DetuningSeries& series, const Theta& init,
                            const FitOptions& opt = {}) {
  ForwardModel model;
  return fit_series(series, init, opt, model);
}

/// b = 0.3, gamma = 0.01 Gamma, Omega_c from a coarse scan minimizing the
/// tau_w residuals, scale matching the first point's R_g.
inline Theta default_initial_guess(const DetuningSeries& series, ForwardModel& model) {
  series.validate();
  Theta t;
  t.b = 0.3;
  t.gamma_dec = 0.01;
  double best_oc = 4.0;
  double best = INFINITY;
  for (double oc = 4.0; oc <= 30.0 + 1e-9; oc += 2.0) {
    t.omega_c = oc;
    double s = 0.0;
    try {
      const auto pred = predict_series(t, series, model);
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = (pred[i].tau_w_ns - series.points[i].tau_w_ns) / series.points[i].tau_w_err;
        s += d * d;
      }
    } catch (const Error&) {
      continue;
    }
    if (s < best) {
      best = s;
      best_oc = oc;
    }
  }
  t.omega_c = best_oc;
  const auto first = model(with_theta(series.fixed, t, series.points.front().delta_c_ghz));
  t.scale = first.r_g_unscaled > 0.0 ? series.points.front().r_g / first.r_g_unscaled : 1.0;
  return t;
}

/// Forward-model series with multiplicative Gaussian noise of relative sigma
/// `noise`; error bars are max(noise, 1%) of the noiseless value.
inline DetuningSeries synthesize_series(const Theta& theta, const SystemParams& fixed,
                                        const std::vector<double>& detunings_ghz,
                                        double noise, std::uint64_t seed,
                                        ForwardModel& model, std::string label = "synthetic") {
  theta.validate();
  require(noise >= 0.0, ErrorCode::invalid_parameter, "noise must be >= 0");
  DetuningSeries s;
  s.fixed = fixed;
  s.label = std::move(label);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double rel_err = std::max(noise, 0.01);
  for (double dc : detunings_ghz) {
    const auto pred = model(with_theta(fixed, theta, dc));
    const double rg = theta.scale * pred.r_g_unscaled;
    const double tw = pred.tau_w_ns;
    SeriesPoint pt;
    pt.delta_c_ghz = dc;
    pt.r_g = noise > 0.0 ? rg * (1.0 + noise * normal(rng)) : rg;
    pt.tau_w_ns = noise > 0.0 ? tw * (1.0 + noise * normal(rng)) : tw;
    pt.r_g_err = rel_err * rg;
    pt.tau_w_err = rel_err * tw;
    s.points.push_back(pt);
  }
  return s;
}

inline DetuningSeries synthesize_series(const Theta& theta, const SystemParams& fixed,
                                        const std::vector<double>& detunings_ghz,
                                        double noise, std::uint64_t seed) {
  ForwardModel model;
  return synthesize_series(theta, fixed, detunings_ghz, noise, seed, model);
}

// Series CSV: header `delta_c_ghz,rg,rg_err,tau_w_ns,tau_w_err`.

inline DetuningSeries load_series(const std::filesystem::path& path, const SystemParams& fixed) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open series " + path.string());
  DetuningSeries s;
  s.fixed = fixed;
  s.label = path.stem().string();
  std::string line;
  int lineno = 1;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse, path.string() + ": empty file");
  require(trim(line) == "delta_c_ghz,rg,rg_err,tau_w_ns,tau_w_err", ErrorCode::parse,
          path.string() + ":1: expected header 'delta_c_ghz,rg,rg_err,tau_w_ns,tau_w_err'");
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    std::vector<std::string_view> f;
    std::string_view rest = line;
    while (true) {
      const auto c = rest.find(',');
      f.push_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest.remove_prefix(c + 1);
    }
    require(f.size() == 5, ErrorCode::parse, ctx + ": expected 5 fields");
    s.points.push_back({parse_double(f[0], ctx), parse_double(f[1], ctx), parse_double(f[2], ctx),
                        parse_double(f[3], ctx), parse_double(f[4], ctx)});
  }
  return s;
}

inline void save_series(const DetuningSeries& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io, "cannot write " + path.string());
  out << "delta_c_ghz,rg,rg_err,tau_w_ns,tau_w_err\n";
  for (const auto& p : s.points)
    out << format_double(p.delta_c_ghz) << ',' << format_double(p.r_g) << ','
        << format_double(p.r_g_err) << ',' << format_double(p.tau_w_ns) << ','
        << format_double(p.tau_w_err) << '\n';
}

inline void write_fit_report(std::ostream& os, const FitResult& f) {
  auto pm = [&](const char* name, double v, double e) {
    os << name << " = " << format_double(v) << " +- " << format_double(e) << '\n';
  };
  os << "label = " << f.label << '\n'
     << "converged = " << (f.converged ? "true" : "false") << '\n'
     << "iterations = " << f.iterations << '\n'
     << "chi2 = " << format_double(f.chi2) << '\n'
     << "gradient_measure = " << format_double(f.gradient_measure) << '\n';
  pm("b", f.theta.b, f.std_error.b);
  pm("omega_c_gamma", f.theta.omega_c, f.std_error.omega_c);
  pm("gamma_dec_mhz", units::to_mhz(f.theta.gamma_dec), units::to_mhz(f.std_error.gamma_dec));
  pm("scale", f.theta.scale, f.std_error.scale);
  os << '\n' << "delta_c_ghz,rg_meas,rg_pred,tauw_meas,tauw_pred\n";
  for (const auto& p : f.per_point)
    os << format_double(p.delta_c_ghz) << ',' << format_double(p.rg_meas) << ','
       << format_double(p.rg_pred) << ',' << format_double(p.tauw_meas) << ','
       << format_double(p.tauw_pred) << '\n';
}

} // namespace biphoton
