#pragma once

// Batch front-end: simulate, sweep, spectrum, analyze, fit.
// Exit status 0 ok/partial, 2 usage/config, 3 data, 4 numerical.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "error.hpp"
#include "fitting.hpp"
#include "format.hpp"
#include "observables.hpp"
#include "wavepacket.hpp"

namespace biphoton::cli {

struct Invocation {
  std::string command;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> quadrature;
  std::optional<std::filesystem::path> input; ///< histogram or series file
  bool strict = false;
};

inline int exit_code(ErrorCode c) { return static_cast<int>(category_of(c)); }

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  require(f.good(), ErrorCode::io, "cannot write " + p.string());
  return f;
}

inline RunConfig load_config(const Invocation& inv, std::ostream& err, bool required = true) {
  if (!inv.config) {
    require(!required, ErrorCode::usage, inv.command + ": --config is required");
    return RunConfig{};
  }
  auto c = RunConfig::load(*inv.config, inv.strict);
  for (const auto& w : c.warnings()) err << "warning: CONFIG_UNKNOWN_KEY: " << w << '\n';
  return c;
}

inline std::filesystem::path out_dir(const Invocation& inv, const RunConfig& c) {
  std::filesystem::path dir = ".";
  if (inv.out) dir = *inv.out;
  else if (c.has("output.dir")) dir = c.get_path("output.dir");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir), ErrorCode::io,
          "cannot create output directory " + dir.string());
  return dir;
}

inline QuadratureSpec quad_of(const Invocation& inv, const RunConfig& c) {
  QuadratureSpec q = quadrature_spec(c);
  if (inv.quadrature) q.method = parse_method(*inv.quadrature);
  return q;
}

inline bool all_zero(const std::vector<std::complex<double>>& a) {
  return std::all_of(a.begin(), a.end(), [](auto v) { return v == std::complex<double>{}; });
}

inline void write_spectrum(std::ostream& os, const SpectralAmplitude& sa) {
  os << "delta_mhz,intensity_norm\n";
  std::vector<double> s(sa.amplitude.size(), 0.0);
  if (!all_zero(sa.amplitude)) s = biphoton_spectrum(sa);
  for (std::size_t k = 0; k < s.size(); ++k)
    os << format_double(units::to_mhz(sa.grid.value(k))) << ',' << format_double(s[k]) << '\n';
}

inline void write_wavepacket(std::ostream& os, const WavePacket& wp, std::optional<double> tau_w_ns) {
  os << "tau_ns,g2_arb\n";
  const auto t = wp.tau_ns();
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (tau_w_ns && std::abs(t[j]) > 5.0 * *tau_w_ns) continue;
    os << format_double(t[j]) << ',' << format_double(wp.g2[j]) << '\n';
  }
}

} // namespace detail

inline int cmd_simulate(const Invocation& inv, std::ostream& err) {
  const auto c = detail::load_config(inv, err);
  const auto p = system_params(c);
  const auto quad = detail::quad_of(inv, c);
  const auto grid = grid_override(c);
  const auto dir = detail::out_dir(inv, c);

  const auto sa = sample_spectral_amplitude(p, grid, quad);
  const auto wp = wave_packet(sa);
  std::optional<BiphotonObservables> obs;
  if (detail::all_zero(sa.amplitude)) {
    err << "warning: EMPTY_SPECTRUM: pump Rabi frequency is zero; no biphotons\n";
  } else {
    obs = model_observables(sa, wp);
  }
  {
    auto f = detail::open_out(dir / "wavepacket.csv");
    detail::write_wavepacket(f, wp, obs ? std::optional<double>(obs->tau_w_ns) : std::nullopt);
  }
  {
    auto f = detail::open_out(dir / "spectrum.csv");
    detail::write_spectrum(f, sa);
  }
  auto f = detail::open_out(dir / "observables.csv");
  if (obs) {
    write_report(f, report_rows(*obs));
  } else {
    write_report(f, {{"r_g", 0.0, "arb", false}});
  }
  return 0;
}

inline int cmd_spectrum(const Invocation& inv, std::ostream& err) {
  const auto c = detail::load_config(inv, err);
  const auto p = system_params(c);
  const auto sa = sample_spectral_amplitude(p, grid_override(c), detail::quad_of(inv, c));
  const auto dir = detail::out_dir(inv, c);
  {
    auto f = detail::open_out(dir / "spectrum.csv");
    detail::write_spectrum(f, sa);
  }
  auto f = detail::open_out(dir / "spectrum_report.csv");
  std::vector<ReportRow> rows{{"spectral_energy", spectral_energy(sa), "arb", false}};
  if (!detail::all_zero(sa.amplitude)) {
    const auto s = biphoton_spectrum(sa);
    std::vector<double> f_mhz(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) f_mhz[k] = units::to_mhz(sa.grid.value(k));
    rows.push_back({"delta_omega", fwhm(f_mhz, s), "MHz", false});
  } else {
    err << "warning: EMPTY_SPECTRUM: pump Rabi frequency is zero; no biphotons\n";
  }
  write_report(f, rows);
  return 0;
}

inline int cmd_sweep(const Invocation& inv, std::ostream& err) {
  const auto c = detail::load_config(inv, err);
  const auto base = system_params(c);
  const auto quad = detail::quad_of(inv, c);
  const auto grid = grid_override(c);
  const auto detunings = c.get_double_list("sweep.delta_c_ghz");
  require(detunings.size() >= 2, ErrorCode::config_sweep_too_short,
          "sweep.delta_c_ghz needs at least 2 detunings, got " + std::to_string(detunings.size()));
  const auto dir = detail::out_dir(inv, c);

  auto f = detail::open_out(dir / "sweep.csv");
  f << "delta_c_ghz,rg_arb,tau_w_ns,domega_mhz\n";
  std::optional<ErrorCode> first_error;
  std::size_t ok = 0;
  for (double dc : detunings) {
    auto p = base;
    p.delta_c = units::from_ghz(dc);
    try {
      const auto sa = sample_spectral_amplitude(p, grid, quad);
      const auto wp = wave_packet(sa);
      const auto o = model_observables(sa, wp);
      f << format_double(dc) << ',' << format_double(o.r_g.value) << ','
        << format_double(o.tau_w_ns) << ',' << format_double(o.delta_omega_mhz) << '\n';
      ++ok;
    } catch (const Error& e) {
      f << format_double(dc) << ",error:" << code_name(e.code()) << ",,\n";
      err << "warning: " << code_name(e.code()) << ": delta_c = " << format_double(dc)
          << " GHz: " << e.what() << '\n';
      if (!first_error) first_error = e.code();
    }
  }
  if (ok == 0 && first_error) return exit_code(*first_error);
  return 0;
}

inline int cmd_analyze(const Invocation& inv, std::ostream& err) {
  const auto c = detail::load_config(inv, err, false);
  std::filesystem::path hist_path;
  if (inv.input) hist_path = *inv.input;
  else if (c.has("analyze.histogram")) hist_path = c.get_path("analyze.histogram");
  else fail(ErrorCode::usage, "analyze: no histogram given (positional argument or analyze.histogram)");

  AnalyzeOptions opt;
  opt.absolute_rates = c.get_bool("analyze.absolute_rates", true);
  if (c.has("analyze.background_start_ns") || c.has("analyze.background_end_ns")) {
    c.require_keys({"analyze.background_start_ns", "analyze.background_end_ns"});
    opt.background_window = TauWindow{c.get_double("analyze.background_start_ns"),
                                      c.get_double("analyze.background_end_ns")};
  }
  const auto h = load_histogram(hist_path);
  const auto a = analyze_histogram(h, opt);
  for (const auto& w : a.warnings)
    err << "warning: " << w << ": no wave packet above background in " << hist_path.string() << '\n';

  const auto dir = detail::out_dir(inv, c);
  {
    auto f = detail::open_out(dir / "g2.csv");
    f << "tau_ns,g2\n";
    for (std::size_t i = 0; i < a.g2.tau_ns.size(); ++i)
      f << format_double(a.g2.tau_ns[i]) << ',' << format_double(a.g2.g2[i]) << '\n';
  }
  auto f = detail::open_out(dir / "analysis.csv");
  write_report(f, report_rows(a));
  return 0;
}

inline int cmd_fit(const Invocation& inv, std::ostream& err) {
  const auto c = detail::load_config(inv, err);
  const auto fixed = system_params(c, false);
  std::filesystem::path series_path;
  if (inv.input) series_path = *inv.input;
  else series_path = c.get_path("fit.series");
  const auto series = load_series(series_path, fixed);
  series.validate();

  FitOptions opt;
  opt.max_iterations = c.get_count("fit.max_iterations", opt.max_iterations);
  if (c.has("fit.freeze")) {
    for (const auto& name : c.get_list("fit.freeze")) {
      if (name == "b") opt.free[0] = false;
      else if (name == "omega_c") opt.free[1] = false;
      else if (name == "gamma_dec") opt.free[2] = false;
      else if (name == "scale") opt.free[3] = false;
      else fail(ErrorCode::config_bad_value, "fit.freeze: unknown parameter '" + name + "'");
    }
  }

  ForwardModel model;
  const bool full_init = c.has("fit.init.b") && c.has("fit.init.omega_c_gamma") &&
                         c.has("fit.init.gamma_dec_mhz") && c.has("fit.init.scale");
  Theta init = full_init ? Theta{} : default_initial_guess(series, model);
  init.b = c.get_double("fit.init.b", init.b);
  init.omega_c = c.get_double("fit.init.omega_c_gamma", init.omega_c);
  if (c.has("fit.init.gamma_dec_mhz")) init.gamma_dec = units::from_mhz(c.get_double("fit.init.gamma_dec_mhz"));
  init.scale = c.get_double("fit.init.scale", init.scale);
  try {
    init.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::config_bad_value, std::string("fit.init: ") + e.what());
  }

  const auto result = fit_series(series, init, opt, model);
  if (!result.converged)
    err << "warning: CONVERGENCE: fit did not converge after " << result.iterations
        << " iterations; best-so-far parameters reported\n";

  const auto dir = detail::out_dir(inv, c);
  {
    auto f = detail::open_out(dir / "fit_report.txt");
    write_fit_report(f, result);
  }
  // predicted curves for overplotting
  const std::size_t n_curve = c.get_count("fit.curve_points", 31);
  double lo = series.points.front().delta_c_ghz, hi = lo;
  for (const auto& pt : series.points) {
    lo = std::min(lo, pt.delta_c_ghz);
    hi = std::max(hi, pt.delta_c_ghz);
  }
  auto f = detail::open_out(dir / "fit_curve.csv");
  f << "delta_c_ghz,rg_pred,tau_w_ns\n";
  for (std::size_t i = 0; i < n_curve; ++i) {
    const double dc = n_curve == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_curve - 1);
    try {
      const auto pr = model(with_theta(fixed, result.theta, dc));
      f << format_double(dc) << ',' << format_double(result.theta.scale * pr.r_g_unscaled) << ','
        << format_double(pr.tau_w_ns) << '\n';
    } catch (const Error& e) {
      f << format_double(dc) << ",error:" << code_name(e.code()) << ",\n";
    }
  }
  return 0;
}

/// Entry point. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"biphoton: heralded-biphoton model, histogram analysis and fitting", "biphoton"};
  app.require_subcommand(1);
  Invocation inv;
  std::string config, outdir, quad, input;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "run configuration (key = value)");
    sub->add_option("--out", outdir, "output directory");
    sub->add_option("--quadrature", quad,
                    "faddeeva_analytic | adaptive_panels | dense_trapezoid");
    sub->add_flag("--strict", inv.strict, "reject unknown config keys");
  };
  auto* sim = app.add_subcommand("simulate", "wave packet, spectrum and observables");
  auto* swp = app.add_subcommand("sweep", "observables versus coupling detuning");
  auto* spc = app.add_subcommand("spectrum", "biphoton spectrum");
  auto* ana = app.add_subcommand("analyze", "coincidence histogram analysis");
  auto* fit = app.add_subcommand("fit", "fit (b, Omega_c, gamma, scale) to a detuning series");
  for (auto* s : {sim, swp, spc, ana, fit}) add_common(s);
  ana->add_option("histogram", input, "histogram CSV (sidecar <file>.meta next to it)");
  fit->add_option("series", input, "series CSV delta_c_ghz,rg,rg_err,tau_w_ns,tau_w_err");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: USAGE: " << e.what() << '\n';
    return exit_code(ErrorCode::usage);
  }
  inv.command = app.get_subcommands().front()->get_name();
  if (!config.empty()) inv.config = config;
  if (!outdir.empty()) inv.out = outdir;
  if (!quad.empty()) inv.quadrature = quad;
  if (!input.empty()) inv.input = input;

  try {
    if (inv.command == "simulate") return cmd_simulate(inv, err);
    if (inv.command == "sweep") return cmd_sweep(inv, err);
    if (inv.command == "spectrum") return cmd_spectrum(inv, err);
    if (inv.command == "analyze") return cmd_analyze(inv, err);
    return cmd_fit(inv, err);
  } catch (const Error& e) {
    err << "error: " << code_name(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: INTERNAL: " << e.what() << '\n';
    return 4;
  }
}

} // namespace biphoton::cli
