#pragma once

// Line-oriented `key = value` run configuration with dotted sections.
// '#' starts a comment. Relative paths resolve against the config's folder.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "format.hpp"
#include "params.hpp"
#include "wavepacket.hpp"

namespace biphoton {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "system.alpha",           "system.b",
      "system.omega_c_gamma",   "system.omega_p_gamma",
      "system.gamma_dec_mhz",   "system.gamma_doppler_mhz",
      "system.gamma_etalon_mhz", "system.delta_p_ghz",
      "system.delta_c_ghz",
      "grid.delta_max_mhz",     "grid.points",
      "quadrature.method",      "quadrature.tolerance",
      "quadrature.points",
      "output.dir",
      "sweep.delta_c_ghz",
      "fit.series",             "fit.max_iterations",
      "fit.init.b",             "fit.init.omega_c_gamma",
      "fit.init.gamma_dec_mhz", "fit.init.scale",
      "fit.freeze",             "fit.curve_points",
      "analyze.histogram",      "analyze.background_start_ns",
      "analyze.background_end_ns", "analyze.absolute_rates",
  };
  return keys;
}

struct ConfigEntry {
  std::string value;
  int line = 0;
};

class RunConfig {
public:
  RunConfig() = default;

  /// Parses text. Unknown keys raise CONFIG_UNKNOWN_KEY when strict, else
  /// they are collected in warnings().
  static RunConfig parse(std::string_view text, const std::string& source = "<config>",
                         bool strict = false) {
    RunConfig c;
    c.source_ = source;
    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
      ++lineno;
      if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string ctx = source + ":" + std::to_string(lineno);
      require(eq != std::string_view::npos, ErrorCode::parse, ctx + ": expected 'key = value'");
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      require(!key.empty(), ErrorCode::parse, ctx + ": empty key");
      require(!c.entries_.count(key), ErrorCode::config_bad_value,
              ctx + ": duplicate key '" + key + "'");
      if (!known_config_keys().count(key)) {
        if (strict) fail(ErrorCode::config_unknown_key, ctx + ": unknown key '" + key + "'");
        c.warnings_.push_back(ctx + ": unknown key '" + key + "' ignored");
        continue;
      }
      c.entries_[key] = {value, lineno};
    }
    return c;
  }

  static RunConfig load(const std::filesystem::path& path, bool strict = false) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io, "cannot open config " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto c = parse(text, path.string(), strict);
    c.base_dir_ = path.parent_path();
    return c;
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::string get_string(const std::string& key) const { return entry(key).value; }

  std::optional<std::string> find_string(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get_string(key);
  }

  double get_double(const std::string& key) const {
    const auto& e = entry(key);
    double v = 0.0;
    require(try_parse_double(e.value, v), ErrorCode::config_bad_value,
            where(key) + ": '" + e.value + "' is not a number");
    return v;
  }

  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  std::size_t get_count(const std::string& key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    const double v = get_double(key);
    require(v >= 1.0 && v == static_cast<double>(static_cast<std::size_t>(v)),
            ErrorCode::config_bad_value, where(key) + ": expected a positive integer");
    return static_cast<std::size_t>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto v = get_string(key);
    if (v == "true") return true;
    if (v == "false") return false;
    fail(ErrorCode::config_bad_value, where(key) + ": expected true or false");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::string_view rest = entry(key).value;
    while (true) {
      const auto c = rest.find(',');
      const auto item = trim(rest.substr(0, c));
      if (!item.empty()) out.emplace_back(item);
      if (c == std::string_view::npos) break;
      rest.remove_prefix(c + 1);
    }
    return out;
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_list(key)) {
      double v = 0.0;
      require(try_parse_double(s, v), ErrorCode::config_bad_value,
              where(key) + ": '" + s + "' is not a number");
      out.push_back(v);
    }
    return out;
  }

  std::filesystem::path get_path(const std::string& key) const {
    std::filesystem::path p = get_string(key);
    return p.is_relative() ? base_dir_ / p : p;
  }

  void require_keys(const std::vector<std::string>& keys) const {
    for (const auto& k : keys)
      require(has(k), ErrorCode::config_missing_key,
              source_ + ": missing required key '" + k + "'");
  }

private:
  const ConfigEntry& entry(const std::string& key) const {
    auto it = entries_.find(key);
    require(it != entries_.end(), ErrorCode::config_missing_key,
            source_ + ": missing required key '" + key + "'");
    return it->second;
  }
  std::string where(const std::string& key) const {
    return source_ + ":" + std::to_string(entry(key).line) + ": " + key;
  }

  std::map<std::string, ConfigEntry> entries_;
  std::vector<std::string> warnings_;
  std::string source_ = "<config>";
  std::filesystem::path base_dir_;
};

/// Builds SystemParams. The model-defining keys are required; the rest fall
/// back to the 15 mW defaults.
inline SystemParams system_params(const RunConfig& c, bool require_model = true) {
  if (require_model)
    c.require_keys({"system.alpha", "system.b", "system.omega_c_gamma", "system.gamma_dec_mhz"});
  else
    c.require_keys({"system.alpha"});
  UserParams u;
  u.alpha = c.get_double("system.alpha");
  u.b = c.get_double("system.b", u.b);
  u.omega_c_gamma = c.get_double("system.omega_c_gamma", u.omega_c_gamma);
  u.gamma_dec_mhz = c.get_double("system.gamma_dec_mhz", u.gamma_dec_mhz);
  u.omega_p_gamma = c.get_double("system.omega_p_gamma", u.omega_p_gamma);
  u.gamma_doppler_mhz = c.get_double("system.gamma_doppler_mhz", u.gamma_doppler_mhz);
  u.gamma_etalon_mhz = c.get_double("system.gamma_etalon_mhz", u.gamma_etalon_mhz);
  u.delta_p_ghz = c.get_double("system.delta_p_ghz", u.delta_p_ghz);
  u.delta_c_ghz = c.get_double("system.delta_c_ghz", u.delta_c_ghz);
  try {
    return from_user_units(u);
  } catch (const Error& e) {
    throw Error(ErrorCode::config_bad_value, e.what());
  }
}

inline QuadratureSpec quadrature_spec(const RunConfig& c) {
  QuadratureSpec q;
  if (c.has("quadrature.method")) q.method = parse_method(c.get_string("quadrature.method"));
  q.panel_tolerance = c.get_double("quadrature.tolerance", q.panel_tolerance);
  q.trapezoid_points = c.get_count("quadrature.points", q.trapezoid_points);
  try {
    q.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::config_bad_value, e.what());
  }
  return q;
}

inline std::optional<DetuningGrid> grid_override(const RunConfig& c) {
  if (!c.has("grid.delta_max_mhz") && !c.has("grid.points")) return std::nullopt;
  c.require_keys({"grid.delta_max_mhz", "grid.points"});
  DetuningGrid g;
  g.delta_max = units::from_mhz(c.get_double("grid.delta_max_mhz"));
  g.n_points = c.get_count("grid.points", 0);
  try {
    g.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::config_bad_value, e.what());
  }
  return g;
}

} // namespace biphoton
