#pragma once

// Measured coincidence histograms: file I/O, background level, normalized
// cross-correlation and background-subtracted pair rate.
//
// Histogram CSV: header `tau_ns,counts`, one row per bin, LF endings.
// Sidecar `<stem>.meta`: `key = value` lines with the keys in meta_keys.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "format.hpp"
#include "records.hpp"

namespace biphoton {

struct CoincidenceHistogram {
  std::vector<double> bin_start;     ///< ns
  std::vector<std::int64_t> counts;
  double bin_width_ns = 0.8;
  double accumulation_s = 120.0;
  double singles_signal_per_s = 0.0; ///< detected
  double singles_probe_per_s = 0.0;  ///< detected
  DetectionChain chain;
  bool saturation_corrected = false;

  std::size_t size() const { return counts.size(); }

  void validate() const {
    require(bin_start.size() == counts.size(), ErrorCode::parse,
            "histogram: bin and count arrays differ in length");
    require(std::isfinite(bin_width_ns) && bin_width_ns > 0.0, ErrorCode::parse,
            "histogram: bin_width_ns must be > 0");
    require(std::isfinite(accumulation_s) && accumulation_s > 0.0, ErrorCode::parse,
            "histogram: accumulation_s must be > 0");
    require(singles_signal_per_s >= 0.0 && singles_probe_per_s >= 0.0,
            ErrorCode::parse, "histogram: singles rates must be >= 0");
    chain.validate();
    const double tol = 1e-6 * bin_width_ns;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      require(counts[i] >= 0, ErrorCode::parse,
              "histogram: negative count in bin " + std::to_string(i));
      if (i > 0)
        require(std::abs(bin_start[i] - bin_start[i - 1] - bin_width_ns) <= tol,
                ErrorCode::parse,
                "histogram: non-uniform bins at row " + std::to_string(i + 1));
    }
  }
};

inline const std::vector<std::string>& meta_keys() {
  static const std::vector<std::string> keys = {
      "bin_width_ns",       "accumulation_s", "singles_signal_per_s",
      "singles_probe_per_s", "d_s",           "d_p",
      "fiber_factor",       "saturation_corrected"};
  return keys;
}

inline std::filesystem::path meta_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".meta");
  return p;
}

namespace detail {

inline std::int64_t parse_count(std::string_view s, const std::string& ctx) {
  s = trim(s);
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
    fail(ErrorCode::parse, ctx + ": counts must be an integer, got '" +
                               std::string(s) + "'");
  if (v < 0) fail(ErrorCode::parse, ctx + ": negative count");
  return v;
}

inline bool parse_bool(std::string_view s, const std::string& ctx) {
  s = trim(s);
  if (s == "true") return true;
  if (s == "false") return false;
  fail(ErrorCode::parse, ctx + ": expected true or false, got '" + std::string(s) + "'");
}

/// Reads `key = value` lines; '#' starts a comment. Duplicate keys are errors.
inline std::map<std::string, std::pair<std::string, int>>
read_key_values(std::istream& in, const std::string& name, ErrorCode code) {
  std::map<std::string, std::pair<std::string, int>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos)
      fail(code, name + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key{trim(v.substr(0, eq))};
    const std::string value{trim(v.substr(eq + 1))};
    if (key.empty())
      fail(code, name + ":" + std::to_string(lineno) + ": empty key");
    if (out.count(key))
      fail(code, name + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    out.emplace(key, std::pair{value, lineno});
  }
  return out;
}

} // namespace detail

inline CoincidenceHistogram load_histogram(const std::filesystem::path& path) {
  CoincidenceHistogram h;
  std::ifstream csv(path);
  require(csv.good(), ErrorCode::io, "cannot open histogram " + path.string());
  const std::string name = path.string();
  std::string line;
  int lineno = 0;
  require(static_cast<bool>(std::getline(csv, line)), ErrorCode::parse,
          name + ": empty file");
  ++lineno;
  require(trim(line) == "tau_ns,counts", ErrorCode::parse,
          name + ":1: expected header 'tau_ns,counts'");
  while (std::getline(csv, line)) {
    ++lineno;
    const std::string ctx = name + ":" + std::to_string(lineno);
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos && line.find(',', comma + 1) == std::string::npos,
            ErrorCode::parse, ctx + ": expected two fields");
    h.bin_start.push_back(parse_double(std::string_view(line).substr(0, comma), ctx));
    h.counts.push_back(detail::parse_count(std::string_view(line).substr(comma + 1), ctx));
  }

  const auto mpath = meta_path(path);
  std::ifstream meta(mpath);
  require(meta.good(), ErrorCode::io, "cannot open metadata " + mpath.string());
  const auto kv = detail::read_key_values(meta, mpath.string(), ErrorCode::parse);
  const std::set<std::string> known(meta_keys().begin(), meta_keys().end());
  for (const auto& [key, val] : kv)
    require(known.count(key) > 0, ErrorCode::parse,
            mpath.string() + ":" + std::to_string(val.second) + ": unknown key '" + key + "'");
  auto get = [&](const std::string& key) -> std::pair<std::string, std::string> {
    auto it = kv.find(key);
    if (it == kv.end())
      fail(ErrorCode::parse, mpath.string() + ": missing metadata key '" + key + "'");
    return {it->second.first, mpath.string() + ":" + std::to_string(it->second.second)};
  };
  auto num = [&](const std::string& key) {
    auto [v, ctx] = get(key);
    return parse_double(v, ctx);
  };
  h.bin_width_ns = num("bin_width_ns");
  h.accumulation_s = num("accumulation_s");
  h.singles_signal_per_s = num("singles_signal_per_s");
  h.singles_probe_per_s = num("singles_probe_per_s");
  h.chain.d_s = num("d_s");
  h.chain.d_p = num("d_p");
  h.chain.fiber_factor = num("fiber_factor");
  {
    auto [v, ctx] = get("saturation_corrected");
    h.saturation_corrected = detail::parse_bool(v, ctx);
  }
  try {
    h.validate();
  } catch (const Error& e) {
    throw Error(e.code(), name + ": " + e.what());
  }
  return h;
}

inline void save_histogram(const CoincidenceHistogram& h, const std::filesystem::path& path) {
  h.validate();
  {
    std::ofstream csv(path, std::ios::binary);
    require(csv.good(), ErrorCode::io, "cannot write " + path.string());
    csv << "tau_ns,counts\n";
    for (std::size_t i = 0; i < h.size(); ++i)
      csv << format_double(h.bin_start[i]) << ',' << h.counts[i] << '\n';
  }
  std::ofstream meta(meta_path(path), std::ios::binary);
  require(meta.good(), ErrorCode::io, "cannot write " + meta_path(path).string());
  meta << "bin_width_ns = " << format_double(h.bin_width_ns) << '\n'
       << "accumulation_s = " << format_double(h.accumulation_s) << '\n'
       << "singles_signal_per_s = " << format_double(h.singles_signal_per_s) << '\n'
       << "singles_probe_per_s = " << format_double(h.singles_probe_per_s) << '\n'
       << "d_s = " << format_double(h.chain.d_s) << '\n'
       << "d_p = " << format_double(h.chain.d_p) << '\n'
       << "fiber_factor = " << format_double(h.chain.fiber_factor) << '\n'
       << "saturation_corrected = " << (h.saturation_corrected ? "true" : "false") << '\n';
}

/// Half-open delay interval [lo_ns, hi_ns).
struct TauWindow {
  double lo_ns = 0.0;
  double hi_ns = 0.0;
};

/// Trailing quarter of the delay range.
inline TauWindow default_background_window(const CoincidenceHistogram& h) {
  require(h.size() > 0, ErrorCode::background_window, "empty histogram");
  const double lo = h.bin_start.front();
  const double hi = h.bin_start.back() + h.bin_width_ns;
  return {hi - 0.25 * (hi - lo), hi};
}

/// Bins [first, last] of the coincidence peak, if there is one. A peak exists
/// when the largest bin exceeds the median by 5 Poisson deviations; its region
/// is the contiguous run of bins around it above median + 3 deviations.
struct PeakRegion {
  std::size_t first = 0;
  std::size_t last = 0;
};

inline std::optional<PeakRegion> detect_peak(const CoincidenceHistogram& h) {
  if (h.size() == 0) return std::nullopt;
  std::vector<std::int64_t> sorted = h.counts;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                   sorted.end());
  const double median = static_cast<double>(sorted[sorted.size() / 2]);
  const double dev = std::sqrt(std::max(median, 1.0));
  const auto top = std::max_element(h.counts.begin(), h.counts.end());
  if (static_cast<double>(*top) <= median + 5.0 * dev) return std::nullopt;
  const double edge = median + 3.0 * dev;
  PeakRegion r;
  r.first = r.last = static_cast<std::size_t>(top - h.counts.begin());
  while (r.first > 0 && static_cast<double>(h.counts[r.first - 1]) > edge) --r.first;
  while (r.last + 1 < h.size() && static_cast<double>(h.counts[r.last + 1]) > edge) ++r.last;
  return r;
}

struct BackgroundEstimate {
  double mean = 0.0;        ///< counts per bin
  double std_error = 0.0;   ///< of the mean
  std::size_t n_bins = 0;
};

inline constexpr std::size_t min_background_bins = 50;

inline BackgroundEstimate estimate_background(const CoincidenceHistogram& h, TauWindow window) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h.bin_start[i] >= window.lo_ns && h.bin_start[i] < window.hi_ns) idx.push_back(i);
  require(idx.size() >= min_background_bins, ErrorCode::background_window,
          "background window holds " + std::to_string(idx.size()) +
              " bins; at least 50 are required");
  if (auto peak = detect_peak(h)) {
    const bool overlap = idx.front() <= peak->last && idx.back() >= peak->first;
    require(!overlap, ErrorCode::background_window,
            "background window overlaps the coincidence peak (bins " +
                std::to_string(peak->first) + ".." + std::to_string(peak->last) + ")");
  }
  double sum = 0.0;
  for (auto i : idx) sum += static_cast<double>(h.counts[i]);
  const double n = static_cast<double>(idx.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (auto i : idx) {
    const double d = static_cast<double>(h.counts[i]) - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / (n - 1.0) / n), idx.size()};
}

inline G2Curve to_g2(const CoincidenceHistogram& h, double background_counts_per_bin) {
  require(std::isfinite(background_counts_per_bin) && background_counts_per_bin > 0.0,
          ErrorCode::missing_background, "background level must be > 0");
  G2Curve c;
  c.tau_ns = h.bin_start;
  c.background_counts_per_bin = background_counts_per_bin;
  c.g2.resize(h.size());
  for (std::size_t i = 0; i < h.size(); ++i)
    c.g2[i] = static_cast<double>(h.counts[i]) / background_counts_per_bin;
  return c;
}

/// How the integration window around the coincidence peak is chosen: the
/// contiguous region around the peak where the moving-average g2 exceeds
/// 1 + sigma_multiplier * (background standard error / background).
struct SupportRule {
  std::size_t smoothing_bins = 5;
  double sigma_multiplier = 3.0;
};

struct PairRate {
  Rate rate;                ///< detected pairs per second
  std::size_t first_bin = 0;
  std::size_t last_bin = 0; ///< inclusive
  double excess_counts = 0.0;
};

/// Background-subtracted pair rate over bins [first, last]. Plain subtraction
/// (no clamping) so noise averages out.
inline PairRate detected_pair_rate(const CoincidenceHistogram& h, double background,
                                   std::size_t first, std::size_t last) {
  require(first <= last && last < h.size(), ErrorCode::invalid_parameter,
          "pair-rate window outside the histogram");
  double excess = 0.0;
  for (std::size_t i = first; i <= last; ++i)
    excess += static_cast<double>(h.counts[i]) - background;
  return {Rate{excess / h.accumulation_s, true}, first, last, excess};
}

inline PairRate detected_pair_rate(const CoincidenceHistogram& h,
                                   const BackgroundEstimate& bg,
                                   const SupportRule& rule = {}) {
  const auto g2 = to_g2(h, bg.mean);
  const std::size_t n = g2.g2.size();
  require(n > 0, ErrorCode::no_wavepacket, "no wave packet detected");
  const std::size_t half = rule.smoothing_bins / 2;
  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += g2.g2[j];
    smooth[i] = s / static_cast<double>(hi - lo + 1);
  }
  const double threshold = 1.0 + rule.sigma_multiplier * bg.std_error / bg.mean;
  const std::size_t peak =
      static_cast<std::size_t>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
  require(smooth[peak] > threshold, ErrorCode::no_wavepacket, "no wave packet detected");
  std::size_t first = peak;
  std::size_t last = peak;
  while (first > 0 && smooth[first - 1] > threshold) --first;
  while (last + 1 < n && smooth[last + 1] > threshold) ++last;
  return detected_pair_rate(h, bg.mean, first, last);
}

/// Test-data generator: a histogram whose expected counts are
///   pairs * (integral of shape over the bin / integral over the range) + background.
struct SyntheticHistogram {
  double t0_ns = -100.0;
  double bin_width_ns = 0.8;
  std::size_t n_bins = 2000;
  double accumulation_s = 120.0;
  double detected_pair_rate = 1000.0; ///< pairs/s
  double background_per_bin = 20.0;
  double singles_signal_per_s = 1e5;
  double singles_probe_per_s = 1e5;
  DetectionChain chain;
  bool saturation_corrected = true;
  bool poisson = true;          ///< false: expected counts rounded to nearest
  std::uint64_t seed = 1;
};

inline CoincidenceHistogram
synthesize_histogram(const SyntheticHistogram& spec, const std::function<double(double)>& shape) {
  CoincidenceHistogram h;
  h.bin_width_ns = spec.bin_width_ns;
  h.accumulation_s = spec.accumulation_s;
  h.singles_signal_per_s = spec.singles_signal_per_s;
  h.singles_probe_per_s = spec.singles_probe_per_s;
  h.chain = spec.chain;
  h.saturation_corrected = spec.saturation_corrected;

  // Simpson on 8 sub-intervals per bin
  constexpr int sub = 8;
  std::vector<double> mass(spec.n_bins);
  double total = 0.0;
  for (std::size_t i = 0; i < spec.n_bins; ++i) {
    const double a = spec.t0_ns + spec.bin_width_ns * static_cast<double>(i);
    const double step = spec.bin_width_ns / sub;
    double s = shape(a) + shape(a + spec.bin_width_ns);
    for (int k = 1; k < sub; ++k) s += (k % 2 ? 4.0 : 2.0) * shape(a + step * k);
    mass[i] = s * step / 3.0;
    total += mass[i];
    h.bin_start.push_back(a);
  }
  require(total > 0.0, ErrorCode::invalid_parameter, "synthetic shape has no weight");
  const double pairs = spec.detected_pair_rate * spec.accumulation_s;
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = 0; i < spec.n_bins; ++i) {
    const double expected = pairs * mass[i] / total + spec.background_per_bin;
    std::int64_t c = 0;
    if (spec.poisson) {
      std::poisson_distribution<std::int64_t> dist(expected);
      c = expected > 0.0 ? dist(rng) : 0;
    } else {
      c = static_cast<std::int64_t>(std::llround(expected));
    }
    h.counts.push_back(c);
  }
  h.validate();
  return h;
}

} // namespace biphoton
