#include <biphoton/analysis.hpp>
#include <biphoton/ingest.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unistd.h>

using namespace biphoton;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("biphoton_ingest_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
  static inline int counter_ = 0;
};

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

const char* full_meta =
    "bin_width_ns = 0.8\naccumulation_s = 120\nsingles_signal_per_s = 1e5\n"
    "singles_probe_per_s = 2e5\nd_s = 0.13\nd_p = 0.094\nfiber_factor = 1.9\n"
    "saturation_corrected = true\n";

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CoincidenceHistogram flat(std::int64_t level, std::size_t n = 800) {
  CoincidenceHistogram h;
  for (std::size_t i = 0; i < n; ++i) {
    h.bin_start.push_back(-200.0 + 0.8 * static_cast<double>(i));
    h.counts.push_back(level);
  }
  h.saturation_corrected = true;
  return h;
}

double gaussian_shape(double t) { return std::exp(-t * t / (2 * 27.0 * 27.0)); }

ErrorCode load_code(const fs::path& p) {
  try {
    load_histogram(p);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::usage;
}

} // namespace

TEST(LoadHistogram, TwoBins) {
  TempDir d;
  write(d.path() / "h.csv", "tau_ns,counts\n0.0,5\n0.8,7\n");
  write(d.path() / "h.meta", full_meta);
  const auto h = load_histogram(d.path() / "h.csv");
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h.counts[1], 7);
  EXPECT_EQ(h.chain.d_p, 0.094);
  EXPECT_TRUE(h.saturation_corrected);
}

TEST(LoadHistogram, NonUniformBins) {
  TempDir d;
  write(d.path() / "h.csv", "tau_ns,counts\n0.0,5\n1.0,7\n");
  write(d.path() / "h.meta", full_meta);
  EXPECT_EQ(load_code(d.path() / "h.csv"), ErrorCode::parse);
}

TEST(LoadHistogram, MalformedRowNamesLine) {
  TempDir d;
  write(d.path() / "h.csv", "tau_ns,counts\n0.0,5\n0.8,x\n");
  write(d.path() / "h.meta", full_meta);
  try {
    load_histogram(d.path() / "h.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse);
    EXPECT_NE(std::string(e.what()).find("h.csv:3"), std::string::npos) << e.what();
  }
}

TEST(LoadHistogram, MissingMetaKeyNamed) {
  TempDir d;
  write(d.path() / "h.csv", "tau_ns,counts\n0.0,5\n0.8,7\n");
  std::string meta = full_meta;
  meta.erase(meta.find("d_p"), meta.find("fiber_factor") - meta.find("d_p"));
  write(d.path() / "h.meta", meta);
  try {
    load_histogram(d.path() / "h.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse);
    EXPECT_NE(std::string(e.what()).find("'d_p'"), std::string::npos) << e.what();
  }
}

TEST(LoadHistogram, OtherErrors) {
  TempDir d;
  write(d.path() / "a.csv", "time,counts\n0.0,5\n");
  write(d.path() / "a.meta", full_meta);
  EXPECT_EQ(load_code(d.path() / "a.csv"), ErrorCode::parse);
  write(d.path() / "b.csv", "tau_ns,counts\n0.0,-5\n");
  write(d.path() / "b.meta", full_meta);
  EXPECT_EQ(load_code(d.path() / "b.csv"), ErrorCode::parse);
  write(d.path() / "c.csv", "tau_ns,counts\n0.0,5\n");
  write(d.path() / "c.meta", std::string(full_meta) + "colour = blue\n");
  EXPECT_EQ(load_code(d.path() / "c.csv"), ErrorCode::parse);
  write(d.path() / "e.csv", "tau_ns,counts\n0.0,5\n");
  EXPECT_EQ(load_code(d.path() / "e.csv"), ErrorCode::io);
  EXPECT_EQ(load_code(d.path() / "missing.csv"), ErrorCode::io);
}

TEST(LoadHistogram, RoundTripBitIdentical) {
  TempDir d;
  SyntheticHistogram spec;
  spec.n_bins = 300;
  const auto h = synthesize_histogram(spec, gaussian_shape);
  save_histogram(h, d.path() / "a.csv");
  const auto back = load_histogram(d.path() / "a.csv");
  save_histogram(back, d.path() / "b.csv");
  EXPECT_EQ(read_all(d.path() / "a.csv"), read_all(d.path() / "b.csv"));
  EXPECT_EQ(read_all(d.path() / "a.meta"), read_all(d.path() / "b.meta"));
  EXPECT_EQ(back.counts, h.counts);
  EXPECT_EQ(back.bin_start, h.bin_start);
}

TEST(Background, ConstantHistogram) {
  const auto h = flat(17);
  const auto bg = estimate_background(h, {-150.0, 0.0});
  EXPECT_EQ(bg.mean, 17.0);
  EXPECT_EQ(bg.std_error, 0.0);
}

TEST(Background, PoissonFlat) {
  SyntheticHistogram spec;
  spec.n_bins = 500;
  spec.detected_pair_rate = 0.0;
  spec.background_per_bin = 20.0;
  spec.seed = 7;
  const auto h = synthesize_histogram(spec, [](double) { return 1.0; });
  const auto bg = estimate_background(h, {-1e9, 1e9});
  EXPECT_EQ(bg.n_bins, 500u);
  EXPECT_NEAR(bg.mean, 20.0, 3.0 * bg.std_error);
  EXPECT_NEAR(bg.std_error, std::sqrt(20.0 / 500.0), 0.2 * std::sqrt(20.0 / 500.0));
}

TEST(Background, WindowErrors) {
  SyntheticHistogram spec;
  spec.poisson = false;
  const auto h = synthesize_histogram(spec, gaussian_shape);
  try {
    estimate_background(h, {-50.0, 50.0}); // straddles the peak at 0
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::background_window);
  }
  try {
    estimate_background(h, {1000.0, 1020.0}); // 25 bins
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::background_window);
  }
}

TEST(ToG2, Examples) {
  const auto h = flat(20, 100);
  for (double v : to_g2(h, 20.0).g2) EXPECT_EQ(v, 1.0);
  auto peaked = flat(20, 100);
  peaked.counts[40] = 268;
  EXPECT_NEAR(sbr_from_g2(to_g2(peaked, 20.0)), 12.4, 1e-12);
  EXPECT_DOUBLE_EQ(to_g2(peaked, 20.0).g2[40], 13.4);
  try {
    to_g2(h, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::missing_background);
  }
}

TEST(ToG2, NoiselessFlatIsExactlyOne) {
  const auto h = flat(33);
  const auto bg = estimate_background(h, default_background_window(h));
  const auto g = to_g2(h, bg.mean);
  for (double v : g.g2) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(sbr_from_g2(g), 0.0);
}

TEST(PairRate, FlatIsZeroOrNoWavepacket) {
  const auto h = flat(20);
  const auto bg = estimate_background(h, default_background_window(h));
  EXPECT_EQ(detected_pair_rate(h, bg.mean, 0, h.size() - 1).rate.value, 0.0);
  try {
    detected_pair_rate(h, bg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_wavepacket);
  }
}

TEST(PairRate, RecoversInjectedArea) {
  SyntheticHistogram spec;
  spec.detected_pair_rate = 2187.7;
  spec.background_per_bin = 250.0;
  spec.seed = 11;
  const auto h = synthesize_histogram(spec, gaussian_shape);
  const auto bg = estimate_background(h, default_background_window(h));
  const auto r = detected_pair_rate(h, bg);
  EXPECT_NEAR(r.rate.value, 2187.7, 0.01 * 2187.7);
}

TEST(PairRate, AccumulationLinearity) {
  SyntheticHistogram spec;
  spec.poisson = false;
  auto h = synthesize_histogram(spec, gaussian_shape);
  const auto bg = estimate_background(h, default_background_window(h));
  const auto r1 = detected_pair_rate(h, bg);
  h.accumulation_s *= 2.0;
  const auto r2 = detected_pair_rate(h, bg);
  EXPECT_EQ(r2.rate.value, r1.rate.value / 2.0);
}

TEST(PairRate, ConstantOffsetInvariant) {
  SyntheticHistogram spec;
  spec.poisson = false;
  auto h = synthesize_histogram(spec, gaussian_shape);
  const auto bg = estimate_background(h, default_background_window(h));
  const auto r1 = detected_pair_rate(h, bg);
  for (auto& c : h.counts) c += 37;
  const auto bg2 = estimate_background(h, default_background_window(h));
  const auto r2 = detected_pair_rate(h, bg2);
  EXPECT_EQ(r2.first_bin, r1.first_bin);
  EXPECT_EQ(r2.last_bin, r1.last_bin);
  EXPECT_NEAR(r2.rate.value, r1.rate.value, 1e-9 * r1.rate.value);
}

TEST(Chain, RecoversGenerationRateAtOneMillionPairs) {
  // 1e6 pairs over 120 s, Poisson background
  const double r_g_true = 1e6 / 120.0 / (0.13 * 0.094);
  SyntheticHistogram spec;
  spec.detected_pair_rate = r_g_true * 0.13 * 0.094;
  spec.background_per_bin = 400.0;
  spec.n_bins = 3000;
  spec.t0_ns = -400.0;
  spec.seed = 3;
  const auto h = synthesize_histogram(spec, gaussian_shape);
  const auto a = analyze_histogram(h);
  ASSERT_TRUE(a.generated);
  EXPECT_NEAR(a.generated->fiber.value, r_g_true, 0.02 * r_g_true);
  EXPECT_NEAR(a.generated->cell.value, 1.9 * a.generated->fiber.value, 1e-9 * r_g_true);
}

TEST(Analysis, UncorrectedRatesRefused) {
  SyntheticHistogram spec;
  spec.saturation_corrected = false;
  const auto h = synthesize_histogram(spec, gaussian_shape);
  try {
    analyze_histogram(h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::uncorrected_rates);
  }
  AnalyzeOptions arb;
  arb.absolute_rates = false;
  const auto a = analyze_histogram(h, arb);
  ASSERT_TRUE(a.generated);
  EXPECT_FALSE(a.generated->fiber.calibrated);
}

TEST(Analysis, FlatGivesZeroSbrAndWarning) {
  const auto a = analyze_histogram(flat(20));
  EXPECT_EQ(a.sbr, 0.0);
  ASSERT_EQ(a.warnings.size(), 1u);
  EXPECT_EQ(a.warnings[0], "NO_WAVEPACKET");
  EXPECT_FALSE(a.detected);
}
