#pragma once

// Thin RAII wrapper over FFTW's complex forward transform.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "error.hpp"

namespace biphoton {

namespace detail {
// the FFTW planner is not re-entrant; plan execution is
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
} // namespace detail

/// In-place forward DFT  X[m] = sum_k x[k] exp(-2 pi i k m / n).
inline void forward_dft(std::span<std::complex<double>> data) {
  const int n = static_cast<int>(data.size());
  if (n == 0) return;
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan = nullptr;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    // FFTW_ESTIMATE never touches the data and picks the same plan every time
    plan = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  require(plan != nullptr, ErrorCode::non_finite, "FFTW failed to create a plan");
  fftw_execute(plan);
  std::lock_guard lock(detail::fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

} // namespace biphoton
