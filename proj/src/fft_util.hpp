#pragma once

#include <mutex>

#include <fftw3.h>

namespace fpv::detail {

// FFTW's planner is not re-entrant; executing a finished plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwPlan {
  fftw_plan plan = nullptr;
  FftwPlan() = default;
  explicit FftwPlan(fftw_plan p) : plan(p) {}
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  ~FftwPlan() {
    if (plan != nullptr) {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
inline int fft_friendly_size(int n) {
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

}  // namespace fpv::detail
