#pragma once

// Thin FFTW wrapper.  Plans are created once per (size, direction), guarded by
// a mutex because the FFTW planner is not thread-safe; execution through the
// new-array interface is.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <utility>

namespace kzpsd::fft {

using cplx = std::complex<double>;

enum class Sign : int { Negative = FFTW_FORWARD, Positive = FFTW_BACKWARD };

namespace detail {

class PlanCache {
public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, Sign sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(n, static_cast<int>(sign));
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    // FFTW_ESTIMATE leaves the arrays untouched, so scratch buffers suffice.
    auto* in = fftw_alloc_complex(n);
    auto* out = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, static_cast<int>(sign),
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

}  // namespace detail

/// out[k] = sum_n in[n] exp(sign * 2 pi j k n / N), unnormalized.
inline void dft(std::span<const cplx> in, std::span<cplx> out, Sign sign) {
  const std::size_t n = in.size();
  fftw_plan plan = detail::PlanCache::instance().get(n, sign);
  // FFTW does not modify the input of an out-of-place complex transform.
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace kzpsd::fft
