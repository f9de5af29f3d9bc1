#pragma once

// Periodic time grids, signal/spectrum containers and the transform pair.
//
// Conventions used throughout the library:
//   * time samples t_n = (n - N/2) dt, n = 0..N-1, on the torus [-T/2, T/2);
//   * Fourier-series coefficients use the +j omega t forward kernel,
//       q_k = (1/T) int q(t) exp(+j k w0 t) dt,   q(t) = sum_k q_k exp(-j k w0 t),
//     with mode indices k = -N/2 .. N/2-1 stored in increasing order;
//   * coefficients carry amplitude units, so sum_k |q_k|^2 is the mean power.

#include <kzpsd/error.hpp>
#include <kzpsd/fft.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kzpsd {

using cplx = std::complex<double>;
using namespace std::complex_literals;

class TimeGrid {
public:
  TimeGrid(double period, std::size_t samples) : period_(period), samples_(samples) {
    require(std::isfinite(period) && period > 0.0, "TimeGrid: period must be positive");
    require(samples >= 4 && (samples & (samples - 1)) == 0,
            "TimeGrid: sample count must be a power of two >= 4");
  }

  double period() const noexcept { return period_; }
  std::size_t size() const noexcept { return samples_; }
  double dt() const noexcept { return period_ / static_cast<double>(samples_); }
  double omega0() const noexcept { return 2.0 * std::numbers::pi / period_; }

  long min_mode() const noexcept { return -static_cast<long>(samples_ / 2); }
  long max_mode() const noexcept { return static_cast<long>(samples_ / 2) - 1; }
  bool contains_mode(long k) const noexcept { return k >= min_mode() && k <= max_mode(); }
  std::size_t index_of(long k) const noexcept { return static_cast<std::size_t>(k - min_mode()); }
  long mode_of(std::size_t index) const noexcept { return static_cast<long>(index) + min_mode(); }
  double omega(long k) const noexcept { return omega0() * static_cast<double>(k); }
  double time(std::size_t n) const noexcept {
    return (static_cast<double>(n) - static_cast<double>(samples_ / 2)) * dt();
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
  double period_;
  std::size_t samples_;
};

/// Time-domain samples of a complex envelope on a TimeGrid.
class Signal {
public:
  explicit Signal(TimeGrid grid) : grid_(grid), samples_(grid.size()) {}
  Signal(TimeGrid grid, std::vector<cplx> samples) : grid_(grid), samples_(std::move(samples)) {
    require(samples_.size() == grid_.size(), "Signal: sample count does not match grid");
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::span<const cplx> samples() const noexcept { return samples_; }
  std::span<cplx> samples() noexcept { return samples_; }
  cplx operator[](std::size_t n) const { return samples_[n]; }
  cplx& operator[](std::size_t n) { return samples_[n]; }

private:
  TimeGrid grid_;
  std::vector<cplx> samples_;
};

/// Fourier-series coefficients q_k, k = -N/2 .. N/2-1.
class Spectrum {
public:
  explicit Spectrum(TimeGrid grid) : grid_(grid), coeffs_(grid.size()) {}
  Spectrum(TimeGrid grid, std::vector<cplx> coeffs) : grid_(grid), coeffs_(std::move(coeffs)) {
    require(coeffs_.size() == grid_.size(), "Spectrum: coefficient count does not match grid");
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::span<const cplx> coeffs() const noexcept { return coeffs_; }
  std::span<cplx> coeffs() noexcept { return coeffs_; }

  /// Coefficient of mode k; k must lie in the grid's mode range.
  cplx at(long k) const { return coeffs_[grid_.index_of(k)]; }
  cplx& at(long k) { return coeffs_[grid_.index_of(k)]; }

private:
  TimeGrid grid_;
  std::vector<cplx> coeffs_;
};

namespace detail {
inline double alternating_sign(long k) { return (k & 1) ? -1.0 : 1.0; }
}  // namespace detail

inline Spectrum forward_transform(const Signal& signal) {
  const TimeGrid& grid = signal.grid();
  const std::size_t n = grid.size();
  std::vector<cplx> raw(n);
  fft::dft(signal.samples(), raw, fft::Sign::Positive);
  Spectrum out(grid);
  const double scale = 1.0 / static_cast<double>(n);
  for (long k = grid.min_mode(); k <= grid.max_mode(); ++k) {
    const std::size_t wrapped = static_cast<std::size_t>((k + static_cast<long>(n)) % static_cast<long>(n));
    // exp(+j k w0 t_n) = (-1)^k exp(+2 pi j k n / N) for t_n = (n - N/2) dt
    out.at(k) = raw[wrapped] * (scale * detail::alternating_sign(k));
  }
  return out;
}

inline Signal inverse_transform(const Spectrum& spectrum) {
  const TimeGrid& grid = spectrum.grid();
  const std::size_t n = grid.size();
  std::vector<cplx> wrapped(n);
  for (long k = grid.min_mode(); k <= grid.max_mode(); ++k) {
    wrapped[static_cast<std::size_t>((k + static_cast<long>(n)) % static_cast<long>(n))] =
        spectrum.at(k) * detail::alternating_sign(k);
  }
  Signal out(grid);
  fft::dft(wrapped, out.samples(), fft::Sign::Negative);
  return out;
}

/// Mean power P = ||q||^2 / T = sum_k |q_k|^2.
inline double power(const Spectrum& spectrum) {
  double acc = 0.0;
  for (const cplx& c : spectrum.coeffs()) acc += std::norm(c);
  return acc;
}

/// Signal energy int |q|^2 dt over one period.
inline double energy(const Signal& signal) {
  double acc = 0.0;
  for (const cplx& c : signal.samples()) acc += std::norm(c);
  return acc * signal.grid().dt();
}

struct HamiltonianParts {
  double linear = 0.0;     ///< int |d_t q|^2 dt, by spectral differentiation
  double nonlinear = 0.0;  ///< int |q|^4 dt
  /// nonlinear / linear; empty when the linear part vanishes (e.g. zero signal).
  std::optional<double> ratio;
};

inline HamiltonianParts hamiltonian(const Signal& signal) {
  const TimeGrid& grid = signal.grid();
  const Spectrum spectrum = forward_transform(signal);
  HamiltonianParts parts;
  for (long k = grid.min_mode(); k <= grid.max_mode(); ++k) {
    const double w = grid.omega(k);
    parts.linear += w * w * std::norm(spectrum.at(k));
  }
  parts.linear *= grid.period();
  for (const cplx& c : signal.samples()) parts.nonlinear += std::norm(c) * std::norm(c);
  parts.nonlinear *= grid.dt();
  if (parts.linear > 0.0) parts.ratio = parts.nonlinear / parts.linear;
  return parts;
}

/// Per-mode nonnegative spectral density S_k (power per mode), k = -N/2 .. N/2-1.
class Psd {
public:
  explicit Psd(TimeGrid grid) : grid_(grid), values_(grid.size(), 0.0) {}
  Psd(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    require(values_.size() == grid_.size(), "Psd: value count does not match grid");
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double at(long k) const { return values_[grid_.index_of(k)]; }
  double& at(long k) { return values_[grid_.index_of(k)]; }

  /// S_k if k is on the grid, else 0 (finite-band truncation).
  double value_or_zero(long k) const { return grid_.contains_mode(k) ? at(k) : 0.0; }

  double total() const {
    double acc = 0.0;
    for (double v : values_) acc += v;
    return acc;
  }

  bool nonnegative() const {
    for (double v : values_)
      if (!(v >= 0.0)) return false;
    return true;
  }

private:
  TimeGrid grid_;
  std::vector<double> values_;
};

/// |q_k|^2 per mode.
inline Psd periodogram(const Spectrum& spectrum) {
  Psd out(spectrum.grid());
  for (std::size_t i = 0; i < spectrum.coeffs().size(); ++i) out.values()[i] = std::norm(spectrum.coeffs()[i]);
  return out;
}

/// Samples amplitude * exp(-t^2 / 2).  The grid must be wide enough that the
/// pulse amplitude at the torus boundary is below 1e-12 of the peak.
inline Signal gaussian_pulse(const TimeGrid& grid, cplx amplitude) {
  const double half = 0.5 * grid.period();
  require(std::exp(-0.5 * half * half) < 1e-12,
          "gaussian_pulse: grid period too short, boundary amplitude exceeds 1e-12");
  Signal out(grid);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const double t = grid.time(n);
    out[n] = amplitude * std::exp(-0.5 * t * t);
  }
  return out;
}

}  // namespace kzpsd
