#pragma once

// Symmetric split-step (Strang) integration of the NLS equation described in
// link.hpp.  This is the ground truth every analytic model is checked against.

#include <kzpsd/error.hpp>
#include <kzpsd/fft.hpp>
#include <kzpsd/link.hpp>
#include <kzpsd/parallel.hpp>
#include <kzpsd/spectral.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace kzpsd::oracle {

namespace detail {

inline void check_finite(std::span<const cplx> values, const char* where) {
  for (const cplx& v : values)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw NumericalError(std::string(where) + ": non-finite sample");
}

inline double peak_intensity(std::span<const cplx> values) {
  double peak = 0.0;
  for (const cplx& v : values) peak = std::max(peak, std::norm(v));
  return peak;
}

// Strang splitting over one fiber segment of length `length`, no lumped gain.
class SplitStepper {
public:
  SplitStepper(const TimeGrid& grid, const LinkConfig& link)
      : grid_(grid), link_(link), rates_(grid.size()), freq_(grid.size()) {
    const long n = static_cast<long>(grid.size());
    for (long i = 0; i < n; ++i) {
      const long k = i < n / 2 ? i : i - n;  // raw FFT order
      rates_[static_cast<std::size_t>(i)] = link.dispersion().phase_rate(grid.omega(k));
    }
  }

  // Returns false if the nonlinear phase bound was violated (only when
  // `enforce` is set); the samples are then left in an unspecified state.
  bool run(std::span<cplx> samples, double length, std::size_t steps, double max_phase, bool enforce) {
    const double h = length / static_cast<double>(steps);
    const auto half = linear_factors(0.5 * h);
    const auto full = linear_factors(h);
    apply_linear(samples, half);
    for (std::size_t s = 0; s < steps; ++s) {
      if (!apply_nonlinear(samples, h, max_phase, enforce)) return false;
      apply_linear(samples, s + 1 == steps ? half : full);
    }
    return true;
  }

private:
  std::vector<cplx> linear_factors(double h) const {
    std::vector<cplx> f(rates_.size());
    const double scale = 1.0 / static_cast<double>(rates_.size());
    for (std::size_t i = 0; i < rates_.size(); ++i) f[i] = std::polar(scale, rates_[i] * h);
    return f;
  }

  void apply_linear(std::span<cplx> samples, const std::vector<cplx>& factors) {
    fft::dft(samples, freq_, fft::Sign::Positive);
    for (std::size_t i = 0; i < freq_.size(); ++i) freq_[i] *= factors[i];
    fft::dft(freq_, samples, fft::Sign::Negative);
  }

  // Exact solution of q' = -(alpha/2) q - j c |q|^2 q over h.
  bool apply_nonlinear(std::span<cplx> samples, double h, double max_phase, bool enforce) {
    const double alpha = link_.alpha();
    const double c = link_.nonlinear_coeff();
    const double effective = alpha > 0.0 ? -std::expm1(-alpha * h) / alpha : h;
    const double decay = std::exp(-0.5 * alpha * h);
    const double peak = peak_intensity(samples);
    if (!std::isfinite(peak)) throw NumericalError("propagate: non-finite sample");
    if (enforce && std::abs(c) * peak * effective > max_phase) return false;
    for (cplx& v : samples) v *= std::polar(decay, -c * std::norm(v) * effective);
    return true;
  }

  TimeGrid grid_;
  const LinkConfig& link_;
  std::vector<double> rates_;
  std::vector<cplx> freq_;
};

inline void propagate_segment(std::span<cplx> samples, const TimeGrid& grid, const LinkConfig& link,
                              double length, const StepConfig& step) {
  if (length <= 0.0) return;
  require(step.max_step > 0.0 && step.max_nonlinear_phase > 0.0, "StepConfig: bounds must be positive");
  const double c = std::abs(link.nonlinear_coeff());
  std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(length / step.max_step - 1e-9)));
  const double peak = peak_intensity(samples);
  if (c > 0.0 && c * peak * length / static_cast<double>(steps) > step.max_nonlinear_phase) {
    if (!step.auto_refine)
      throw StepTooCoarse("propagate: nonlinear phase per step exceeds bound; reduce max_step");
    steps = static_cast<std::size_t>(std::ceil(c * peak * length / step.max_nonlinear_phase));
  }

  constexpr std::size_t max_steps = std::size_t{1} << 26;
  SplitStepper stepper(grid, link);
  const std::vector<cplx> initial(samples.begin(), samples.end());
  while (true) {
    if (stepper.run(samples, length, steps, step.max_nonlinear_phase, c > 0.0)) return;
    if (!step.auto_refine)
      throw StepTooCoarse("propagate: nonlinear phase per step exceeded bound during propagation");
    steps *= 2;
    if (steps > max_steps) throw NumericalError("propagate: step refinement limit reached");
    std::copy(initial.begin(), initial.end(), samples.begin());
  }
}

}  // namespace detail

/// q(., z) over a distance z of fiber without lumped amplification.
inline Signal propagate(const Signal& signal, const LinkConfig& link, double z, const StepConfig& step = {}) {
  require(std::isfinite(z) && z >= 0.0, "propagate: z must be finite and >= 0");
  detail::check_finite(signal.samples(), "propagate");
  Signal out = signal;
  detail::propagate_segment(out.samples(), out.grid(), link, z, step);
  return out;
}

/// Propagates a distance z from the link input, applying the lumped gain
/// exp(G_n / 2) at each span end reached (z >= n * span_length).
inline Signal propagate_to(const Signal& signal, const LinkConfig& link, double z, const StepConfig& step = {}) {
  require(std::isfinite(z) && z >= 0.0, "propagate: z must be finite and >= 0");
  detail::check_finite(signal.samples(), "propagate");
  if (!std::isfinite(link.span_length())) return propagate(signal, link, z, step);
  require(z <= link.total_length() * (1.0 + 1e-12), "propagate: z beyond the link end");

  Signal out = signal;
  double position = 0.0;
  for (std::size_t span = 1; span <= link.span_count(); ++span) {
    const double span_end = link.span_length() * static_cast<double>(span);
    const double target = std::min(z, span_end);
    detail::propagate_segment(out.samples(), out.grid(), link, target - position, step);
    position = target;
    if (z >= span_end * (1.0 - 1e-12)) {
      const double g = std::exp(0.5 * link.gain(span));
      for (cplx& v : out.samples()) v *= g;
    }
    if (position >= z) break;
  }
  return out;
}

/// Full multi-span link, ending after the last amplifier.
inline Signal propagate_spans(const Signal& signal, const LinkConfig& link, const StepConfig& step = {}) {
  require(std::isfinite(link.span_length()), "propagate_spans: link needs a finite span length");
  return propagate_to(signal, link, link.total_length(), step);
}

struct ModeTrajectory {
  std::vector<double> z;
  std::vector<long> modes;
  std::vector<std::vector<double>> magnitude;  ///< magnitude[i][j] = |q_{modes[j]}(z[i])|
  std::vector<double> power;                   ///< sum_k |q_k(z[i])|^2
};

/// Per-mode magnitudes |q_k(z)| at increasing distances (no lumped gain).
inline ModeTrajectory mode_trajectory(const Signal& signal, const LinkConfig& link,
                                      std::span<const double> z_samples, std::span<const long> modes,
                                      const StepConfig& step = {}) {
  for (long k : modes) require(signal.grid().contains_mode(k), "mode_trajectory: mode outside grid");
  for (std::size_t i = 0; i < z_samples.size(); ++i) {
    require(z_samples[i] >= 0.0, "mode_trajectory: z must be >= 0");
    if (i > 0) require(z_samples[i] > z_samples[i - 1], "mode_trajectory: z samples must increase");
  }

  ModeTrajectory out;
  out.modes.assign(modes.begin(), modes.end());
  Signal current = signal;
  double position = 0.0;
  for (double z : z_samples) {
    current = propagate(current, link, z - position, step);
    position = z;
    const Spectrum spec = forward_transform(current);
    std::vector<double> row;
    row.reserve(modes.size());
    for (long k : modes) row.push_back(std::abs(spec.at(k)));
    out.z.push_back(z);
    out.magnitude.push_back(std::move(row));
    out.power.push_back(power(spec));
  }
  return out;
}

using Rng = std::mt19937_64;

/// Draws one input spectrum; must depend only on the generator it is given.
using Sampler = std::function<Spectrum(Rng&)>;

/// Generator for realization `index`, independent of scheduling.
inline Rng realization_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

/// Zero-mean circular complex Gaussian modes with E|q_k|^2 = S0_k.
inline Sampler gaussian_process_sampler(const Psd& s0) {
  require(s0.nonnegative(), "gaussian_process_sampler: PSD must be nonnegative");
  return [s0](Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Spectrum out(s0.grid());
    for (std::size_t i = 0; i < out.coeffs().size(); ++i) {
      const double scale = std::sqrt(0.5 * s0.values()[i]);
      const double re = normal(rng);
      const double im = normal(rng);
      out.coeffs()[i] = scale * cplx(re, im);
    }
    return out;
  };
}

/// Output spectra of R independent realizations propagated to z (with the
/// lumped gains of any span ends reached).
inline std::vector<Spectrum> simulate_ensemble(const Sampler& sampler, const LinkConfig& link, double z,
                                               std::size_t realizations, std::uint64_t seed,
                                               const StepConfig& step = {}) {
  std::vector<std::optional<Spectrum>> slots(realizations);
  parallel_for(realizations, [&](std::size_t r) {
    try {
      Rng rng = realization_rng(seed, r);
      const Spectrum input = sampler(rng);
      slots[r] = forward_transform(propagate_to(inverse_transform(input), link, z, step));
    } catch (const std::exception& e) {
      throw RealizationError(r, e.what());
    }
  });
  std::vector<Spectrum> out;
  out.reserve(realizations);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct MonteCarloPsd {
  Psd mean;
  std::vector<double> std_error;  ///< standard error of the mean per mode
  std::size_t realizations = 0;
};

/// Mean and standard error of |q_k|^2 over an ensemble of spectra, reduced in
/// fixed realization order.
inline MonteCarloPsd summarize_psd(std::span<const Spectrum> ensemble) {
  require(ensemble.size() >= 2, "summarize_psd: need at least two realizations");
  const TimeGrid grid = ensemble.front().grid();
  const std::size_t n = grid.size();
  const std::size_t r = ensemble.size();
  MonteCarloPsd out{Psd(grid), std::vector<double>(n), r};
  std::vector<double> column(r);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < r; ++j) column[j] = std::norm(ensemble[j].coeffs()[i]);
    const double mean = pairwise_sum(std::span<const double>(column)) / static_cast<double>(r);
    for (std::size_t j = 0; j < r; ++j) column[j] = (column[j] - mean) * (column[j] - mean);
    const double var = pairwise_sum(std::span<const double>(column)) / static_cast<double>(r - 1);
    out.mean.values()[i] = mean;
    out.std_error[i] = std::sqrt(var / static_cast<double>(r));
  }
  return out;
}

/// Monte-Carlo PSD at z: per-mode mean of |q_k(z)|^2 with standard error.
inline MonteCarloPsd estimate_psd_mc(const Sampler& sampler, const LinkConfig& link, double z,
                                     std::size_t realizations, std::uint64_t seed, const StepConfig& step = {}) {
  require(realizations >= 2, "estimate_psd_mc: need at least two realizations");
  const auto ensemble = simulate_ensemble(sampler, link, z, realizations, seed, step);
  return summarize_psd(ensemble);
}

/// Ensemble Hamiltonian ratio: mean nonlinear part over mean linear part.
inline double ensemble_hamiltonian_ratio(std::span<const Spectrum> ensemble) {
  require(!ensemble.empty(), "ensemble_hamiltonian_ratio: empty ensemble");
  std::vector<double> lin(ensemble.size()), nl(ensemble.size());
  for (std::size_t j = 0; j < ensemble.size(); ++j) {
    const HamiltonianParts h = hamiltonian(inverse_transform(ensemble[j]));
    lin[j] = h.linear;
    nl[j] = h.nonlinear;
  }
  const double l = pairwise_sum(std::span<const double>(lin));
  require(l > 0.0, "ensemble_hamiltonian_ratio: vanishing linear part");
  return pairwise_sum(std::span<const double>(nl)) / l;
}

}  // namespace kzpsd::oracle
