#pragma once

// First-order perturbation signals.  With the interaction picture
// q_k = exp(j D_k z) b_k, the first Picard iterate of
//   d_z b_k = -j c sum_{l+m-n=k} b_l b_m b_n^* exp(j Omega_lmnk z)
// gives the FWM sum with kernel H(Omega)(z).  The trivial triples (l = k or
// m = k) sum to (2P - |q_k|^2) q_k with Omega = 0; the 2P part is kept as a
// phase.  All sums are O(N^3).

#include <kzpsd/error.hpp>
#include <kzpsd/kernels.hpp>
#include <kzpsd/link.hpp>
#include <kzpsd/nls.hpp>
#include <kzpsd/parallel.hpp>
#include <kzpsd/spectral.hpp>

#include <cmath>
#include <vector>

namespace kzpsd::perturbation {

namespace detail {

inline std::vector<double> phase_rates(const TimeGrid& grid, const LinkConfig& link) {
  std::vector<double> d(grid.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = link.dispersion().phase_rate(grid.omega(grid.mode_of(i)));
  return d;
}

// sum over l != k, m != k, n = l + m - k on the grid of w(l, m, n) q_l q_m q_n^*.
template <typename Weight>
cplx fwm_sum(const Spectrum& s, long k, Weight&& weight) {
  const TimeGrid& g = s.grid();
  const long lo = g.min_mode();
  const long hi = g.max_mode();
  cplx acc = 0.0;
  for (long l = lo; l <= hi; ++l) {
    if (l == k) continue;
    const cplx ql = s.at(l);
    if (ql == 0.0) continue;
    const long m_lo = std::max(lo, lo - l + k);
    const long m_hi = std::min(hi, hi - l + k);
    for (long m = m_lo; m <= m_hi; ++m) {
      if (m == k) continue;
      const long n = l + m - k;
      acc += weight(l, m, n) * ql * s.at(m) * std::conj(s.at(n));
    }
  }
  return acc;
}

inline void require_lossless(const LinkConfig& link, const char* where) {
  require(link.alpha() == 0.0 && !std::isfinite(link.span_length()),
          std::string(where) + ": needs a lossless link without amplification");
}

}  // namespace detail

/// Regular first-order signal at z:
///   exp(j (D_k - 2cP) z) [q_k + j c z |q_k|^2 q_k + c sum_{nr_k} H(Omega)(z) q_l q_m q_n^*].
inline Spectrum first_order_discrete(const Spectrum& s0, double z,
                                     const LinkConfig& link = LinkConfig::dimensionless()) {
  detail::require_lossless(link, "first_order_discrete");
  const TimeGrid& g = s0.grid();
  const double c = link.nonlinear_coeff();
  const double p = power(s0);
  const auto d = detail::phase_rates(g, link);
  auto rate = [&](long i) { return d[g.index_of(i)]; };

  Spectrum out(g);
  parallel_for(g.size(), [&](std::size_t i) {
    const long k = g.mode_of(i);
    const cplx qk = s0.at(k);
    const cplx fwm = detail::fwm_sum(s0, k, [&](long l, long m, long n) {
      return h_kernel(rate(l) + rate(m) - rate(n) - rate(k), z);
    });
    const cplx body = qk + 1i * c * z * std::norm(qk) * qk + c * fwm;
    out.at(k) = std::polar(1.0, (rate(k) - 2.0 * c * p) * z) * body;
  });
  return out;
}

/// Multiple-scale first-order signal: the secular self term becomes the phase
/// exp(j c |q_k|^2 z) and each FWM kernel is evaluated at the nonlinearly
/// shifted mismatch Omega + c (|q_l|^2 + |q_m|^2 - |q_n|^2 - |q_k|^2).
inline Spectrum first_order_multiscale(const Spectrum& s0, double z,
                                       const LinkConfig& link = LinkConfig::dimensionless()) {
  detail::require_lossless(link, "first_order_multiscale");
  const TimeGrid& g = s0.grid();
  const double c = link.nonlinear_coeff();
  const double p = power(s0);
  const auto d = detail::phase_rates(g, link);
  auto rate = [&](long i) { return d[g.index_of(i)] + c * std::norm(s0.at(i)); };

  Spectrum out(g);
  parallel_for(g.size(), [&](std::size_t i) {
    const long k = g.mode_of(i);
    const cplx fwm = detail::fwm_sum(s0, k, [&](long l, long m, long n) {
      return h_kernel(rate(l) + rate(m) - rate(n) - rate(k), z);
    });
    out.at(k) = std::polar(1.0, (rate(k) - 2.0 * c * p) * z) * (s0.at(k) + c * fwm);
  });
  return out;
}

/// Dimensionless overloads with j q_z = q_tt + 2 eps |q|^2 q.
inline Spectrum first_order_discrete(const Spectrum& s0, double z, double eps) {
  require(eps > 0.0, "first_order_discrete: eps must be positive");
  return first_order_discrete(s0, z, LinkConfig::dimensionless(eps));
}

inline Spectrum first_order_multiscale(const Spectrum& s0, double z, double eps) {
  require(eps > 0.0, "first_order_multiscale: eps must be positive");
  return first_order_multiscale(s0, z, LinkConfig::dimensionless(eps));
}

/// First-order signal at the end of a (multi-span) link, after the last
/// amplifier:
///   exp(j D_k z - F(z)/2) [q_k + c sum_{l+m-n=k} K(Omega) q_l q_m q_n^*],
/// where K is the link kernel (see LinkKernel) and the sum includes trivial
/// triples.
inline Spectrum first_order_multispan(const Spectrum& s0, const LinkConfig& link) {
  const TimeGrid& g = s0.grid();
  require(std::isfinite(link.span_length()), "first_order_multispan: link needs a finite span length");
  const double z = link.total_length();
  const double c = link.nonlinear_coeff();
  const LinkKernel kernel(link, z);
  const auto d = detail::phase_rates(g, link);
  auto rate = [&](long i) { return d[g.index_of(i)]; };

  Spectrum out(g);
  parallel_for(g.size(), [&](std::size_t i) {
    const long k = g.mode_of(i);
    const long lo = g.min_mode();
    const long hi = g.max_mode();
    cplx acc = 0.0;
    for (long l = lo; l <= hi; ++l) {
      const cplx ql = s0.at(l);
      if (ql == 0.0) continue;
      for (long m = std::max(lo, lo - l + k); m <= std::min(hi, hi - l + k); ++m) {
        const long n = l + m - k;
        acc += kernel(rate(l) + rate(m) - rate(n) - rate(k)) * ql * s0.at(m) * std::conj(s0.at(n));
      }
    }
    out.at(k) = std::polar(std::exp(-0.5 * kernel.output_loss()), rate(k) * z) * (s0.at(k) + c * acc);
  });
  return out;
}

/// ||a - b|| / ||b|| over spectra (equivalently signals, by Parseval).
inline double relative_error(const Spectrum& approx, const Spectrum& exact) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < exact.coeffs().size(); ++i) {
    num += std::norm(approx.coeffs()[i] - exact.coeffs()[i]);
    den += std::norm(exact.coeffs()[i]);
  }
  require(den > 0.0, "relative_error: reference signal is zero");
  return std::sqrt(num / den);
}

struct ErrorPoint {
  double amplitude = 0.0;
  double ratio_input = 0.0;      ///< Hamiltonian ratio a of the input
  double ratio = 0.0;            ///< Hamiltonian ratio a of the exact signal at z
  double error_regular = 0.0;    ///< ||q - q1|| / ||q|| for first_order_discrete
  double error_multiscale = 0.0; ///< same for first_order_multiscale
  double peak_exact = 0.0;       ///< max_t |q(t, z)|
  double peak_regular = 0.0;     ///< max_t |q1(t, z)|
};

/// Error of the first-order signals against the split-step oracle for the
/// pulse family A exp(-t^2/2).
inline std::vector<ErrorPoint> perturbation_error_curve(const TimeGrid& grid, const std::vector<double>& amplitudes,
                                                        double z, const LinkConfig& link = LinkConfig::dimensionless(),
                                                        const StepConfig& step = {}) {
  std::vector<ErrorPoint> out;
  for (double a : amplitudes) {
    const Signal input = gaussian_pulse(grid, a);
    const Spectrum s0 = forward_transform(input);
    const Signal exact = oracle::propagate(input, link, z, step);
    const Spectrum exact_spec = forward_transform(exact);
    const Spectrum regular = first_order_discrete(s0, z, link);
    const Spectrum multiscale = first_order_multiscale(s0, z, link);

    ErrorPoint p;
    p.amplitude = a;
    p.ratio_input = hamiltonian(input).ratio.value_or(0.0);
    p.ratio = hamiltonian(exact).ratio.value_or(0.0);
    p.error_regular = a == 0.0 ? 0.0 : relative_error(regular, exact_spec);
    p.error_multiscale = a == 0.0 ? 0.0 : relative_error(multiscale, exact_spec);
    p.peak_exact = std::sqrt(oracle::detail::peak_intensity(exact.samples()));
    p.peak_regular = std::sqrt(oracle::detail::peak_intensity(inverse_transform(regular).samples()));
    out.push_back(p);
  }
  return out;
}

}  // namespace kzpsd::perturbation
