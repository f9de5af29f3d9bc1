#pragma once

// Phase-mismatch kernels.  Mismatches Omega passed to h_kernel and to
// LinkKernel use the phase-rate convention of link.hpp,
//   Omega = D_l + D_m - D_n - D_k,
// while h_kernel_lossy and g_factor take the beta-based mismatch
// beta_l + beta_m - beta_n - beta_k = -Omega used for physical links.

#include <kzpsd/error.hpp>
#include <kzpsd/link.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace kzpsd {

using cplx = std::complex<double>;
using namespace std::complex_literals;

namespace detail {

// (1 - exp(-s)) / s, with a Taylor branch near s = 0.
inline cplx one_minus_exp_over(cplx s) {
  if (std::abs(s) < 1e-4) {
    return 1.0 - s / 2.0 + s * s / 6.0 - s * s * s / 24.0 + s * s * s * s / 120.0;
  }
  // 1 - exp(-a - jb) written to avoid cancellation for small a or b.
  const double a = s.real();
  const double b = s.imag();
  const double half = std::sin(0.5 * b);
  const cplx num(2.0 * half * half - std::cos(b) * std::expm1(-a), std::exp(-a) * std::sin(b));
  return num / s;
}

}  // namespace detail

/// H(Omega)(z) = (1 - exp(j Omega z)) / Omega = -j int_0^z exp(j Omega l) dl.
inline cplx h_kernel(double omega, double z) {
  const cplx s(0.0, -omega * z);
  return -1i * z * detail::one_minus_exp_over(s);
}

/// |H(Omega)(z)|^2 = 4 sin^2(Omega z / 2) / Omega^2, z^2 at Omega = 0.
inline double h_kernel_norm(double omega, double z) {
  const double x = 0.5 * omega * z;
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return z * z * (1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 45.0);
  }
  const double s = std::sin(x) / x;
  return z * z * s * s;
}

/// -j int_0^z exp(-(alpha + j omega) l) dl.  This is the paper's
/// H(j alpha - omega)(z); at alpha = 0 it equals h_kernel(-omega, z).
inline cplx h_kernel_lossy(double alpha, double omega, double z) {
  require(alpha >= 0.0, "h_kernel_lossy: alpha must be >= 0");
  const cplx s(alpha * z, omega * z);
  return -1i * z * detail::one_minus_exp_over(s);
}

/// G = sum_{n=0}^{spans-1} exp(-j n span omega), in closed form away from the
/// poles omega * span = 2 pi m.
inline cplx g_factor(double omega, double span, std::size_t spans) {
  require(spans >= 1, "g_factor: span count must be >= 1");
  const cplx den = 1.0 - std::exp(cplx(0.0, -span * omega));
  if (std::abs(den) < 1e-6) {
    cplx acc = 0.0;
    for (std::size_t n = 0; n < spans; ++n)
      acc += std::exp(cplx(0.0, -static_cast<double>(n) * span * omega));
    return acc;
  }
  return (1.0 - std::exp(cplx(0.0, -static_cast<double>(spans) * span * omega))) / den;
}

/// Interaction kernel of a link at distance z,
///   K(Omega) = -j int_0^z exp(-F(l)) exp(j Omega l) dl,
/// with F the net loss exponent of the link.  Model outputs at z carry the
/// overall factor exp(-F(z)).
class LinkKernel {
public:
  LinkKernel(const LinkConfig& link, double z) : alpha_(link.alpha()), z_(z) {
    require(std::isfinite(z) && z >= 0.0, "LinkKernel: z must be finite and >= 0");
    if (!std::isfinite(link.span_length())) {
      pieces_.push_back({0.0, z, 0.0});
    } else {
      require(z <= link.total_length() * (1.0 + 1e-12), "LinkKernel: z beyond the link end");
      const double span = link.span_length();
      double start = 0.0;
      for (std::size_t n = 0; n < link.span_count() && start < z; ++n) {
        const double length = std::min(span, z - start);
        // F just after the amplifier closing span n (n = 0: link input).
        pieces_.push_back({start, length, link.loss_exponent(start)});
        start += span;
      }
      if (pieces_.size() > 1 && pieces_.back().length <= 1e-12 * span) pieces_.pop_back();
    }
    output_loss_ = link.loss_exponent(z);
  }

  cplx operator()(double omega) const {
    cplx acc = 0.0;
    for (const Piece& p : pieces_)
      acc += std::exp(cplx(-p.loss, omega * p.start)) * h_kernel_lossy(alpha_, -omega, p.length);
    return acc;
  }

  double norm(double omega) const {
    if (alpha_ == 0.0 && pieces_.size() == 1) return h_kernel_norm(omega, z_);
    return std::norm((*this)(omega));
  }

  /// F(z); model outputs are scaled by exp(-F(z)).
  double output_loss() const noexcept { return output_loss_; }
  double distance() const noexcept { return z_; }

private:
  struct Piece {
    double start;
    double length;
    double loss;
  };
  double alpha_;
  double z_;
  double output_loss_ = 0.0;
  std::vector<Piece> pieces_;
};

}  // namespace kzpsd
