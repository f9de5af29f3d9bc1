#pragma once

// Link description shared by the split-step oracle, the perturbation signals
// and the PSD models.  Every propagation in the library follows
//
//   d_z q_k = j D(w_k) q_k - (alpha/2) q_k - j c F(|q|^2 q)_k
//
// with lumped gain exp(G_n/2) on the amplitude at the end of span n.  D is the
// linear phase rate: D(w) = w^2 for the dimensionless equation
// j q_z = q_tt + 2|q|^2 q (c = 2), and D(w) = -beta(w) for the physical one
// (c = gamma).

#include <kzpsd/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace kzpsd {

class DispersionSpec {
public:
  enum class Kind { Quadratic, Polynomial };

  /// Dimensionless D(w) = w^2.
  static DispersionSpec quadratic() { return DispersionSpec(Kind::Quadratic, {}); }

  /// beta(w) = sum_n beta[n] w^n / n!, so beta = {b0, b1, b2} gives
  /// b0 + b1 w + (b2/2) w^2.  The phase rate is D(w) = -beta(w).
  static DispersionSpec polynomial(std::vector<double> beta) {
    for (double b : beta) require(std::isfinite(b), "DispersionSpec: non-finite coefficient");
    return DispersionSpec(Kind::Polynomial, std::move(beta));
  }

  Kind kind() const noexcept { return kind_; }
  const std::vector<double>& beta() const noexcept { return beta_; }

  /// beta(w); for the quadratic kind this is -w^2.
  double beta_at(double w) const {
    if (kind_ == Kind::Quadratic) return -w * w;
    double acc = 0.0;
    double power = 1.0;
    double factorial = 1.0;
    for (std::size_t n = 0; n < beta_.size(); ++n) {
      if (n > 0) {
        power *= w;
        factorial *= static_cast<double>(n);
      }
      acc += beta_[n] * power / factorial;
    }
    return acc;
  }

  /// Linear phase rate D(w) = -beta(w).
  double phase_rate(double w) const { return -beta_at(w); }

private:
  DispersionSpec(Kind kind, std::vector<double> beta) : kind_(kind), beta_(std::move(beta)) {}

  Kind kind_;
  std::vector<double> beta_;
};

class LinkConfig {
public:
  /// Dimensionless single-span lossless link j q_z = q_tt + 2 s eps |q|^2 q.
  static LinkConfig dimensionless(double eps = 1.0, int sign = +1) {
    require(sign == 1 || sign == -1, "LinkConfig: sign must be +1 or -1");
    return LinkConfig(0.0, 2.0 * eps * sign, DispersionSpec::quadratic(),
                      std::numeric_limits<double>::infinity(), 1);
  }

  /// Physical link with constant loss alpha (1/length), nonlinearity gamma
  /// (1/(power length)) and span_count spans of span_length.
  static LinkConfig physical(double alpha, double gamma, DispersionSpec dispersion,
                             double span_length, std::size_t span_count) {
    return LinkConfig(alpha, gamma, std::move(dispersion), span_length, span_count);
  }

  LinkConfig(double alpha, double nonlinear_coeff, DispersionSpec dispersion, double span_length,
             std::size_t span_count)
      : alpha_(alpha),
        coeff_(nonlinear_coeff),
        dispersion_(std::move(dispersion)),
        span_length_(span_length),
        span_count_(span_count) {
    require(std::isfinite(alpha) && alpha >= 0.0, "LinkConfig: alpha must be >= 0");
    require(std::isfinite(nonlinear_coeff), "LinkConfig: non-finite nonlinear coefficient");
    require(span_length > 0.0, "LinkConfig: span length must be positive");
    require(span_count >= 1, "LinkConfig: span count must be >= 1");
    require(span_count == 1 || std::isfinite(span_length),
            "LinkConfig: multi-span links need a finite span length");
  }

  double alpha() const noexcept { return alpha_; }
  /// Coefficient c of the cubic term; 2 for the dimensionless equation.
  double nonlinear_coeff() const noexcept { return coeff_; }
  const DispersionSpec& dispersion() const noexcept { return dispersion_; }
  double span_length() const noexcept { return span_length_; }
  std::size_t span_count() const noexcept { return span_count_; }
  double total_length() const noexcept { return span_length_ * static_cast<double>(span_count_); }

  /// Lumped power-gain exponent G_n at the end of span n (1-based).  Defaults
  /// to alpha * span_length, which exactly compensates the span loss.
  double gain(std::size_t span) const {
    require(span >= 1 && span <= span_count_, "LinkConfig: span index out of range");
    if (!gains_.empty()) return gains_[span - 1];
    return alpha_ * span_length_;
  }

  LinkConfig with_gains(std::vector<double> gains) const {
    require(gains.size() == span_count_, "LinkConfig: one gain per span required");
    LinkConfig copy = *this;
    copy.gains_ = std::move(gains);
    return copy;
  }

  LinkConfig with_nonlinear_coeff(double c) const {
    LinkConfig copy = *this;
    copy.coeff_ = c;
    return copy;
  }

  LinkConfig with_alpha(double alpha) const {
    require(std::isfinite(alpha) && alpha >= 0.0, "LinkConfig: alpha must be >= 0");
    LinkConfig copy = *this;
    copy.alpha_ = alpha;
    return copy;
  }

  /// Net power exponent F(z) = alpha z - sum of gains applied at or before z
  /// (a span end counts as post-amplifier).
  double loss_exponent(double z) const {
    if (!std::isfinite(span_length_)) return alpha_ * z;
    const auto completed = static_cast<std::size_t>(std::floor(z / span_length_ + 1e-12));
    double f = alpha_ * z;
    for (std::size_t n = 1; n <= std::min(completed, span_count_); ++n) f -= gain(n);
    return f;
  }

private:
  double alpha_;
  double coeff_;
  DispersionSpec dispersion_;
  double span_length_;
  std::size_t span_count_;
  std::vector<double> gains_;
};

struct StepConfig {
  double max_step = 1e-3;             ///< upper bound on the spatial step h
  double max_nonlinear_phase = 0.05;  ///< bound on |c| max|q|^2 h, in rad
  bool auto_refine = true;            ///< refine instead of refusing a coarse step
};

}  // namespace kzpsd
