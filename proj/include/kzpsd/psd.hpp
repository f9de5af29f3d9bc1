#pragma once

// GN and KZ power spectral densities.  For a link with interaction kernel K
// (see LinkKernel) and nonlinear coefficient c, both models read
//   S_k(z) = exp(-F(z)) (S0_k + 2 c^2 sum_{nr_k} |K(Omega_lmnk)|^2 X_lmnk)
// with X = S_l S_m S_n (GN) or X = T_lmnk, the collision term (KZ).  On the
// dimensionless link c = 2 eps, so the prefactor is 8 eps^2.  The index n is
// eliminated through n = l + m - k; triples with n outside the grid are
// dropped.

#include <kzpsd/error.hpp>
#include <kzpsd/kernels.hpp>
#include <kzpsd/link.hpp>
#include <kzpsd/parallel.hpp>
#include <kzpsd/quartets.hpp>
#include <kzpsd/spectral.hpp>

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace kzpsd::models {

enum class Model { Gn, Kz };

inline const char* to_string(Model m) { return m == Model::Gn ? "GN" : "KZ"; }

/// Link parameters a model output was computed with.
struct LinkSummary {
  double nonlinear_coeff = 0.0;
  double distance = 0.0;
  double alpha = 0.0;
  double span_length = 0.0;
  std::size_t span_count = 1;
};

struct PsdModelOutput {
  Model model;
  Psd base;
  std::vector<double> correction;  ///< 2 c^2 sum |K|^2 X per mode
  double output_loss = 0.0;        ///< F(z); the output is exp(-F) (base + correction)
  LinkSummary link;

  double value(std::size_t i) const { return std::exp(-output_loss) * (base.values()[i] + correction[i]); }
  double at(long k) const { return value(base.grid().index_of(k)); }

  Psd psd() const {
    Psd out(base.grid());
    for (std::size_t i = 0; i < correction.size(); ++i) out.values()[i] = value(i);
    return out;
  }

  double total_correction() const { return pairwise_sum(std::span<const double>(correction)); }
};

/// T_lmnk = S_l S_m S_n + S_l S_m S_k - S_l S_n S_k - S_m S_n S_k.
inline double collision_term(const Psd& s, const quartets::Quartet& q) {
  require(q.frequency_matched(), "collision_term: quartet violates l + m = n + k");
  const TimeGrid& g = s.grid();
  require(g.contains_mode(q.l) && g.contains_mode(q.m) && g.contains_mode(q.n) && g.contains_mode(q.k),
          "collision_term: index outside grid");
  const double sl = s.at(q.l), sm = s.at(q.m), sn = s.at(q.n), sk = s.at(q.k);
  return sl * sm * sn + sl * sm * sk - sl * sn * sk - sm * sn * sk;
}

/// |K(Omega_lmnk)|^2 on a grid.  Dispersion of degree <= 2 gives
/// Omega = -2 d2 w0^2 (l - k)(m - k), so the kernel is tabulated by the
/// integer product; other dispersion relations are evaluated per triple.
class KernelNorms {
public:
  KernelNorms(const TimeGrid& grid, const LinkConfig& link, double z)
      : grid_(grid), kernel_(link, z), rates_(grid.size()) {
    for (std::size_t i = 0; i < rates_.size(); ++i)
      rates_[i] = link.dispersion().phase_rate(grid.omega(grid.mode_of(i)));

    std::optional<double> d2;
    const DispersionSpec& disp = link.dispersion();
    if (disp.kind() == DispersionSpec::Kind::Quadratic) d2 = 1.0;
    else if (disp.beta().size() <= 3) d2 = disp.beta().size() == 3 ? -0.5 * disp.beta()[2] : 0.0;
    if (!d2) return;

    const long span = static_cast<long>(grid.size()) - 1;
    offset_ = span * span;
    table_.resize(static_cast<std::size_t>(2 * offset_ + 1));
    const double scale = -2.0 * *d2 * grid.omega0() * grid.omega0();
    parallel_for(table_.size(), [&](std::size_t i) {
      const long p = static_cast<long>(i) - offset_;
      table_[i] = kernel_.norm(scale * static_cast<double>(p));
    });
  }

  double omega(long l, long m, long n, long k) const {
    return rate(l) + rate(m) - rate(n) - rate(k);
  }

  double operator()(long l, long m, long n, long k) const {
    if (!table_.empty()) return table_[static_cast<std::size_t>((l - k) * (m - k) + offset_)];
    return kernel_.norm(omega(l, m, n, k));
  }

  const LinkKernel& kernel() const noexcept { return kernel_; }
  bool tabulated() const noexcept { return !table_.empty(); }

private:
  double rate(long k) const { return rates_[grid_.index_of(k)]; }

  TimeGrid grid_;
  LinkKernel kernel_;
  std::vector<double> rates_;
  std::vector<double> table_;
  long offset_ = 0;
};

/// Calls fn(l, m, n) over nr_k restricted to the grid, in fixed order.
template <typename Fn>
void for_each_grid_nr(const TimeGrid& g, long k, Fn&& fn) {
  const long lo = g.min_mode();
  const long hi = g.max_mode();
  for (long l = lo; l <= hi; ++l) {
    if (l == k) continue;
    const long m_lo = std::max(lo, lo - l + k);
    const long m_hi = std::min(hi, hi - l + k);
    for (long m = m_lo; m <= m_hi; ++m) {
      if (m == k) continue;
      fn(l, m, l + m - k);
    }
  }
}

/// Everything the two models share, from one pass over the triples.
struct ModelComparison {
  PsdModelOutput gn;
  PsdModelOutput kz;
  std::vector<double> delta;             ///< 2 c^2 S_k sum |K|^2 (S_l S_n + S_m S_n - S_l S_m)
  std::vector<double> delta_simplified;  ///< 2 c^2 S_k sum |K|^2 S_l S_n
};

inline ModelComparison compare_models(const Psd& s0, const LinkConfig& link, double z) {
  require(s0.nonnegative(), "psd models: input PSD must be nonnegative");
  const TimeGrid& g = s0.grid();
  const KernelNorms norms(g, link, z);
  const double c = link.nonlinear_coeff();
  const double pre = 2.0 * c * c;
  const std::size_t size = g.size();

  std::vector<double> gn(size), kz(size), delta(size), simple(size);
  if (c != 0.0) {
    parallel_for(size, [&](std::size_t i) {
      const long k = g.mode_of(i);
      const double sk = s0.at(k);
      double a_gn = 0.0, a_kz = 0.0, a_d = 0.0, a_s = 0.0;
      for_each_grid_nr(g, k, [&](long l, long m, long n) {
        const double w = norms(l, m, n, k);
        const double sl = s0.at(l), sm = s0.at(m), sn = s0.at(n);
        a_gn += w * sl * sm * sn;
        a_kz += w * (sl * sm * (sn + sk) - sn * sk * (sl + sm));
        a_d += w * sk * (sn * (sl + sm) - sl * sm);
        a_s += w * sk * sl * sn;
      });
      gn[i] = pre * a_gn;
      kz[i] = pre * a_kz;
      delta[i] = pre * a_d;
      simple[i] = pre * a_s;
    });
  }

  const LinkSummary summary{c, z, link.alpha(), link.span_length(), link.span_count()};
  const double loss = norms.kernel().output_loss();
  return {PsdModelOutput{Model::Gn, s0, std::move(gn), loss, summary},
          PsdModelOutput{Model::Kz, s0, std::move(kz), loss, summary}, std::move(delta), std::move(simple)};
}

inline PsdModelOutput gn_psd(const Psd& s0, const LinkConfig& link, double z) {
  return compare_models(s0, link, z).gn;
}

inline PsdModelOutput kz_psd(const Psd& s0, const LinkConfig& link, double z) {
  return compare_models(s0, link, z).kz;
}

/// Dimensionless forms, j q_z = q_tt + 2 eps |q|^2 q (prefactor 8 eps^2).
inline PsdModelOutput gn_psd(const Psd& s0, double z, double eps) {
  return gn_psd(s0, LinkConfig::dimensionless(eps), z);
}

inline PsdModelOutput kz_psd(const Psd& s0, double z, double eps) {
  return kz_psd(s0, LinkConfig::dimensionless(eps), z);
}

struct DeltaS {
  std::vector<double> exact;       ///< S^GN - S^KZ, from the collision-term difference
  std::vector<double> simplified;  ///< 8 eps^2 S_k sum |H|^2 S_l S_n
};

inline DeltaS delta_s(const Psd& s0, double z, double eps) {
  auto cmp = compare_models(s0, LinkConfig::dimensionless(eps), z);
  return {std::move(cmp.delta), std::move(cmp.delta_simplified)};
}

/// End-of-link models (after the last amplifier).
inline PsdModelOutput gn_psd_multispan(const Psd& s0, const LinkConfig& link) {
  require(std::isfinite(link.span_length()), "gn_psd_multispan: link needs a finite span length");
  return gn_psd(s0, link, link.total_length());
}

inline PsdModelOutput kz_psd_multispan(const Psd& s0, const LinkConfig& link) {
  require(std::isfinite(link.span_length()), "kz_psd_multispan: link needs a finite span length");
  return kz_psd(s0, link, link.total_length());
}

/// Initial 4-point cumulant density S~_lmnk(0) of the input.
using CumulantDensity = std::function<cplx(long l, long m, long n, long k)>;

/// Zero-order term of the kinetic equation with a non-Gaussian input:
///   exp(-F(z)) (S0_k + 2c Re sum_{nr_k} K(Omega_lmnk) S~_lmnk(0)).
inline Psd zero_order_cumulant_correction(const Psd& s0, const CumulantDensity& s4, const LinkConfig& link, double z) {
  const TimeGrid& g = s0.grid();
  const KernelNorms norms(g, link, z);
  const LinkKernel& kernel = norms.kernel();
  const double c = link.nonlinear_coeff();
  Psd out(g);
  parallel_for(g.size(), [&](std::size_t i) {
    const long k = g.mode_of(i);
    cplx acc = 0.0;
    for_each_grid_nr(g, k, [&](long l, long m, long n) {
      const cplx d = s4(l, m, n, k);
      if (d != 0.0) acc += kernel(norms.omega(l, m, n, k)) * d;
    });
    out.values()[i] = std::exp(-kernel.output_loss()) * (s0.values()[i] + 2.0 * c * acc.real());
  });
  return out;
}

inline Psd zero_order_cumulant_correction(const Psd& s0, const CumulantDensity& s4, double z, double eps = 1.0) {
  return zero_order_cumulant_correction(s0, s4, LinkConfig::dimensionless(eps), z);
}

/// Per-mode model corrections split by a triple classifier returning a bucket
/// in [0, Buckets).  Bucket sums add up to the model correction.
template <std::size_t Buckets, typename Classifier>
std::vector<std::array<double, Buckets>> attributed_correction(const Psd& s0, const LinkConfig& link, double z,
                                                               Model model, Classifier&& bucket) {
  const TimeGrid& g = s0.grid();
  const KernelNorms norms(g, link, z);
  const double c = link.nonlinear_coeff();
  const double pre = 2.0 * c * c;
  std::vector<std::array<double, Buckets>> out(g.size());
  parallel_for(g.size(), [&](std::size_t i) {
    const long k = g.mode_of(i);
    const double sk = s0.at(k);
    std::array<double, Buckets> acc{};
    for_each_grid_nr(g, k, [&](long l, long m, long n) {
      const double sl = s0.at(l), sm = s0.at(m), sn = s0.at(n);
      const double x = model == Model::Gn ? sl * sm * sn : sl * sm * (sn + sk) - sn * sk * (sl + sm);
      const std::size_t b = bucket(l, m, n, k);
      acc[b] += norms(l, m, n, k) * x;
    });
    for (auto& v : acc) v *= pre;
    out[i] = acc;
  });
  return out;
}

}  // namespace kzpsd::models
