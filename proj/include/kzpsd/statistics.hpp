#pragma once

// Spectral moments and cumulants up to order six.
//
// Joint moments/cumulants of up to six complex variables are stored by subset
// bitmask; conversions use the set-partition formulas
//   mu(S)    = sum_pi prod_{B in pi} kappa(B),
//   kappa(S) = sum_pi (-1)^{|pi|-1} (|pi|-1)! prod_{B in pi} mu(B).

#include <kzpsd/error.hpp>
#include <kzpsd/nls.hpp>
#include <kzpsd/parallel.hpp>
#include <kzpsd/spectral.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace kzpsd::stats {

/// E[q_{a_1} ... q_{a_n} q^*_{b_1} ... q^*_{b_m}].  Unbalanced specs (n != m)
/// are representable and evaluate to zero for stationary circular inputs.
struct MomentSpec {
  std::vector<long> plain;
  std::vector<long> conjugated;

  std::size_t order() const noexcept { return plain.size() + conjugated.size(); }
  bool balanced() const noexcept { return plain.size() == conjugated.size(); }

  /// Sorted within each conjugation group.
  MomentSpec canonical() const {
    MomentSpec out = *this;
    std::sort(out.plain.begin(), out.plain.end());
    std::sort(out.conjugated.begin(), out.conjugated.end());
    return out;
  }
};

/// Moment of a zero-mean circular Gaussian process with E[q_a q_b^*] = S_a
/// delta_ab: the sum over pairings of plain with conjugated indices.
inline cplx wick_moment(const Psd& psd, const MomentSpec& spec) {
  require(spec.order() == 2 || spec.order() == 4 || spec.order() == 6,
          "wick_moment: supported orders are 2, 4 and 6");
  if (!spec.balanced()) return 0.0;
  const MomentSpec c = spec.canonical();
  for (long k : c.plain) require(psd.grid().contains_mode(k), "wick_moment: index outside grid");
  for (long k : c.conjugated) require(psd.grid().contains_mode(k), "wick_moment: index outside grid");

  std::vector<std::size_t> perm(c.conjugated.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  double acc = 0.0;
  do {
    double term = 1.0;
    for (std::size_t i = 0; i < perm.size() && term != 0.0; ++i)
      term = c.plain[i] == c.conjugated[perm[i]] ? term * psd.at(c.plain[i]) : 0.0;
    acc += term;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return acc;
}

/// Values indexed by subsets of n <= 6 variables (bit i = variable i).
/// Entry 0 (empty set) is unused.
class SubsetTable {
public:
  explicit SubsetTable(std::size_t variables) : n_(variables), values_(std::size_t{1} << variables) {
    require(variables >= 1 && variables <= 6, "SubsetTable: 1 to 6 variables supported");
  }

  std::size_t variables() const noexcept { return n_; }
  std::uint32_t full() const noexcept { return (1u << n_) - 1u; }
  cplx operator[](std::uint32_t mask) const { return values_.at(mask); }
  cplx& operator[](std::uint32_t mask) { return values_.at(mask); }

private:
  std::size_t n_;
  std::vector<cplx> values_;
};

namespace detail {

// Calls fn(blocks) for every set partition of `mask`.
inline void for_each_partition(std::uint32_t mask, std::vector<std::uint32_t>& blocks,
                               const std::function<void(const std::vector<std::uint32_t>&)>& fn) {
  if (mask == 0) {
    fn(blocks);
    return;
  }
  const std::uint32_t lowest = mask & (~mask + 1u);
  const std::uint32_t rest = mask ^ lowest;
  // Every block containing the lowest element: lowest | (subset of rest).
  for (std::uint32_t sub = rest;; sub = (sub - 1) & rest) {
    blocks.push_back(lowest | sub);
    for_each_partition(rest ^ sub, blocks, fn);
    blocks.pop_back();
    if (sub == 0) break;
  }
}

inline double factorial(std::size_t n) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

}  // namespace detail

inline SubsetTable cumulants_to_moments(const SubsetTable& cumulants) {
  SubsetTable out(cumulants.variables());
  std::vector<std::uint32_t> blocks;
  for (std::uint32_t s = 1; s <= cumulants.full(); ++s) {
    cplx acc = 0.0;
    detail::for_each_partition(s, blocks, [&](const std::vector<std::uint32_t>& pi) {
      cplx term = 1.0;
      for (std::uint32_t b : pi) term *= cumulants[b];
      acc += term;
    });
    out[s] = acc;
  }
  return out;
}

inline SubsetTable moments_to_cumulants(const SubsetTable& moments) {
  SubsetTable out(moments.variables());
  std::vector<std::uint32_t> blocks;
  for (std::uint32_t s = 1; s <= moments.full(); ++s) {
    cplx acc = 0.0;
    detail::for_each_partition(s, blocks, [&](const std::vector<std::uint32_t>& pi) {
      const std::size_t p = pi.size();
      cplx term = ((p - 1) % 2 == 0 ? 1.0 : -1.0) * detail::factorial(p - 1);
      for (std::uint32_t b : pi) term *= moments[b];
      acc += term;
    });
    out[s] = acc;
  }
  return out;
}

/// Joint moments of zero-mean jointly Gaussian variables with second moments
/// E[v_i v_j] = pair(i, j): each subset moment is the sum over perfect
/// matchings (Isserlis).
inline SubsetTable gaussian_joint_moments(std::size_t variables,
                                          const std::function<cplx(std::size_t, std::size_t)>& pair) {
  SubsetTable out(variables);
  std::function<cplx(std::uint32_t)> matchings = [&](std::uint32_t mask) -> cplx {
    if (mask == 0) return 1.0;
    if (std::popcount(mask) % 2 != 0) return 0.0;
    const int i = std::countr_zero(mask);
    const std::uint32_t rest = mask & ~(1u << i);
    cplx acc = 0.0;
    for (std::uint32_t r = rest; r != 0; r &= r - 1) {
      const int j = std::countr_zero(r);
      acc += pair(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) * matchings(rest & ~(1u << j));
    }
    return acc;
  };
  for (std::uint32_t s = 1; s <= out.full(); ++s) out[s] = matchings(s);
  return out;
}

/// Joint moments of the variables (a, ..., a, a^*, ..., a^*) (n of each) for
/// a circularly symmetric scalar a with E|a|^{2p} = abs_moments[p - 1].
inline SubsetTable circular_joint_moments(std::size_t n, const std::vector<double>& abs_moments) {
  require(abs_moments.size() >= n, "circular_joint_moments: not enough absolute moments");
  SubsetTable out(2 * n);
  const std::uint32_t plain_mask = (1u << n) - 1u;
  for (std::uint32_t s = 1; s <= out.full(); ++s) {
    const int p = std::popcount(s & plain_mask);
    const int q = std::popcount(s & ~plain_mask);
    out[s] = p == q ? abs_moments[static_cast<std::size_t>(p) - 1] : 0.0;
  }
  return out;
}

/// Per-mode cumulant densities of i.i.d. circular symbols.
struct CumulantDensitySet {
  double s2 = 0.0;  ///< E|a|^2
  double s4 = 0.0;  ///< E|a|^4 - 2 E^2|a|^2
  double s6 = 0.0;  ///< E|a|^6 - 9 E|a|^2 E|a|^4 + 12 E^3|a|^2 (partition formula)
  /// E|a|^6 + 9 E|a|^2 E|a|^4 - 12 E^3|a|^2, the alternative sign pattern,
  /// kept for comparison; it does not vanish for Gaussian symbols.
  double s6_printed = 0.0;
  /// True when both sixth-order expressions agree to 1e-12 relative.
  bool s6_consistent = false;
};

inline CumulantDensitySet iid_cumulant_densities(double m2, double m4, double m6) {
  require(std::isfinite(m2) && std::isfinite(m4) && std::isfinite(m6), "iid_cumulant_densities: non-finite moment");
  require(m2 > 0.0, "iid_cumulant_densities: E|a|^2 must be positive");
  const double tol = 1e-12;
  require(m4 >= m2 * m2 * (1.0 - tol), "iid_cumulant_densities: E|a|^4 < E^2|a|^2 violates Cauchy-Schwarz");
  require(m6 * m2 >= m4 * m4 * (1.0 - tol), "iid_cumulant_densities: E|a|^6 E|a|^2 < E^2|a|^4 violates Cauchy-Schwarz");
  CumulantDensitySet d;
  d.s2 = m2;
  d.s4 = m4 - 2.0 * m2 * m2;
  d.s6 = m6 - 9.0 * m2 * m4 + 12.0 * m2 * m2 * m2;
  d.s6_printed = m6 + 9.0 * m2 * m4 - 12.0 * m2 * m2 * m2;
  const double scale = std::max({m6, 9.0 * m2 * m4, 12.0 * m2 * m2 * m2});
  d.s6_consistent = std::abs(d.s6 - d.s6_printed) <= tol * scale;
  return d;
}

struct Estimate {
  cplx value;
  double std_error;  ///< sqrt(Var Re + Var Im) / sqrt(R)
};

namespace detail {

inline Estimate mean_with_stderr(std::span<const cplx> samples) {
  const std::size_t r = samples.size();
  const cplx mean = pairwise_sum(samples) / static_cast<double>(r);
  std::vector<double> sq(r);
  for (std::size_t i = 0; i < r; ++i) sq[i] = std::norm(samples[i] - mean);
  const double var = pairwise_sum(std::span<const double>(sq)) / static_cast<double>(r - 1);
  return {mean, std::sqrt(var / static_cast<double>(r))};
}

inline cplx spec_product(const Spectrum& s, const MomentSpec& spec) {
  cplx p = 1.0;
  for (long k : spec.plain) p *= s.at(k);
  for (long k : spec.conjugated) p *= std::conj(s.at(k));
  return p;
}

}  // namespace detail

/// Empirical mean of the conjugation-signed product over R realizations.
inline Estimate estimate_moment_mc(const oracle::Sampler& sampler, const MomentSpec& spec, std::size_t realizations,
                                   std::uint64_t seed) {
  require(realizations >= 2, "estimate_moment_mc: need at least two realizations");
  std::vector<cplx> values(realizations);
  parallel_for(realizations, [&](std::size_t r) {
    oracle::Rng rng = oracle::realization_rng(seed, r);
    values[r] = detail::spec_product(sampler(rng), spec);
  });
  return detail::mean_with_stderr(values);
}

/// Modes with independent uniform phases and |q_k|^2 = S_k (stationary,
/// constant modulus).
inline oracle::Sampler uniform_phase_sampler(const Psd& s0) {
  require(s0.nonnegative(), "uniform_phase_sampler: PSD must be nonnegative");
  return [s0](oracle::Rng& rng) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    Spectrum out(s0.grid());
    for (std::size_t i = 0; i < out.coeffs().size(); ++i)
      out.coeffs()[i] = std::polar(std::sqrt(s0.values()[i]), phase(rng));
    return out;
  };
}

/// Normalized per-mode cumulant summaries of an ensemble of spectra,
///   s4 = (m4 - 2 m2^2) / m2^2,   s6 = (m6 - 9 m2 m4 + 12 m2^3) / m2^3,
/// with m_p = E|q_k|^p, averaged over modes with weights m2.  Standard errors
/// come from batch means over contiguous realization blocks.
struct QuasiGaussianReport {
  double s4 = 0.0;
  double s4_stderr = 0.0;
  double s6 = 0.0;
  double s6_stderr = 0.0;
  std::size_t batches = 0;
};

inline QuasiGaussianReport quasi_gaussian_deviation(std::span<const Spectrum> ensemble, std::size_t batches = 20) {
  require(batches >= 2 && ensemble.size() >= 2 * batches, "quasi_gaussian_deviation: ensemble too small for batching");
  const std::size_t n = ensemble.front().grid().size();
  const std::size_t per_batch = ensemble.size() / batches;

  auto summarize = [&](std::size_t begin, std::size_t end) {
    std::vector<double> m2(n, 0.0), m4(n, 0.0), m6(n, 0.0);
    for (std::size_t r = begin; r < end; ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::norm(ensemble[r].coeffs()[i]);
        m2[i] += p;
        m4[i] += p * p;
        m6[i] += p * p * p;
      }
    }
    const double count = static_cast<double>(end - begin);
    double w = 0.0, a4 = 0.0, a6 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e2 = m2[i] / count, e4 = m4[i] / count, e6 = m6[i] / count;
      if (e2 <= 0.0) continue;
      a4 += e2 * (e4 - 2.0 * e2 * e2) / (e2 * e2);
      a6 += e2 * (e6 - 9.0 * e2 * e4 + 12.0 * e2 * e2 * e2) / (e2 * e2 * e2);
      w += e2;
    }
    return std::array<double, 2>{w > 0.0 ? a4 / w : 0.0, w > 0.0 ? a6 / w : 0.0};
  };

  std::vector<double> b4(batches), b6(batches);
  parallel_for(batches, [&](std::size_t b) {
    const auto s = summarize(b * per_batch, (b + 1) * per_batch);
    b4[b] = s[0];
    b6[b] = s[1];
  });
  auto mean_err = [&](const std::vector<double>& v) {
    const double mean = pairwise_sum(std::span<const double>(v)) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() - 1);
    return std::array<double, 2>{mean, std::sqrt(var / static_cast<double>(v.size()))};
  };
  const auto e4 = mean_err(b4);
  const auto e6 = mean_err(b6);
  return {e4[0], e4[1], e6[0], e6[1], batches};
}

}  // namespace kzpsd::stats
