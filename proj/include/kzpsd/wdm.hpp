#pragma once

// WDM inputs: 2U + 1 users, user u occupying the global modes
// u N0 + [-N0/2, N0/2), each carrying M i.i.d. symbols on an orthonormal
// basis phi^l (local mode table).  The spectrum is
//   q_{u N0 + k} = sum_l a_u^l phi^l_k.
//
// Model corrections for such inputs expand every 6-point spectral moment over
// balanced set partitions into the Gaussian pairings (built from the 2-point
// moment, which is not diagonal for general bases) and the cumulant part
// (kappa2 kappa4 and kappa6 blocks, driven by the symbol densities S4, S6).

#include <kzpsd/error.hpp>
#include <kzpsd/kernels.hpp>
#include <kzpsd/link.hpp>
#include <kzpsd/nls.hpp>
#include <kzpsd/parallel.hpp>
#include <kzpsd/psd.hpp>
#include <kzpsd/spectral.hpp>
#include <kzpsd/statistics.hpp>

#include <json.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace kzpsd::wdm {

/// Orthonormal pulse basis on one user band: values[l][k + N0/2] = phi^l_k.
class Basis {
public:
  static Basis from_table(std::size_t modes, std::vector<std::vector<cplx>> values) {
    require(modes >= 2 && modes % 2 == 0, "Basis: modes per user must be even and >= 2");
    require(!values.empty() && values.size() <= modes, "Basis: need 1..N0 pulses");
    for (const auto& row : values) require(row.size() == modes, "Basis: each pulse needs N0 coefficients");
    Basis b(modes, std::move(values));
    require(b.orthonormality_residual() <= 1e-10, "Basis: pulses are not orthonormal");
    return b;
  }

  /// phi^l_k = delta_{k, l - N0/2}: one tone per symbol, M = N0.
  static Basis tones(std::size_t modes) {
    std::vector<std::vector<cplx>> v(modes, std::vector<cplx>(modes));
    for (std::size_t l = 0; l < modes; ++l) v[l][l] = 1.0;
    return from_table(modes, std::move(v));
  }

  /// Time-shifted pulses phi^l(t) = p(t - l T / M), so phi^l_k = p_k
  /// exp(j 2 pi k l / M), with |p_k|^2 = X(k) / M for a raised-cosine X of
  /// Nyquist width M and the given roll-off, each alias class k mod M
  /// normalized to one.  Needs N0 >= (1 + rolloff) M.
  static Basis delayed(std::size_t modes, std::size_t symbols, double rolloff) {
    require(symbols >= 1, "Basis: need at least one symbol");
    require(rolloff >= 0.0 && rolloff <= 1.0, "Basis: roll-off must lie in [0, 1]");
    require(static_cast<double>(modes) >= (1.0 + rolloff) * static_cast<double>(symbols) - 1e-12,
            "Basis: band too narrow for the pulse roll-off");
    const double m = static_cast<double>(symbols);
    const double flat = 0.5 * (1.0 - rolloff) * m;
    const double edge = 0.5 * (1.0 + rolloff) * m;
    auto spectrum = [&](double f) {
      const double a = std::abs(f);
      if (a < flat) return 1.0;
      if (a > edge) return 0.0;
      if (rolloff == 0.0) return 0.5;
      return 0.5 * (1.0 + std::cos(std::numbers::pi * (a - flat) / (rolloff * m)));
    };
    const long half = static_cast<long>(modes / 2);
    const auto ms = static_cast<long>(symbols);
    // Aliases k + jM of each mode must sum to one for orthonormal shifts; on
    // the discrete grid the band edge can hold only one of a mirrored pair.
    std::vector<double> x(modes), alias(symbols, 0.0);
    for (long k = -half; k < half; ++k) {
      x[static_cast<std::size_t>(k + half)] = spectrum(static_cast<double>(k));
      alias[static_cast<std::size_t>(((k % ms) + ms) % ms)] += x[static_cast<std::size_t>(k + half)];
    }
    std::vector<std::vector<cplx>> v(symbols, std::vector<cplx>(modes));
    for (std::size_t l = 0; l < symbols; ++l) {
      for (long k = -half; k < half; ++k) {
        const double total = alias[static_cast<std::size_t>(((k % ms) + ms) % ms)];
        require(total > 0.0, "Basis: pulse spectrum leaves a symbol-rate alias class empty");
        const double p = std::sqrt(x[static_cast<std::size_t>(k + half)] / total / m);
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k * static_cast<long>(l)) / m;
        v[l][static_cast<std::size_t>(k + half)] = std::polar(p, angle);
      }
    }
    return from_table(modes, std::move(v));
  }

  std::size_t modes() const noexcept { return modes_; }
  std::size_t symbols() const noexcept { return values_.size(); }

  /// phi^l_k for local k in [-N0/2, N0/2); zero outside.
  cplx at(std::size_t l, long k) const {
    const long half = static_cast<long>(modes_ / 2);
    if (k < -half || k >= half) return 0.0;
    return values_[l][static_cast<std::size_t>(k + half)];
  }

  /// max |sum_k phi^l_k conj(phi^l'_k) - delta_ll'|.
  double orthonormality_residual() const {
    double worst = 0.0;
    for (std::size_t a = 0; a < values_.size(); ++a) {
      for (std::size_t b = 0; b < values_.size(); ++b) {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < modes_; ++k) acc += values_[a][k] * std::conj(values_[b][k]);
        worst = std::max(worst, std::abs(acc - (a == b ? 1.0 : 0.0)));
      }
    }
    return worst;
  }

private:
  Basis(std::size_t modes, std::vector<std::vector<cplx>> values) : modes_(modes), values_(std::move(values)) {}

  std::size_t modes_;
  std::vector<std::vector<cplx>> values_;
};

/// Circularly symmetric i.i.d. symbol law with mean power `power`.
class SymbolDistribution {
public:
  enum class Kind { Gaussian, ConstantModulus, Qam16, Moments };

  SymbolDistribution(Kind kind, double power) : kind_(kind), power_(power) {
    require(std::isfinite(power) && power > 0.0, "SymbolDistribution: power must be positive");
    require(kind != Kind::Moments, "SymbolDistribution: use from_moments for a moment-only law");
  }

  /// Law known only through {E|a|^2, E|a|^4, E|a|^6}; usable by the model
  /// corrections but not samplable.
  static SymbolDistribution from_moments(double m2, double m4, double m6) {
    stats::iid_cumulant_densities(m2, m4, m6);
    SymbolDistribution d(Kind::Gaussian, m2);
    d.kind_ = Kind::Moments;
    d.custom_ = {m2, m4, m6};
    return d;
  }

  Kind kind() const noexcept { return kind_; }
  double power() const noexcept { return power_; }

  /// {E|a|^2, E|a|^4, E|a|^6}.
  std::array<double, 3> moments() const {
    const double p = power_;
    switch (kind_) {
      case Kind::Gaussian: return {p, 2.0 * p * p, 6.0 * p * p * p};
      case Kind::ConstantModulus: return {p, p * p, p * p * p};
      case Kind::Qam16: {
        std::array<double, 3> m{0.0, 0.0, 0.0};
        for (int i : {-3, -1, 1, 3})
          for (int q : {-3, -1, 1, 3}) {
            const double e = (i * i + q * q) / 10.0 * p;
            m[0] += e / 16.0;
            m[1] += e * e / 16.0;
            m[2] += e * e * e / 16.0;
          }
        return m;
      }
      case Kind::Moments: return custom_;
    }
    return {p, 2.0 * p * p, 6.0 * p * p * p};
  }

  cplx sample(oracle::Rng& rng) const {
    switch (kind_) {
      case Kind::Gaussian: {
        std::normal_distribution<double> n(0.0, std::sqrt(0.5 * power_));
        const double re = n(rng);
        const double im = n(rng);
        return {re, im};
      }
      case Kind::ConstantModulus: {
        std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
        return std::polar(std::sqrt(power_), u(rng));
      }
      case Kind::Qam16: {
        std::uniform_int_distribution<int> d(0, 3);
        static constexpr int levels[4] = {-3, -1, 1, 3};
        const double scale = std::sqrt(power_ / 10.0);
        const int i = levels[d(rng)];
        const int q = levels[d(rng)];
        return {scale * i, scale * q};
      }
      case Kind::Moments: throw InvalidArgument("SymbolDistribution: a moment-only law cannot be sampled");
    }
    return 0.0;
  }

private:
  Kind kind_;
  double power_;
  std::array<double, 3> custom_{};
};

class WdmConfig {
public:
  /// 2 * half_users + 1 users of N0 = basis.modes() modes each on `grid`.
  WdmConfig(TimeGrid grid, long half_users, Basis basis, SymbolDistribution symbols)
      : grid_(grid), half_users_(half_users), basis_(std::move(basis)), symbols_(symbols) {
    require(half_users >= 0, "WdmConfig: user half-count must be >= 0");
    const auto n0 = static_cast<long>(basis_.modes());
    require((2 * half_users + 1) * n0 <= static_cast<long>(grid.size()),
            "WdmConfig: users do not fit on the grid");
  }

  /// N0 = floor(user_bandwidth / w0) modes per user.
  static std::size_t modes_for_bandwidth(const TimeGrid& grid, double user_bandwidth) {
    require(user_bandwidth > 0.0, "WdmConfig: user bandwidth must be positive");
    return static_cast<std::size_t>(std::floor(user_bandwidth / grid.omega0() + 1e-9));
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  long half_users() const noexcept { return half_users_; }
  long users() const noexcept { return 2 * half_users_ + 1; }
  const Basis& basis() const noexcept { return basis_; }
  const SymbolDistribution& symbols() const noexcept { return symbols_; }
  long modes_per_user() const noexcept { return static_cast<long>(basis_.modes()); }
  std::size_t symbols_per_user() const noexcept { return basis_.symbols(); }
  double user_bandwidth() const noexcept { return static_cast<double>(modes_per_user()) * grid_.omega0(); }

  /// User whose band A_u contains global mode k, if any.
  std::optional<long> user_of(long k) const {
    const long n0 = modes_per_user();
    const long u = static_cast<long>(std::floor((static_cast<double>(k) + 0.5 * static_cast<double>(n0)) /
                                                static_cast<double>(n0)));
    if (u < -half_users_ || u > half_users_) return std::nullopt;
    return u;
  }

  long local_mode(long k, long user) const { return k - user * modes_per_user(); }

  /// phi^l of user u at global mode k.
  cplx pulse(long user, std::size_t l, long k) const { return basis_.at(l, local_mode(k, user)); }

private:
  TimeGrid grid_;
  long half_users_;
  Basis basis_;
  SymbolDistribution symbols_;
};

/// symbols[u + U][l] for users u = -U..U.
using SymbolFrame = std::vector<std::vector<cplx>>;

inline SymbolFrame draw_symbols(const WdmConfig& cfg, oracle::Rng& rng) {
  SymbolFrame out(static_cast<std::size_t>(cfg.users()), std::vector<cplx>(cfg.symbols_per_user()));
  for (auto& user : out)
    for (auto& a : user) a = cfg.symbols().sample(rng);
  return out;
}

inline Spectrum wdm_spectrum(const WdmConfig& cfg, const SymbolFrame& symbols) {
  require(symbols.size() == static_cast<std::size_t>(cfg.users()), "build_wdm_signal: one symbol row per user");
  for (const auto& row : symbols)
    require(row.size() == cfg.symbols_per_user(), "build_wdm_signal: M symbols per user required");
  Spectrum out(cfg.grid());
  const long n0 = cfg.modes_per_user();
  for (long u = -cfg.half_users(); u <= cfg.half_users(); ++u) {
    const auto& row = symbols[static_cast<std::size_t>(u + cfg.half_users())];
    for (long k = -n0 / 2; k < n0 / 2; ++k) {
      cplx acc = 0.0;
      for (std::size_t l = 0; l < row.size(); ++l) acc += row[l] * cfg.basis().at(l, k);
      out.at(u * n0 + k) = acc;
    }
  }
  return out;
}

inline Signal build_wdm_signal(const WdmConfig& cfg, const SymbolFrame& symbols) {
  return inverse_transform(wdm_spectrum(cfg, symbols));
}

/// Sampler of WDM input spectra with i.i.d. symbols.
inline oracle::Sampler wdm_sampler(const WdmConfig& cfg) {
  return [cfg](oracle::Rng& rng) { return wdm_spectrum(cfg, draw_symbols(cfg, rng)); };
}

/// E q_{k1} q_{k2}^* = P0 sum_l phi^l_{k1} conj(phi^l_{k2}) within one band,
/// zero across bands.
inline cplx input_spectral_moment(const WdmConfig& cfg, long k1, long k2) {
  const auto u1 = cfg.user_of(k1);
  const auto u2 = cfg.user_of(k2);
  if (!u1 || !u2 || *u1 != *u2) return 0.0;
  cplx acc = 0.0;
  for (std::size_t l = 0; l < cfg.symbols_per_user(); ++l)
    acc += cfg.pulse(*u1, l, k1) * std::conj(cfg.pulse(*u1, l, k2));
  return cfg.symbols().power() * acc;
}

/// Diagonal of the input 2-point moment.
inline Psd input_psd(const WdmConfig& cfg) {
  Psd out(cfg.grid());
  for (long k = cfg.grid().min_mode(); k <= cfg.grid().max_mode(); ++k) out.at(k) = input_spectral_moment(cfg, k, k).real();
  return out;
}

struct XpmEnergy {
  double self = 0.0;   ///< sum_l |a_u^l|^2
  double cross = 0.0;  ///< sum_{m != u} sum_l |a_m^l|^2
};

inline XpmEnergy xpm_energy_decomposition(const WdmConfig& cfg, const SymbolFrame& symbols, long user) {
  require(user >= -cfg.half_users() && user <= cfg.half_users(), "xpm_energy_decomposition: user out of range");
  require(symbols.size() == static_cast<std::size_t>(cfg.users()), "xpm_energy_decomposition: one row per user");
  XpmEnergy e;
  for (long u = -cfg.half_users(); u <= cfg.half_users(); ++u) {
    double acc = 0.0;
    for (const cplx& a : symbols[static_cast<std::size_t>(u + cfg.half_users())]) acc += std::norm(a);
    (u == user ? e.self : e.cross) += acc;
  }
  return e;
}

struct InterferenceReport {
  long user = 0;
  std::vector<long> modes;  ///< the modes of A_u
  std::vector<std::array<double, 4>> parts;  ///< {intra, one_wave, two_wave, three_wave} per mode

  std::array<double, 4> totals() const {
    std::array<double, 4> t{};
    for (const auto& p : parts)
      for (std::size_t i = 0; i < 4; ++i) t[i] += p[i];
    return t;
  }
};

/// Splits the model correction on the band of `user` by how many of l, m, n
/// lie in that band: 3 intra, 2 one-wave, 1 two-wave, 0 three-wave.
inline InterferenceReport decompose_interference(const Psd& s0, const WdmConfig& cfg, long user,
                                                 const LinkConfig& link, double z, models::Model model) {
  require(user >= -cfg.half_users() && user <= cfg.half_users(), "decompose_interference: user out of range");
  require(s0.grid() == cfg.grid(), "decompose_interference: PSD grid differs from the WDM grid");
  auto in_band = [&](long k) {
    const auto u = cfg.user_of(k);
    return u && *u == user;
  };
  const auto all = models::attributed_correction<4>(s0, link, z, model, [&](long l, long m, long n, long) {
    const int inside = int(in_band(l)) + int(in_band(m)) + int(in_band(n));
    return static_cast<std::size_t>(3 - inside);
  });
  InterferenceReport r;
  r.user = user;
  const long n0 = cfg.modes_per_user();
  for (long k = user * n0 - n0 / 2; k < user * n0 + n0 / 2; ++k) {
    r.modes.push_back(k);
    r.parts.push_back(all[cfg.grid().index_of(k)]);
  }
  return r;
}

/// Number of nr triples over the modes of A_u, by the number of l, m, n
/// inside A_u: {intra, one_wave, two_wave, three_wave}.
inline std::array<std::size_t, 4> triple_class_counts(const WdmConfig& cfg, long user) {
  require(user >= -cfg.half_users() && user <= cfg.half_users(), "triple_class_counts: user out of range");
  auto in_band = [&](long k) {
    const auto u = cfg.user_of(k);
    return u && *u == user;
  };
  std::array<std::size_t, 4> counts{};
  const long n0 = cfg.modes_per_user();
  for (long k = user * n0 - n0 / 2; k < user * n0 + n0 / 2; ++k)
    models::for_each_grid_nr(cfg.grid(), k, [&](long l, long m, long n) {
      ++counts[static_cast<std::size_t>(3 - (int(in_band(l)) + int(in_band(m)) + int(in_band(n))))];
    });
  return counts;
}

/// Per-user {intra, one_wave, two_wave, three_wave, total} powers.
inline nlohmann::json interference_report_json(const WdmConfig& cfg, const LinkConfig& link, double z,
                                               models::Model model) {
  const Psd s0 = input_psd(cfg);
  nlohmann::json users = nlohmann::json::array();
  for (long u = -cfg.half_users(); u <= cfg.half_users(); ++u) {
    const auto t = decompose_interference(s0, cfg, u, link, z, model).totals();
    users.push_back({{"user", u},
                     {"intra", t[0]},
                     {"one_wave", t[1]},
                     {"two_wave", t[2]},
                     {"three_wave", t[3]},
                     {"total", t[0] + t[1] + t[2] + t[3]}});
  }
  return {{"model", models::to_string(model)}, {"distance", z}, {"users", users}};
}

namespace detail {

// Mode-level moment machinery for i.i.d. symbols on the occupied modes.
class MomentEngine {
public:
  explicit MomentEngine(const WdmConfig& cfg) : cfg_(cfg), grid_(cfg.grid()) {
    const auto m = cfg.symbols().moments();
    const auto d = stats::iid_cumulant_densities(m[0], m[1], m[2]);
    s2_ = d.s2;
    s4_ = d.s4;
    s6_ = d.s6;
    const std::size_t n = grid_.size();
    user_.assign(n, kNone);
    for (long k = grid_.min_mode(); k <= grid_.max_mode(); ++k)
      if (auto u = cfg.user_of(k)) user_[grid_.index_of(k)] = *u;
    corr_.assign(n * n, 0.0);
    for (long a = grid_.min_mode(); a <= grid_.max_mode(); ++a)
      for (long b = grid_.min_mode(); b <= grid_.max_mode(); ++b)
        corr_[grid_.index_of(a) * n + grid_.index_of(b)] = user(a) == kNone ? 0.0 : pair(a, b);
  }

  long user(long k) const { return user_[grid_.index_of(k)]; }
  bool occupied(long k) const { return grid_.contains_mode(k) && user(k) != kNone; }

  /// sum_l phi^l_a conj(phi^l_b) (no density factor).
  cplx corr(long a, long b) const { return corr_[grid_.index_of(a) * grid_.size() + grid_.index_of(b)]; }

  /// Moment E[q_p0 q_p1 q_p2 q_c0^* q_c1^* q_c2^*] split into Gaussian
  /// pairings and the cumulant remainder.
  std::array<cplx, 2> moment6(const std::array<long, 3>& p, const std::array<long, 3>& c) const {
    static constexpr std::array<std::array<int, 3>, 6> perms{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    cplx gauss = 0.0;
    for (const auto& s : perms) gauss += corr(p[0], c[s[0]]) * corr(p[1], c[s[1]]) * corr(p[2], c[s[2]]);
    gauss *= s2_ * s2_ * s2_;

    cplx cum = 0.0;
    if (s4_ != 0.0) {
      cplx acc = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const cplx k2 = corr(p[i], c[j]);
          if (k2 == 0.0) continue;
          acc += k2 * block<2>({p[(i + 1) % 3], p[(i + 2) % 3]}, {c[(j + 1) % 3], c[(j + 2) % 3]});
        }
      cum += s2_ * s4_ * acc;
    }
    if (s6_ != 0.0) cum += s6_ * block<3>({p[0], p[1], p[2]}, {c[0], c[1], c[2]});
    return {gauss, cum};
  }

  double s2() const noexcept { return s2_; }

private:
  static constexpr long kNone = std::numeric_limits<long>::min();

  cplx pair(long a, long b) const {
    const long u = user(a);
    if (u != user(b)) return 0.0;
    cplx acc = 0.0;
    for (std::size_t l = 0; l < cfg_.symbols_per_user(); ++l) acc += cfg_.pulse(u, l, a) * std::conj(cfg_.pulse(u, l, b));
    return acc;
  }

  // sum_l prod phi^l(plain) prod conj(phi^l(conj)), all modes in one band.
  template <std::size_t P>
  cplx block(const std::array<long, P>& plain, const std::array<long, P>& conj) const {
    const long u = user(plain[0]);
    if (u == kNone) return 0.0;
    for (long k : plain)
      if (user(k) != u) return 0.0;
    for (long k : conj)
      if (user(k) != u) return 0.0;
    cplx acc = 0.0;
    for (std::size_t l = 0; l < cfg_.symbols_per_user(); ++l) {
      cplx t = 1.0;
      for (long k : plain) t *= cfg_.pulse(u, l, k);
      for (long k : conj) t *= std::conj(cfg_.pulse(u, l, k));
      acc += t;
    }
    return acc;
  }

  const WdmConfig& cfg_;
  TimeGrid grid_;
  double s2_ = 0.0;
  double s4_ = 0.0;
  double s6_ = 0.0;
  std::vector<long> user_;
  std::vector<cplx> corr_;
};

// int_0^z H(Omega)(s) ds real part: z/Omega - sin(Omega z)/Omega^2.
inline double kernel_integral_real(double omega, double z) {
  const double x = omega * z;
  if (std::abs(x) < 1e-3) return omega * z * z * z / 6.0 * (1.0 - x * x / 20.0);
  return (x - std::sin(x)) / (omega * omega);
}

}  // namespace detail

struct WdmPsd {
  models::PsdModelOutput stationary;  ///< model on the diagonal input PSD
  std::vector<double> pairing;        ///< change from off-diagonal 2-point moments
  std::vector<double> cumulant;       ///< kappa2 kappa4 + kappa6 symbol-statistics term

  double value(std::size_t i) const {
    return stationary.value(i) + std::exp(-stationary.output_loss) * (pairing[i] + cumulant[i]);
  }
};

/// Default ceiling on the inner-loop work of corrected_psds.
inline constexpr double kDefaultCostLimit = 4e9;

/// GN or KZ PSD of a WDM input with i.i.d. symbols, including the
/// non-stationary and non-Gaussian terms.  The GN form is the first-order
/// signal power c^2 E|sum_{nr_k} K q_l q_m q_n^*|^2; the KZ form uses the
/// collision term of general 6-point moments (lossless links only).
inline WdmPsd corrected_psds(const WdmConfig& cfg, const LinkConfig& link, double z, models::Model model,
                             double cost_limit = kDefaultCostLimit) {
  const TimeGrid& g = cfg.grid();
  const detail::MomentEngine eng(cfg);
  const Psd s0 = input_psd(cfg);
  const double c = link.nonlinear_coeff();
  const models::KernelNorms norms(g, link, z);
  const LinkKernel& kernel = norms.kernel();

  std::vector<long> occupied;
  for (long k = g.min_mode(); k <= g.max_mode(); ++k)
    if (eng.occupied(k)) occupied.push_back(k);
  const double n_occ = static_cast<double>(occupied.size());
  const double n_grid = static_cast<double>(g.size());
  const double cost = model == models::Model::Gn ? n_grid * std::pow(n_occ, 4.0) : 4.0 * std::pow(n_occ, 5.0);
  if (cost > cost_limit)
    throw CostLimitExceeded("corrected_psds: estimated work " + std::to_string(cost) + " exceeds limit " +
                            std::to_string(cost_limit) + "; reduce users, N0 or M");
  if (model == models::Model::Kz)
    require(link.alpha() == 0.0 && !std::isfinite(link.span_length()),
            "corrected_psds: the KZ form needs a lossless single-span link");

  WdmPsd out{models::compare_models(s0, link, z).gn, std::vector<double>(g.size()), std::vector<double>(g.size())};
  if (model == models::Model::Kz) out.stationary = models::kz_psd(s0, link, z);
  if (c == 0.0) return out;

  // occupied nr triples (l, m, n) of mode k, with n = l + m - k
  auto nr_occupied = [&](long k) {
    std::vector<std::array<long, 3>> t;
    for (long l : occupied) {
      if (l == k) continue;
      for (long m : occupied) {
        if (m == k) continue;
        const long n = l + m - k;
        if (eng.occupied(n)) t.push_back({l, m, n});
      }
    }
    return t;
  };

  if (model == models::Model::Gn) {
    parallel_for(g.size(), [&](std::size_t i) {
      const long k = g.mode_of(i);
      const auto triples = nr_occupied(k);
      std::vector<cplx> w(triples.size());
      for (std::size_t a = 0; a < triples.size(); ++a)
        w[a] = kernel(norms.omega(triples[a][0], triples[a][1], triples[a][2], k));
      cplx gauss = 0.0, cum = 0.0;
      for (std::size_t a = 0; a < triples.size(); ++a) {
        const auto& [l, m, n] = triples[a];
        for (std::size_t b = 0; b < triples.size(); ++b) {
          const auto& [l2, m2, n2] = triples[b];
          const auto mom = eng.moment6({l, m, n2}, {n, l2, m2});
          const cplx ww = w[a] * std::conj(w[b]);
          gauss += ww * mom[0];
          cum += ww * mom[1];
        }
      }
      out.pairing[i] = c * c * gauss.real() - out.stationary.correction[i];
      out.cumulant[i] = c * c * cum.real();
    });
    return out;
  }

  // KZ: T = (conj G(n; l,m,k) + conj G(k; l,m,n) - G(l; n,k,m) - G(m; n,k,l)) / 2
  // with G(e; x,y,w) = sum_{nr_e} E[q_a q_b q_c^* q_x^* q_y^* q_w].
  auto g_term = [&](long e, long x, long y, long w) {
    std::array<cplx, 2> acc{0.0, 0.0};
    if (!eng.occupied(x) || !eng.occupied(y) || !eng.occupied(w)) return acc;
    for (long a : occupied) {
      if (a == e) continue;
      for (long b : occupied) {
        if (b == e) continue;
        const long cc = a + b - e;
        if (!eng.occupied(cc)) continue;
        const auto mom = eng.moment6({a, b, w}, {cc, x, y});
        acc[0] += mom[0];
        acc[1] += mom[1];
      }
    }
    return acc;
  };

  parallel_for(g.size(), [&](std::size_t i) {
    const long k = g.mode_of(i);
    double gauss = 0.0, cum = 0.0;
    models::for_each_grid_nr(g, k, [&](long l, long m, long n) {
      const int occ = int(eng.occupied(l)) + int(eng.occupied(m)) + int(eng.occupied(n)) + int(eng.occupied(k));
      if (occ < 3) return;
      const auto gn = g_term(n, l, m, k);
      const auto gk = g_term(k, l, m, n);
      const auto gl = g_term(l, n, k, m);
      const auto gm = g_term(m, n, k, l);
      const double omega = norms.omega(l, m, n, k);
      const double h2 = norms(l, m, n, k);
      const double r = detail::kernel_integral_real(omega, z);
      for (int part = 0; part < 2; ++part) {
        const cplx t = 0.5 * (std::conj(gn[part]) + std::conj(gk[part]) - gl[part] - gm[part]);
        const double v = h2 * t.real() - 2.0 * r * t.imag();
        (part == 0 ? gauss : cum) += v;
      }
    });
    out.pairing[i] = 2.0 * c * c * gauss - out.stationary.correction[i];
    out.cumulant[i] = 2.0 * c * c * cum;
  });
  return out;
}

}  // namespace kzpsd::wdm
