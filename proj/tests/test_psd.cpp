#include <kzpsd/kernels.hpp>
#include <kzpsd/psd.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace kzpsd;
using namespace kzpsd::models;

namespace {

Psd random_psd(const TimeGrid& g, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, scale);
  Psd s(g);
  for (auto& v : s.values()) v = u(rng);
  return s;
}

// Independent O(N^3) evaluation straight from the definitions.
std::vector<double> direct_correction(const Psd& s, double z, double eps, bool kz) {
  const TimeGrid& g = s.grid();
  std::vector<double> out(g.size());
  const double w0 = g.omega0();
  for (long k = g.min_mode(); k <= g.max_mode(); ++k) {
    double acc = 0.0;
    for (long l = g.min_mode(); l <= g.max_mode(); ++l)
      for (long m = g.min_mode(); m <= g.max_mode(); ++m) {
        const long n = l + m - k;
        if (l == k || m == k || !g.contains_mode(n)) continue;
        const double om = w0 * w0 * double(l * l + m * m - n * n - k * k);
        const double h = std::norm(h_kernel(om, z));
        acc += h * (kz ? collision_term(s, {l, m, n, k}) : s.at(l) * s.at(m) * s.at(n));
      }
    out[g.index_of(k)] = 8.0 * eps * eps * acc;
  }
  return out;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(Collision, Examples) {
  TimeGrid g(8.0, 8);
  Psd s(g);
  s.at(1) = 1.0;
  s.at(2) = 2.0;
  s.at(3) = 3.0;
  s.at(0) = 4.0;
  EXPECT_DOUBLE_EQ(collision_term(s, {1, 2, 3, 0}), -22.0);
  EXPECT_DOUBLE_EQ(collision_term(s, {3, 0, 1, 2}), 22.0);
  Psd flat(g, std::vector<double>(8, 0.7));
  EXPECT_EQ(collision_term(flat, {1, 2, 3, 0}), 0.0);
  EXPECT_THROW(collision_term(s, {1, 2, 3, 1}), InvalidArgument);
  EXPECT_THROW(collision_term(s, {3, 3, -2, 8}), InvalidArgument);
}

TEST(GnKz, MatchDirectEvaluation) {
  TimeGrid g(10.0, 32);
  const Psd s = random_psd(g, 1);
  const double eps = 0.3, z = 0.8;
  const auto gn = gn_psd(s, z, eps);
  const auto kz = kz_psd(s, z, eps);
  const auto dg = direct_correction(s, z, eps, false);
  const auto dk = direct_correction(s, z, eps, true);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(gn.correction[i], dg[i], 1e-12 * max_abs(dg));
    EXPECT_NEAR(kz.correction[i], dk[i], 1e-12 * max_abs(dk));
    EXPECT_EQ(gn.value(i), s.values()[i] + gn.correction[i]);
  }
  EXPECT_EQ(gn.model, Model::Gn);
  EXPECT_EQ(kz.model, Model::Kz);
}

TEST(GnKz, ZeroCoefficientIsIdentity) {
  TimeGrid g(10.0, 32);
  const Psd s = random_psd(g, 2);
  const auto link = LinkConfig::dimensionless().with_nonlinear_coeff(0.0);
  const auto gn = gn_psd(s, link, 1.0);
  const auto kz = kz_psd(s, link, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(gn.value(i), s.values()[i]);
    EXPECT_EQ(kz.value(i), s.values()[i]);
  }
}

TEST(GnKz, SingleOccupiedModeHasNoTriples) {
  TimeGrid g(10.0, 32);
  Psd s(g);
  s.at(3) = 2.0;
  const auto gn = gn_psd(s, 1.0, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(gn.value(i), s.values()[i]);
}

TEST(GnKz, FlatSpectrumIsKzFixedPoint) {
  TimeGrid g(10.0, 64);
  Psd s(g, std::vector<double>(64, 0.3));
  const auto kz = kz_psd(s, 1.0, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(kz.value(i), 0.3);
}

TEST(GnKz, KzPreservesEnergy) {
  TimeGrid g(20.0, 64);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Psd s = random_psd(g, seed);
    const auto kz = kz_psd(s, 1.0, 1.0);
    EXPECT_LE(std::abs(kz.total_correction()), 1e-12 * s.total());
  }
}

TEST(GnKz, GnStrictlyIncreasesEnergy) {
  TimeGrid g(20.0, 32);
  const Psd s = random_psd(g, 4);
  EXPECT_GT(gn_psd(s, 1.0, 1.0).total_correction(), 0.0);
}

TEST(DeltaS, IdentityAndOrdering) {
  TimeGrid g(20.0, 64);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Psd s = random_psd(g, 100 + seed);
    const auto cmp = compare_models(s, LinkConfig::dimensionless(), 1.0);
    const auto d = delta_s(s, 1.0, 1.0);
    double scale = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) scale = std::max(scale, cmp.gn.value(i));
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_NEAR(cmp.kz.value(i), cmp.gn.value(i) - d.exact[i], 1e-12 * scale);
      EXPECT_GE(cmp.gn.value(i), cmp.kz.value(i)) << "seed " << seed << " mode " << g.mode_of(i);
      EXPECT_GE(d.exact[i], 0.0);
      EXPECT_GE(d.simplified[i], 0.0);
    }
  }
}

TEST(DeltaS, OrderingIsNotAnIdentity) {
  // Power on k +- 1 with little at k: the S_l S_m terms win and GN < KZ at k.
  TimeGrid g(20.0, 16);
  Psd s(g);
  s.at(-1) = 1.0;
  s.at(1) = 1.0;
  s.at(0) = 1e-3;
  const auto d = delta_s(s, 10.0, 1.0);
  EXPECT_LT(d.exact[g.index_of(0)], 0.0);
}

TEST(DeltaS, ZeroCoefficient) {
  TimeGrid g(20.0, 16);
  const auto d = delta_s(random_psd(g, 3), 1.0, 0.0);
  for (double v : d.exact) EXPECT_EQ(v, 0.0);
}

TEST(ZeroOrder, Identities) {
  TimeGrid g(10.0, 16);
  const Psd s = random_psd(g, 6);
  const CumulantDensity none = [](long, long, long, long) { return cplx(0.0); };
  const CumulantDensity real = [](long l, long m, long, long) { return cplx(0.1 * (l - m) * (l - m)); };
  const auto a = zero_order_cumulant_correction(s, none, 1.0);
  const auto b = zero_order_cumulant_correction(s, real, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(a.values()[i], s.values()[i]);
    EXPECT_NEAR(b.values()[i], s.values()[i], 1e-15);
  }
}

TEST(ZeroOrder, MatchesQuadratureOfKineticTerm) {
  // Integrates the z-derivative of the correction with Simpson's rule.
  TimeGrid g(10.0, 16);
  const Psd s = random_psd(g, 7);
  const CumulantDensity s4 = [](long l, long m, long n, long k) {
    return cplx(0.01 * (l + 2 * m), -0.02 * (n - k));
  };
  const double z = 0.9, c = 2.0, w0 = g.omega0();
  const auto out = zero_order_cumulant_correction(s, s4, z);
  for (long k = g.min_mode(); k <= g.max_mode(); ++k) {
    double acc = 0.0;
    const int panels = 2000;
    for (int p = 0; p <= panels; ++p) {
      const double zz = z * p / panels;
      const double w = (p == 0 || p == panels) ? 1.0 : (p % 2 ? 4.0 : 2.0);
      cplx rate = 0.0;
      for (long l = g.min_mode(); l <= g.max_mode(); ++l)
        for (long m = g.min_mode(); m <= g.max_mode(); ++m) {
          const long n = l + m - k;
          if (l == k || m == k || !g.contains_mode(n)) continue;
          const double om = w0 * w0 * double(l * l + m * m - n * n - k * k);
          // d/dz of 2c Re(H S~) with dH/dz = -j exp(j Omega z)
          rate += -1i * std::exp(cplx(0.0, om * zz)) * s4(l, m, n, k);
        }
      acc += w * 2.0 * c * rate.real();
    }
    acc *= z / panels / 3.0;
    EXPECT_NEAR(out.at(k), s.at(k) + acc, 1e-9) << k;
  }
}

TEST(GFactor, Values) {
  EXPECT_NEAR(std::abs(g_factor(0.0, 1.0, 5) - 5.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(g_factor(std::numbers::pi, 1.0, 2)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(g_factor(2.0 * std::numbers::pi, 1.0, 3) - 3.0), 0.0, 1e-12);
  EXPECT_THROW(g_factor(1.0, 1.0, 0), InvalidArgument);
}

TEST(GFactor, ClosedFormMatchesDirectSum) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> o(-20.0, 20.0), e(0.1, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double omega = o(rng), span = e(rng);
    const std::size_t n = 1 + i % 9;
    cplx direct = 0.0;
    for (std::size_t j = 0; j < n; ++j) direct += std::exp(cplx(0.0, -double(j) * span * omega));
    EXPECT_NEAR(std::abs(g_factor(omega, span, n) - direct), 0.0, 1e-10);
    const double s1 = std::sin(0.5 * n * span * omega), s2 = std::sin(0.5 * span * omega);
    if (std::abs(s2) > 1e-3) EXPECT_NEAR(std::norm(g_factor(omega, span, n)), s1 * s1 / (s2 * s2), 1e-9);
  }
}

TEST(LinkKernelTest, MultiSpanFactorizesThroughGFactor) {
  const auto link = LinkConfig::physical(0.4, 1.0, DispersionSpec::quadratic(), 2.0, 4);
  const LinkKernel k(link, link.total_length());
  for (double omega : {-3.0, -0.1, 0.0, 0.25, 1.7}) {
    const double expect = std::norm(h_kernel_lossy(0.4, -omega, 2.0)) * std::norm(g_factor(-omega, 2.0, 4));
    EXPECT_NEAR(k.norm(omega), expect, 1e-12 * std::max(1.0, expect));
  }
  EXPECT_NEAR(k.output_loss(), 0.0, 1e-15);
}

TEST(LinkKernelTest, QuadratureOfLossProfile) {
  const auto link = LinkConfig::physical(0.7, 1.0, DispersionSpec::quadratic(), 1.5, 3);
  const double z = link.total_length();
  const LinkKernel k(link, z);
  for (double omega : {-2.0, 0.0, 0.9}) {
    const int panels = 30000;
    const double h = z / panels;
    cplx acc = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double l = (p + 0.5) * h;
      acc += std::exp(cplx(-link.loss_exponent(l), omega * l));
    }
    acc *= -1i * h;
    EXPECT_NEAR(std::abs(k(omega) - acc), 0.0, 1e-7);
  }
}

TEST(Multispan, ReducesToSingleSpan) {
  TimeGrid g(10.0, 32);
  const Psd s = random_psd(g, 9, 0.1);
  const auto lossless = LinkConfig::physical(0.0, 2.0, DispersionSpec::polynomial({0.0, 0.0, -2.0}), 1.0, 1);
  const auto a = gn_psd_multispan(s, lossless);
  const auto b = gn_psd(s, 1.0, 1.0);
  const auto c = kz_psd_multispan(s, lossless);
  const auto d = kz_psd(s, 1.0, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(a.value(i), b.value(i), 1e-13);
    EXPECT_NEAR(c.value(i), d.value(i), 1e-13);
  }
}

TEST(Multispan, GammaZeroIsIdentity) {
  TimeGrid g(10.0, 32);
  const Psd s = random_psd(g, 10);
  const auto link = LinkConfig::physical(0.2, 0.0, DispersionSpec::quadratic(), 1.0, 3);
  const auto a = gn_psd_multispan(s, link);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(a.value(i), s.values()[i], 1e-15);
}

TEST(Multispan, LosslessKzPreservesEnergy) {
  TimeGrid g(10.0, 32);
  const Psd s = random_psd(g, 11);
  for (std::size_t spans : {1u, 2u, 5u}) {
    const auto link = LinkConfig::physical(0.0, 1.0, DispersionSpec::polynomial({0.0, 0.0, -1.0}), 0.5, spans);
    const auto kz = kz_psd_multispan(s, link);
    EXPECT_LE(std::abs(kz.total_correction()), 1e-12 * s.total());
  }
}

TEST(Multispan, LossyKzPreservesEnergy) {
  // Loss enters only through the common kernel, so the correction still sums
  // to zero.
  TimeGrid g(10.0, 32);
  const Psd s = random_psd(g, 12);
  const auto link = LinkConfig::physical(0.5, 1.0, DispersionSpec::polynomial({0.0, 0.0, -1.0}), 1.0, 3);
  EXPECT_LE(std::abs(kz_psd_multispan(s, link).total_correction()), 1e-12 * s.total());
}

TEST(Multispan, CorrectionGrowsAsSpanCountSquaredNearZeroMismatch) {
  // Narrow spectrum: every active mismatch is near zero.
  TimeGrid g(2000.0, 32);
  Psd s(g);
  for (long k = -3; k <= 3; ++k) s.at(k) = 1e-3;
  std::vector<double> x, y;
  for (std::size_t spans : {1u, 2u, 4u, 8u}) {
    const auto link = LinkConfig::physical(0.2, 1.0, DispersionSpec::polynomial({0.0, 0.0, -1.0}), 5.0, spans);
    x.push_back(std::log(double(spans)));
    y.push_back(std::log(gn_psd_multispan(s, link).correction[g.index_of(0)]));
  }
  const double mx = (x[0] + x[1] + x[2] + x[3]) / 4, my = (y[0] + y[1] + y[2] + y[3]) / 4;
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < 4; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  EXPECT_NEAR(sxy / sxx, 2.0, 0.1);
}

TEST(Multispan, OutputIsPostAmplifier) {
  TimeGrid g(10.0, 16);
  const Psd s = random_psd(g, 13);
  const auto link = LinkConfig::physical(0.3, 0.0, DispersionSpec::quadratic(), 2.0, 2);
  const auto gn = gn_psd_multispan(s, link);
  EXPECT_EQ(gn.output_loss, 0.0);
  const auto mid = gn_psd(s, link, 3.0);
  EXPECT_NEAR(mid.value(0), std::exp(-0.3) * s.values()[0], 1e-15);
}

TEST(KernelNormsTest, TabulatedMatchesDirect) {
  TimeGrid g(10.0, 32);
  const auto link = LinkConfig::physical(0.0, 1.0, DispersionSpec::polynomial({0.1, 0.2, -1.5}), 1e9, 1);
  const KernelNorms tab(g, link, 1.3);
  ASSERT_TRUE(tab.tabulated());
  for (long l = -16; l < 16; l += 3)
    for (long m = -16; m < 16; m += 5)
      for (long k = -16; k < 16; k += 7) {
        const long n = l + m - k;
        if (!g.contains_mode(n)) continue;
        EXPECT_NEAR(tab(l, m, n, k), h_kernel_norm(tab.omega(l, m, n, k), 1.3), 1e-9);
      }
  const auto cubic = LinkConfig::physical(0.0, 1.0, DispersionSpec::polynomial({0.0, 0.0, -1.0, 0.3}), 1e9, 1);
  EXPECT_FALSE(KernelNorms(g, cubic, 1.0).tabulated());
}
