#include <kzpsd/spectral.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace kzpsd;

namespace {

Signal random_signal(const TimeGrid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Signal s(g);
  for (auto& v : s.samples()) v = {n(rng), n(rng)};
  return s;
}

double rel_diff(std::span<const cplx> a, std::span<const cplx> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST(TimeGrid, DerivedQuantities) {
  TimeGrid g(8.0, 16);
  EXPECT_DOUBLE_EQ(g.dt() * 16, 8.0);
  EXPECT_DOUBLE_EQ(g.omega0(), 2.0 * std::numbers::pi / 8.0);
  EXPECT_EQ(g.min_mode(), -8);
  EXPECT_EQ(g.max_mode(), 7);
  EXPECT_THROW(TimeGrid(1.0, 2), InvalidArgument);
  EXPECT_THROW(TimeGrid(1.0, 12), InvalidArgument);
}

TEST(Transform, ConstantIsDcOnly) {
  TimeGrid g(4.0, 32);
  Signal s(g);
  for (auto& v : s.samples()) v = {1.5, -0.5};
  const Spectrum q = forward_transform(s);
  for (long k = g.min_mode(); k <= g.max_mode(); ++k) {
    const cplx expect = k == 0 ? cplx(1.5, -0.5) : cplx(0.0);
    EXPECT_NEAR(std::abs(q.at(k) - expect), 0.0, 1e-14) << k;
  }
}

TEST(Transform, NegativeToneLandsOnPlusOne) {
  TimeGrid g(2.0 * std::numbers::pi, 64);
  Signal s(g);
  for (std::size_t n = 0; n < g.size(); ++n) s[n] = std::polar(1.0, -g.omega0() * g.time(n));
  const Spectrum q = forward_transform(s);
  EXPECT_NEAR(std::abs(q.at(1) - 1.0), 0.0, 1e-13);
  EXPECT_NEAR(std::abs(q.at(-1)), 0.0, 1e-13);
}

TEST(Transform, RoundTrip) {
  TimeGrid g(10.0, 256);
  const Signal s = random_signal(g, 3);
  const Signal back = inverse_transform(forward_transform(s));
  EXPECT_LE(rel_diff(back.samples(), s.samples()), 1e-12);

  const Spectrum q = forward_transform(s);
  const Spectrum q2 = forward_transform(inverse_transform(q));
  EXPECT_LE(rel_diff(q2.coeffs(), q.coeffs()), 1e-12);
}

TEST(Power, TrivialCases) {
  TimeGrid g(1.0, 8);
  Spectrum q(g);
  EXPECT_EQ(power(q), 0.0);
  q.at(0) = 2.0;
  EXPECT_DOUBLE_EQ(power(q), 4.0);
}

TEST(Power, ParsevalAgainstQuadrature) {
  TimeGrid g(6.0, 512);
  const Signal s = random_signal(g, 11);
  double mean = 0.0;
  for (const cplx& v : s.samples()) mean += std::norm(v) * g.dt();
  mean /= g.period();
  EXPECT_NEAR(power(forward_transform(s)) / mean, 1.0, 1e-10);
  EXPECT_NEAR(energy(s) / g.period() / mean, 1.0, 1e-12);
}

TEST(Hamiltonian, PaperRatios) {
  TimeGrid g(64.0, 1024);
  // a(A) = sqrt(2) A^2 at the input; the 0.21 quoted for A = 0.5 is reached
  // after unit distance (see the perturbation tests).
  const auto h = hamiltonian(gaussian_pulse(g, 0.5));
  ASSERT_TRUE(h.ratio);
  EXPECT_NEAR(*h.ratio, std::sqrt(2.0) * 0.25, 1e-9);

  const auto h2 = hamiltonian(gaussian_pulse(g, 2.0));
  EXPECT_NEAR(*h2.ratio, 5.65, 0.01);
}

TEST(Hamiltonian, GaussianClosedForms) {
  TimeGrid g(64.0, 1024);
  const double a = 1.3;
  const auto h = hamiltonian(gaussian_pulse(g, a));
  const double rpi = std::sqrt(std::numbers::pi);
  EXPECT_NEAR(h.linear, a * a * rpi / 2.0, 1e-10);
  EXPECT_NEAR(h.nonlinear, std::pow(a, 4) * rpi / std::sqrt(2.0), 1e-10);
}

TEST(Hamiltonian, Homogeneity) {
  TimeGrid g(32.0, 256);
  const Signal s = gaussian_pulse(g, 0.7);
  Signal t = s;
  const cplx lambda(1.1, -0.6);
  for (auto& v : t.samples()) v *= lambda;
  const double a = *hamiltonian(s).ratio;
  const double b = *hamiltonian(t).ratio;
  EXPECT_NEAR(b / (std::norm(lambda) * a), 1.0, 1e-12);
}

TEST(Hamiltonian, ZeroSignalHasNoRatio) {
  TimeGrid g(8.0, 16);
  const auto h = hamiltonian(Signal(g));
  EXPECT_FALSE(h.ratio.has_value());
  EXPECT_EQ(h.nonlinear, 0.0);
}

TEST(GaussianPulse, EdgesVanish) {
  TimeGrid g(64.0, 512);
  const Signal s = gaussian_pulse(g, 1.0);
  EXPECT_LT(std::abs(s[0]), 1e-12);
}

TEST(Periodogram, MatchesCoefficients) {
  TimeGrid g(8.0, 16);
  Spectrum q(g);
  q.at(3) = {1.0, 2.0};
  const Psd p = periodogram(q);
  EXPECT_DOUBLE_EQ(p.at(3), 5.0);
  EXPECT_DOUBLE_EQ(p.total(), 5.0);
  EXPECT_TRUE(p.nonnegative());
}
