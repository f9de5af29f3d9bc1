#include <kzpsd/nls.hpp>
#include <kzpsd/perturbation.hpp>
#include <kzpsd/psd.hpp>
#include <kzpsd/statistics.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

using namespace kzpsd;

namespace {

double conserved_hamiltonian(const Signal& s, double c) {
  const auto h = hamiltonian(s);
  return h.linear - 0.5 * c * h.nonlinear;
}

}  // namespace

TEST(Propagate, ZeroInputStaysZero) {
  TimeGrid g(16.0, 64);
  const Signal out = oracle::propagate(Signal(g), LinkConfig::physical(0.1, 1.3, DispersionSpec::quadratic(), 5.0, 1), 2.0);
  for (const cplx& v : out.samples()) EXPECT_EQ(v, cplx(0.0));
}

TEST(Propagate, LinearIsPerModePhase) {
  TimeGrid g(32.0, 256);
  const Signal in = gaussian_pulse(g, 1.0);
  const auto link = LinkConfig::dimensionless().with_nonlinear_coeff(0.0);
  const double z = 0.7;
  const Spectrum a = forward_transform(in);
  const Spectrum b = forward_transform(oracle::propagate(in, link, z));
  for (long k = g.min_mode(); k <= g.max_mode(); ++k) {
    const double w = g.omega(k);
    const cplx expect = std::polar(1.0, w * w * z) * a.at(k);
    EXPECT_NEAR(std::abs(b.at(k) - expect), 0.0, 1e-12);
  }
}

TEST(Propagate, EnergyAndHamiltonianConserved) {
  TimeGrid g(32.0, 512);
  const Signal in = gaussian_pulse(g, 1.0);
  const auto link = LinkConfig::dimensionless();
  const Signal out = oracle::propagate(in, link, 1.0);
  EXPECT_LE(std::abs(energy(out) / energy(in) - 1.0), 1e-8);
  const double h0 = conserved_hamiltonian(in, 2.0);
  EXPECT_LE(std::abs(conserved_hamiltonian(out, 2.0) / h0 - 1.0), 1e-5);
}

TEST(Propagate, SecondOrderInStep) {
  TimeGrid g(64.0, 1024);
  const Signal in = gaussian_pulse(g, 2.0);
  const auto link = LinkConfig::dimensionless();
  const double h0 = conserved_hamiltonian(in, 2.0);
  auto drift = [&](double h) {
    return std::abs(conserved_hamiltonian(oracle::propagate(in, link, 1.0, {h, 0.05, true}), 2.0) - h0);
  };
  const double ratio = drift(1e-3) / drift(5e-4);
  EXPECT_NEAR(ratio, 4.0, 0.4);
}

TEST(Propagate, CoarseStepRefusedWithoutRefinement) {
  TimeGrid g(32.0, 256);
  const Signal in = gaussian_pulse(g, 3.0);
  StepConfig step{0.5, 0.05, false};
  EXPECT_THROW(oracle::propagate(in, LinkConfig::dimensionless(), 1.0, step), StepTooCoarse);
  step.auto_refine = true;
  EXPECT_NO_THROW(oracle::propagate(in, LinkConfig::dimensionless(), 0.1, step));
}

TEST(Propagate, NonFiniteInputRejected) {
  TimeGrid g(16.0, 32);
  Signal s(g);
  s[3] = {std::nan(""), 0.0};
  EXPECT_THROW(oracle::propagate(s, LinkConfig::dimensionless(), 1.0), NumericalError);
}

TEST(Propagate, LossDecaysEnergyExponentially) {
  TimeGrid g(32.0, 256);
  const Signal in = gaussian_pulse(g, 0.5);
  const auto link = LinkConfig::physical(0.3, 1.0, DispersionSpec::quadratic(), 10.0, 1);
  const Signal out = oracle::propagate(in, link, 2.0);
  EXPECT_NEAR(energy(out) / energy(in), std::exp(-0.6), 1e-10);
}

TEST(PropagateSpans, LinearLossFullyCompensated) {
  TimeGrid g(32.0, 256);
  const Signal in = gaussian_pulse(g, 0.8);
  const auto link = LinkConfig::physical(0.4, 0.0, DispersionSpec::polynomial({0.0, 0.0, -1.0}), 2.5, 3);
  const Spectrum a = forward_transform(in);
  const Spectrum b = forward_transform(oracle::propagate_spans(in, link));
  for (long k = g.min_mode(); k <= g.max_mode(); ++k) EXPECT_NEAR(std::abs(b.at(k)), std::abs(a.at(k)), 1e-12);
}

TEST(PropagateSpans, OneSpanIsLossySpanPlusGain) {
  TimeGrid g(32.0, 256);
  const Signal in = gaussian_pulse(g, 0.8);
  const auto link = LinkConfig::physical(0.2, 1.1, DispersionSpec::quadratic(), 1.5, 1);
  Signal manual = oracle::propagate(in, link, 1.5);
  for (auto& v : manual.samples()) v *= std::exp(0.5 * 0.2 * 1.5);
  const Signal spans = oracle::propagate_spans(in, link);
  EXPECT_LE(perturbation::relative_error(forward_transform(spans), forward_transform(manual)), 1e-13);
}

TEST(PropagateSpans, MatchesMultispanFirstOrderAtLowPower) {
  // FWM sidebands of two spans against the G-factor kernel: the residual of
  // the first-order signal shrinks as gamma^2.
  TimeGrid g(32.0, 128);
  const Signal in = gaussian_pulse(g, 1.0);
  auto residual = [&](double gamma) {
    const auto link = LinkConfig::physical(0.5, gamma, DispersionSpec::polynomial({0.0, 0.0, -2.0}), 1.0, 2);
    const Spectrum exact = forward_transform(oracle::propagate_spans(in, link));
    const Spectrum first = perturbation::first_order_multispan(forward_transform(in), link);
    return perturbation::relative_error(first, exact);
  };
  const double r1 = residual(0.1);
  const double r2 = residual(0.05);
  EXPECT_NEAR(r1 / r2, 4.0, 0.4);
}

TEST(ModeTrajectory, LinearTrajectoriesAreConstant) {
  TimeGrid g(32.0, 128);
  const Signal in = gaussian_pulse(g, 1.0);
  const std::vector<double> z{0.5, 1.0, 2.0};
  const std::vector<long> modes{0, 3, -64};
  const auto t = oracle::mode_trajectory(in, LinkConfig::dimensionless().with_nonlinear_coeff(0.0), z, modes);
  for (std::size_t i = 1; i < z.size(); ++i)
    for (std::size_t j = 0; j < modes.size(); ++j) EXPECT_NEAR(t.magnitude[i][j], t.magnitude[0][j], 1e-13);
}

TEST(ModeTrajectory, PowerConservedAlongTrajectory) {
  TimeGrid g(32.0, 256);
  const Signal in = gaussian_pulse(g, 2.0);
  std::vector<double> z;
  for (int i = 1; i <= 10; ++i) z.push_back(0.5 * i);
  const std::vector<long> modes{0, -128};
  const auto t = oracle::mode_trajectory(in, LinkConfig::dimensionless(), z, modes);
  const double p0 = power(forward_transform(in));
  for (double p : t.power) EXPECT_LE(std::abs(p / p0 - 1.0), 1e-6);
}

TEST(ModeTrajectory, RejectsDecreasingDistances) {
  TimeGrid g(16.0, 32);
  const std::vector<double> z{1.0, 0.5};
  const std::vector<long> modes{0};
  EXPECT_THROW(oracle::mode_trajectory(Signal(g), LinkConfig::dimensionless(), z, modes), InvalidArgument);
}

TEST(MonteCarlo, LinearPreservesSecondMoments) {
  TimeGrid g(16.0, 32);
  Psd s0(g);
  for (long k = g.min_mode(); k <= g.max_mode(); ++k) s0.at(k) = std::exp(-0.1 * k * k);
  const auto link = LinkConfig::dimensionless().with_nonlinear_coeff(0.0);
  const auto mc = oracle::estimate_psd_mc(oracle::gaussian_process_sampler(s0), link, 1.0, 2000, 5);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double tol = 3.0 * mc.std_error[i] + 1e-15;
    EXPECT_LE(std::abs(mc.mean.values()[i] - s0.values()[i]), std::max(tol, 1e-12)) << i;
  }
}

TEST(MonteCarlo, DeterministicAcrossThreadCounts) {
  TimeGrid g(16.0, 32);
  Psd s0(g);
  for (long k = -4; k <= 4; ++k) s0.at(k) = 0.05;
  const auto sampler = oracle::gaussian_process_sampler(s0);
  const auto link = LinkConfig::dimensionless();
  setenv("KZPSD_THREADS", "1", 1);
  const auto a = oracle::estimate_psd_mc(sampler, link, 0.5, 16, 42);
  setenv("KZPSD_THREADS", "3", 1);
  const auto b = oracle::estimate_psd_mc(sampler, link, 0.5, 16, 42);
  unsetenv("KZPSD_THREADS");
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(a.mean.values()[i], b.mean.values()[i]);
    EXPECT_EQ(a.std_error[i], b.std_error[i]);
  }
}

TEST(MonteCarlo, NeedsTwoRealizations) {
  TimeGrid g(16.0, 32);
  Psd s0(g);
  EXPECT_THROW(oracle::estimate_psd_mc(oracle::gaussian_process_sampler(s0), LinkConfig::dimensionless(), 1.0, 1, 0),
               InvalidArgument);
}

TEST(MonteCarlo, FailuresCarryRealizationIndex) {
  TimeGrid g(16.0, 32);
  oracle::Sampler bad = [g](oracle::Rng&) {
    Spectrum s(g);
    s.at(0) = {std::nan(""), 0.0};
    return s;
  };
  try {
    oracle::simulate_ensemble(bad, LinkConfig::dimensionless(), 1.0, 4, 1);
    FAIL() << "expected a realization error";
  } catch (const RealizationError& e) {
    EXPECT_LT(e.index(), 4u);
  }
}

TEST(MonteCarlo, FocusingAndDefocusingSpectraDiffer) {
  // Same inputs through both signs.  The models see only c^2; the oracle
  // shows a significant sign-odd part, smaller than the common change.
  TimeGrid g(32.0, 64);
  Psd s0(g);
  for (long k = g.min_mode(); k <= g.max_mode(); ++k) s0.at(k) = 0.02 * std::exp(-0.05 * k * k);
  const auto sampler = oracle::gaussian_process_sampler(s0);
  const std::size_t R = 400;
  const auto f = oracle::simulate_ensemble(sampler, LinkConfig::dimensionless(1.0, +1), 1.0, R, 9);
  const auto d = oracle::simulate_ensemble(sampler, LinkConfig::dimensionless(1.0, -1), 1.0, R, 9);
  double worst = 0.0, odd = 0.0, even = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::vector<cplx> diff(R);
    double o = 0.0, e = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      auto rng = oracle::realization_rng(9, r);
      const double in = std::norm(sampler(rng).coeffs()[i]);
      const double a = std::norm(f[r].coeffs()[i]), b = std::norm(d[r].coeffs()[i]);
      diff[r] = a - b;
      o += 0.5 * (a - b) / R;
      e += (0.5 * (a + b) - in) / R;
    }
    const auto est = stats::detail::mean_with_stderr(diff);
    worst = std::max(worst, std::abs(est.value) / est.std_error);
    odd += o * o;
    even += e * e;
  }
  EXPECT_GT(worst, 4.0);
  EXPECT_LT(odd, even);
  const auto gp = models::gn_psd(s0, LinkConfig::dimensionless(1.0, +1), 1.0);
  const auto gm = models::gn_psd(s0, LinkConfig::dimensionless(1.0, -1), 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(gp.value(i), gm.value(i));
}
