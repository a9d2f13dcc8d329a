#include "mcband/density.hpp"
#include "mcband/simulate.hpp"

#include "stats.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace mcband;

namespace {

double gauss_half(double x)
{
  return std::exp(-x * x) / std::sqrt(std::numbers::pi);
}

// n with n / log n = target, by bisection.
double solve_n_over_log_n(double target)
{
  double lo = 3.0;
  double hi = 1e12;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid / std::log(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

const WaveletBasis& basis()
{
  static const WaveletBasis b(4, 1, 12);
  return b;
}

DensityEstimate ou_estimate(std::size_t n, std::uint64_t seed, int J)
{
  return estimate_density(simulate_ou_exact(1.0, 1.0, n, 1.0, seed, 0.0, true), basis(), J, -1.0, 1.0);
}

double sup_error(const DensityEstimate& est)
{
  double err = 0.0;
  for (double x : linspace(-1.0, 1.0, 2049)) {
    err = std::max(err, std::abs(est(x) - gauss_half(x)));
  }
  return err;
}

} // namespace

TEST(Estimate, SingleSample)
{
  Trajectory t;
  t.samples = { 0.4 };
  const auto est = estimate_density(t, basis(), 3, -1.0, 1.0);
  EXPECT_EQ(est.n, 1u);
  for (const auto& lv : est.coeffs.levels()) {
    for (long k = lv.k_min; k <= lv.k_max(); ++k) {
      EXPECT_EQ(est.coeffs.at(lv.level, k), basis().eval(lv.level, k, 0.4));
    }
  }
  EXPECT_THROW(estimate_density(Trajectory{}, basis(), 3, -1.0, 1.0), DomainError);
}

TEST(Estimate, OuSupErrorAtScheduledLevel)
{
  const double n = 1e5;
  const int J = resolution_schedule_density(n, 1.0, Schedule::diffusion, basis().base_level());
  const auto est = ou_estimate(static_cast<std::size_t>(n), 2024, J);
  EXPECT_LE(sup_error(est), 0.05);
}

TEST(Estimate, ConcatenationIsAWeightedAverage)
{
  const auto a = simulate_ou_exact(1.0, 1.0, 3000, 1.0, 1, 0.0, true);
  const auto b = simulate_ou_exact(1.0, 1.0, 1000, 1.0, 2, 0.0, true);
  const auto ea = estimate_density(a, basis(), 4, -1.0, 1.0);
  const auto eb = estimate_density(b, basis(), 4, -1.0, 1.0);
  const auto eab = estimate_density(concatenate(a, b), basis(), 4, -1.0, 1.0);
  const auto eaa = estimate_density(concatenate(a, a), basis(), 4, -1.0, 1.0);
  for (std::size_t i = 0; i < eab.coeffs.levels().size(); ++i) {
    for (std::size_t k = 0; k < eab.coeffs.levels()[i].values.size(); ++k) {
      const double va = ea.coeffs.levels()[i].values[k];
      const double vb = eb.coeffs.levels()[i].values[k];
      EXPECT_NEAR(eab.coeffs.levels()[i].values[k], 0.75 * va + 0.25 * vb, 1e-13);
      EXPECT_NEAR(eaa.coeffs.levels()[i].values[k], va, 1e-13);
    }
  }
}

TEST(Schedule, ExactPowers)
{
  EXPECT_EQ(resolution_schedule_density(solve_n_over_log_n(512.0), 1.0, Schedule::chain), 3);
  EXPECT_EQ(resolution_schedule_density(solve_n_over_log_n(1024.0), 1.0, Schedule::diffusion), 2);
  EXPECT_EQ(resolution_schedule_density(100.0, 1.0, Schedule::chain, 3), 3);
  EXPECT_THROW(resolution_schedule_density(2.0, 1.0), DomainError);
}

TEST(Schedule, MonotoneInN)
{
  for (double s : { 0.5, 1.0, 2.0 }) {
    for (auto kind : { Schedule::chain, Schedule::diffusion }) {
      int prev = 0;
      for (double n = 1e3; n <= 1e7; n *= 1.1) {
        const int J = resolution_schedule_density(n, s, kind);
        EXPECT_GE(J, prev);
        prev = J;
      }
    }
  }
}

TEST(SupMu, ZeroScalingAndOu)
{
  DensityEstimate zero{ MultiScaleCoeffs(basis(), -1.0, 1.0, 3), 10, "fixed" };
  EXPECT_EQ(estimate_sup_mu(zero), 0.0);

  const auto est = ou_estimate(400000, 3, 4);
  EXPECT_NEAR(estimate_sup_mu(est), 1.0 / std::sqrt(std::numbers::pi), 0.03);

  auto scaled = est;
  scaled.coeffs *= 2.5;
  EXPECT_NEAR(estimate_sup_mu(scaled), 2.5 * estimate_sup_mu(est), 1e-12);
}

class Bands : public ::testing::Test
{
protected:
  DensityEstimate est = ou_estimate(20000, 11, 3);
  WeightSequence w = WeightSequence::critical_value_normalized(WeightSequence::Kind::density, 1);
  double zeta = 5.0;
};

TEST_F(Bands, CenterIsInside)
{
  for (auto mode : { BandMode::multiscale, BandMode::smoothness_cap, BandMode::linf }) {
    const auto band = band_density(est, zeta, w, 1.0, mode);
    if (mode == BandMode::smoothness_cap) {
      EXPECT_TRUE(band_contains(band, est.coeffs, band.cap->u));
    } else {
      EXPECT_TRUE(band_contains(band, est.coeffs));
    }
  }
  EXPECT_THROW(band_density(est, 0.0, w, 1.0, BandMode::multiscale), DomainError);
}

TEST_F(Bands, OneCoefficientJustOutside)
{
  const auto band = band_density(est, zeta, w, 1.0, BandMode::multiscale);
  const double r = band.multiscale_radius();
  EXPECT_DOUBLE_EQ(r, zeta / std::sqrt(20000.0));
  for (int j : { kScalingLevel, 1, 3 }) {
    auto c = est.coeffs;
    const long k = c.level(j).k_min + 1;
    c.set(j, k, c.at(j, k) + 1.01 * r * w(j));
    EXPECT_FALSE(band_contains(band, c)) << "j=" << j;
    c.set(j, k, est.coeffs.at(j, k) + 0.99 * r * w(j));
    EXPECT_TRUE(band_contains(band, c)) << "j=" << j;
  }
}

TEST_F(Bands, FunctionMembership)
{
  const auto band = band_density(est, zeta, w, 1.0, BandMode::multiscale);
  const auto& c = est.coeffs;
  std::function<double(double)> center = [&](double x) { return synthesize(c, x); };
  EXPECT_TRUE(band_contains(band, center));
  const double bump = 2.0 * band.multiscale_radius() * w(1);
  std::function<double(double)> moved = [&](double x) {
    return synthesize(c, x) + bump * basis().eval(1, 0, x);
  };
  EXPECT_FALSE(band_contains(band, moved));
}

TEST_F(Bands, CapRecordsNominalU)
{
  const auto band = band_density(est, zeta, w, 1.0, BandMode::smoothness_cap);
  ASSERT_TRUE(band.cap);
  EXPECT_DOUBLE_EQ(band.cap->u, w(3) / std::sqrt(3.0));
  EXPECT_TRUE(band_contains(band, est.coeffs, band.cap->u));
  EXPECT_FALSE(band_contains(band, est.coeffs, 1.0001 * band.cap->u));
  EXPECT_THROW(band_contains(band, est.coeffs), DomainError);
  const auto scaled = band_density(est, zeta, w, 1.0, BandMode::smoothness_cap, 4.0);
  EXPECT_DOUBLE_EQ(scaled.cap->u, 4.0 * band.cap->u);
}

TEST_F(Bands, LinfConstantIsComputed)
{
  const auto band = band_density(est, zeta, w, 1.0, BandMode::linf);
  ASSERT_TRUE(band.linf);
  const auto& L = *band.linf;
  EXPECT_GT(L.stochastic, 0.0);
  EXPECT_GT(L.bias, 0.0);
  EXPECT_DOUBLE_EQ(L.radius, L.stochastic + L.bias);
  const double n = 20000.0;
  EXPECT_DOUBLE_EQ(L.rate, std::pow(n / std::log(n), -1.0 / 3.0) * band.cap->u);
  EXPECT_DOUBLE_EQ(L.constant, L.radius / L.rate);
}

// Any coefficient perturbation inside the multi-scale ball up to level J moves
// the function by at most the stochastic part of the radius.
TEST_F(Bands, StochasticRadiusBoundsPerturbations)
{
  const auto band = band_density(est, zeta, w, 1.0, BandMode::smoothness_cap);
  const double r = band.multiscale_radius();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> sign(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = est.coeffs;
    for (auto& lv : c.levels()) {
      for (double& v : lv.values) {
        v += (trial % 2 ? 0.999 * (sign(rng) > 0 ? 1 : -1) : sign(rng)) * r * w(lv.level);
      }
    }
    double moved = 0.0;
    for (double x : linspace(-1.0, 1.0, 1025)) {
      moved = std::max(moved, std::abs(synthesize(c, x) - est(x)));
    }
    EXPECT_LE(moved, band.linf->stochastic);
  }
}

TEST_F(Bands, NestingInZeta)
{
  const auto small = band_density(est, 2.0, w, 1.0, BandMode::multiscale);
  const auto large = band_density(est, 3.0, w, 1.0, BandMode::multiscale);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    auto c = est.coeffs;
    for (auto& lv : c.levels()) {
      for (double& v : lv.values) {
        v += 0.5 * normal(rng) * small.multiscale_radius() * w(lv.level);
      }
    }
    if (band_contains(small, c)) {
      EXPECT_TRUE(band_contains(large, c));
    }
  }
}

TEST(Rate, SupErrorShrinksFromNTo16N)
{
  const double n = 2e4;
  const int J_lo = resolution_schedule_density(n, 1.0, Schedule::diffusion, 1);
  const int J_hi = resolution_schedule_density(16 * n, 1.0, Schedule::diffusion, 1);
  double e_lo = 0.0;
  double e_hi = 0.0;
  for (int r = 0; r < 50; ++r) {
    e_lo += sup_error(ou_estimate(static_cast<std::size_t>(n), derive_seed(31, r), J_lo));
    e_hi += sup_error(ou_estimate(static_cast<std::size_t>(16 * n), derive_seed(32, r), J_hi));
  }
  EXPECT_LE(e_hi / e_lo, 0.65);
}

TEST(Rows, EnvelopeUsesRadius)
{
  const auto rows = band_rows([](double x) { return x * x; }, -1.0, 1.0, 0.25, 5);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].x, -1.0);
  EXPECT_EQ(rows[4].x, 1.0);
  EXPECT_DOUBLE_EQ(rows[1].lower, 0.25 - 0.25);
  EXPECT_DOUBLE_EQ(rows[1].upper, 0.25 + 0.25);
}
