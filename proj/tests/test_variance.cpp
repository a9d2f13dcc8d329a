#include "mcband/density.hpp"
#include "mcband/simulate.hpp"
#include "mcband/variance.hpp"

#include "stats.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mcband;
namespace ts = testing_support;

namespace {

const WaveletBasis& basis()
{
  static const WaveletBasis b(4, 1, 12);
  return b;
}

std::vector<double> iid_normal(std::size_t n, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> x(n);
  for (double& v : x) {
    v = normal(rng);
  }
  return x;
}

// Independent evaluation of the Gaussian critical-value bound from the
// closed-form index set sizes, scanning j up to 400.
double zeta_bar_oracle(double alpha, double sigma, int N, int j0, double a, double b)
{
  double sup = 0.0;
  for (int j = j0; j <= 400; ++j) {
    const double s = std::ldexp(1.0, j);
    const double size = std::floor(s * b + N - 1) - std::ceil(s * a - N) + 1;
    sup = std::max(sup, (4.0 * std::log(size) + 2.0 * std::log(2.0)) / j);
  }
  const double C = std::sqrt(sup);
  return (std::sqrt(2.0 * std::log(1.0 / alpha)) + 2.0 * C + 32.0 / (3.0 * C) * std::pow(2.0, -2 * j0)) *
         std::sqrt(sigma);
}

} // namespace

TEST(Geyer, IidNormal)
{
  const auto x = iid_normal(1000000, 1);
  const auto v = geyer_variance(x);
  EXPECT_GE(v.value, 0.95);
  EXPECT_LE(v.value, 1.10);
  EXPECT_FALSE(v.degenerate);
  EXPECT_EQ(v.kind, "geyer-monotone");
}

TEST(Geyer, Ar1AnalyticVariance)
{
  const auto traj = simulate_ar1({ 0.5, 1.0 }, 1000000, 2, 0.0, true);
  const auto v = geyer_variance(traj.samples);
  EXPECT_GE(v.value, 3.8);
  EXPECT_LE(v.value, 4.5);
  EXPECT_GT(v.lag_truncation, 0);
}

TEST(Geyer, ConstantAndShortSequences)
{
  const std::vector<double> c(100, 2.5);
  const auto v = geyer_variance(c);
  EXPECT_EQ(v.value, 0.0);
  EXPECT_TRUE(v.degenerate);
  EXPECT_THROW(geyer_variance(std::vector<double>(9, 1.0)), DomainError);
  const auto x = iid_normal(10, 3);
  const auto small = geyer_variance(x);
  EXPECT_TRUE(std::isfinite(small.value));
  EXPECT_GE(small.value, 0.0);
}

TEST(Geyer, DeterministicAndSuppliedCenter)
{
  const auto x = iid_normal(5000, 4);
  EXPECT_EQ(geyer_variance(x).value, geyer_variance(x).value);
  std::vector<double> shifted = x;
  for (double& v : shifted) {
    v += 3.0;
  }
  EXPECT_NEAR(geyer_variance(shifted).value, geyer_variance(x).value, 1e-9);
  EXPECT_GT(geyer_variance(shifted, 0.0).value, 10.0 * geyer_variance(x).value);
}

// Finite-sample rendering of liminf Sigma_hat >= Sigma on AR(1) chains.
TEST(Geyer, OverEstimatesOnAr1)
{
  const int reps = 200;
  const double truth = 4.0;
  std::vector<double> est;
  for (int r = 0; r < reps; ++r) {
    const auto traj = simulate_ar1({ 0.5, 1.0 }, 100000, derive_seed(5, r), 0.0, true);
    est.push_back(geyer_variance(traj.samples).value);
  }
  const double se = std::sqrt(ts::variance(est));
  int above = 0;
  for (double v : est) {
    above += v >= truth - 2.0 * se ? 1 : 0;
  }
  EXPECT_GE(ts::mean(est), 0.97 * truth);
  EXPECT_GE(above, static_cast<int>(0.9 * reps));
}

TEST(SigmaSup, UniformHaar)
{
  const WaveletBasis haar(1, 1, 10);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Trajectory traj;
  for (int i = 0; i < 200000; ++i) {
    traj.samples.push_back(u(rng));
  }
  const auto s = sigma_sup(traj, haar, 4, 0.0, 1.0);
  EXPECT_GE(s.max_value, 0.9);
  EXPECT_LE(s.max_value, 1.15);
  EXPECT_EQ(s.variances.at(s.argmax_level, s.argmax_k), s.max_value);
}

TEST(SigmaSup, SmallSampleAndMonotoneInJ)
{
  const auto tiny = simulate_ou_exact(1.0, 1.0, 10, 1.0, 7, 0.0, true);
  EXPECT_TRUE(std::isfinite(sigma_sup(tiny, basis(), 2, -1.0, 1.0).max_value));

  const auto traj = simulate_ou_exact(1.0, 1.0, 20000, 1.0, 8, 0.0, true);
  double prev = 0.0;
  for (int J = 1; J <= 5; ++J) {
    const double s = sigma_sup(traj, basis(), J, -1.0, 1.0).max_value;
    EXPECT_GE(s, prev) << "J=" << J;
    prev = s;
  }
}

TEST(Contraction, Examples)
{
  EXPECT_DOUBLE_EQ(contraction_bound(0.0, 1.0), 1.0);
  EXPECT_NEAR(contraction_bound(1.0 / 3.0, 0.5642), 1.1284, 1e-12);
  double prev = 0.0;
  for (double rho = 0.0; rho < 0.999; rho += 0.01) {
    const double v = contraction_bound(rho, 0.5);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_THROW(contraction_bound(1.0, 1.0), DomainError);
  EXPECT_THROW(contraction_bound(-0.1, 1.0), DomainError);
  EXPECT_THROW(contraction_bound(0.5, 0.0), DomainError);
}

TEST(Rho, IidIsNearZero)
{
  const auto traj = simulate_ou_exact(1.0, 1.0, 100000, 50.0, 9, 0.0, true);
  const auto r = estimate_rho(traj, basis(), 3, -1.0, 1.0);
  EXPECT_LE(r.rho, 0.1);
  EXPECT_NEAR(r.leading, 1.0, 0.05);
}

// J = 4 on [-1, 1] has dim(V_J) = 104 and would need n >= 108160; the
// example runs on [-1/2, 1/2] (dim 72).
TEST(Rho, OuSpectralGap)
{
  const auto traj = simulate_ou_exact(1.0, 1.0, 100000, 0.5, 10, 0.0, true);
  EXPECT_THROW(estimate_rho(traj, basis(), 4, -1.0, 1.0), ConfigError);
  const auto r = estimate_rho(traj, basis(), 4, -0.5, 0.5);
  EXPECT_EQ(r.dimension, 72);
  EXPECT_GE(r.rho, std::exp(-0.5) - 0.08);
  EXPECT_LE(r.rho, std::exp(-0.5) + 0.08);
  EXPECT_EQ(estimate_rho(traj, basis(), 4, -0.5, 0.5).rho, r.rho);
}

// Sigma <= (1 + rho) / (1 - rho) sup mu on OU replications.
TEST(Contraction, DominatesSigmaSupOnOu)
{
  const int reps = 20;
  int ok = 0;
  for (int r = 0; r < reps; ++r) {
    const auto traj = simulate_ou_exact(1.0, 1.0, 50000, 1.0, derive_seed(11, r), 0.0, true);
    const double rho = estimate_rho(traj, basis(), 3, -1.0, 1.0).rho;
    const auto mu = estimate_density(traj, basis(), 3, -1.0, 1.0);
    const double bound = contraction_bound(rho, estimate_sup_mu(mu));
    ok += bound >= sigma_sup(traj, basis(), 3, -1.0, 1.0).max_value ? 1 : 0;
  }
  EXPECT_GE(ok, static_cast<int>(std::ceil(0.95 * reps)));
}

TEST(GaussianBound, MatchesIndependentFormula)
{
  const WaveletBasis b8(8, 1, 10);
  const auto w = WeightSequence::critical_value_normalized(WeightSequence::Kind::density, 1);
  const auto cv = zeta_gaussian_bound(0.05, 1.0, b8, w, 6, -1.0, 1.0);
  EXPECT_NEAR(cv.zeta, zeta_bar_oracle(0.05, 1.0, 8, 1, -1.0, 1.0), 1e-12);
  // |K_1| = 20 attains the sup: C^2 = 4 log 20 + 2 log 2
  EXPECT_NEAR(cv.C * cv.C, 4.0 * std::log(20.0) + 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(cv.zeta, 10.4898, 1e-4);
  EXPECT_EQ(cv.construction, "gaussian-bound");
}

TEST(GaussianBound, HomogeneityAndErrors)
{
  const auto w = WeightSequence::critical_value_normalized(WeightSequence::Kind::density, 1);
  const double z1 = zeta_gaussian_bound(0.1, 1.0, basis(), w, 5, -1.0, 1.0).zeta;
  for (double s : { 0.25, 2.0, 7.3 }) {
    EXPECT_NEAR(zeta_gaussian_bound(0.1, s, basis(), w, 5, -1.0, 1.0).zeta, std::sqrt(s) * z1,
                1e-12 * std::sqrt(s) * z1);
  }
  EXPECT_THROW(zeta_gaussian_bound(1.0, 1.0, basis(), w, 5, -1.0, 1.0), DomainError);
  const WaveletBasis j0_two(4, 2, 12);
  EXPECT_THROW(zeta_gaussian_bound(0.1, 1.0, j0_two, WeightSequence::density(), 5, -1.0, 1.0),
               ConfigError);
  EXPECT_THROW(zeta_gaussian_bound(0.1, 1.0, basis(), WeightSequence::density(0.5), 5, -1.0, 1.0),
               ConfigError);
  const auto wd = WeightSequence::critical_value_normalized(WeightSequence::Kind::drift_admissible, 1);
  EXPECT_NO_THROW(zeta_gaussian_bound(0.1, 1.0, basis(), wd, 5, -1.0, 1.0));
}

TEST(McQuantile, ZeroAndSingleCoefficient)
{
  MultiScaleCoeffs v(basis(), -1.0, 1.0, 3);
  EXPECT_EQ(zeta_mc_quantile(0.05, v, WeightSequence::density(), 2000, 1).zeta, 0.0);
  v.set(kScalingLevel, v.level(kScalingLevel).k_min, 1.0);
  const auto cv = zeta_mc_quantile(0.05, v, WeightSequence::density(), 100000, 2);
  EXPECT_NEAR(cv.zeta, 1.96, 0.02);
  EXPECT_EQ(cv.zeta, zeta_mc_quantile(0.05, v, WeightSequence::density(), 100000, 2).zeta);
  EXPECT_THROW(zeta_mc_quantile(0.05, v, WeightSequence::density(), 999, 2), ConfigError);
}

TEST(McQuantile, BelowGaussianBoundOnRandomConfigurations)
{
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto w = WeightSequence::critical_value_normalized(WeightSequence::Kind::density, 1);
  const double alphas[] = { 0.05, 0.1, 0.32 };
  const int configs = 100;
  int below = 0;
  for (int c = 0; c < configs; ++c) {
    const int J = 1 + static_cast<int>(u(rng) * 5);
    const double sigma = 0.1 + 3.0 * u(rng);
    const double alpha = alphas[c % 3];
    MultiScaleCoeffs v(basis(), -1.0, 1.0, J);
    for (auto& lv : v.levels()) {
      for (double& x : lv.values) {
        x = sigma * u(rng);
      }
    }
    const double mc = zeta_mc_quantile(alpha, v, w, 2000, derive_seed(13, c)).zeta;
    below += mc <= zeta_gaussian_bound(alpha, sigma, basis(), w, J, -1.0, 1.0).zeta ? 1 : 0;
  }
  EXPECT_GE(below, 99);
}

TEST(McQuantile, FullCovarianceMatchesDiagonalOnIidData)
{
  const auto traj = simulate_ou_exact(1.0, 1.0, 20000, 50.0, 14, 0.0, true);
  const auto w = WeightSequence::critical_value_normalized(WeightSequence::Kind::density, 1);
  const MultiScaleCoeffs layout(basis(), -1.0, 1.0, 2);
  const auto S = long_run_covariance(traj, basis(), 2, -1.0, 1.0);
  ASSERT_EQ(S.rows(), static_cast<long>(layout.size()));
  EXPECT_LE((S - S.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  const auto full = zeta_mc_quantile_full(0.1, S, layout, w, 5000, 3);
  const auto diag = zeta_mc_quantile(0.1, sigma_sup(traj, basis(), 2, -1.0, 1.0).variances, w, 5000, 3);
  EXPECT_EQ(full.covariance_model, "full");
  EXPECT_GT(full.zeta, 0.0);
  // correlation can only lower the max of |G| / w relative to independence
  // up to Monte Carlo error
  EXPECT_LE(full.zeta, 1.1 * diag.zeta);
}
