#include "mcband/drift.hpp"
#include "mcband/holder.hpp"
#include "mcband/simulate.hpp"
#include "mcband/variance.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace mcband;
using boost::math::quadrature::gauss_kronrod;

namespace {

double gauss_half(double x)
{
  return std::exp(-x * x) / std::sqrt(std::numbers::pi);
}

double gauss_half_prime(double x)
{
  return -2.0 * x * gauss_half(x);
}

const WaveletBasis& basis()
{
  static const WaveletBasis b(4, 1, 12);
  return b;
}

double sup_on(const std::function<double(double)>& f, double a, double b, int points = 1025)
{
  double m = 0.0;
  for (double x : linspace(a, b, points)) {
    m = std::max(m, std::abs(f(x)));
  }
  return m;
}

// Positive smooth density: two-component Gaussian mixture with random
// location, scale and weight.
struct Mixture
{
  double w, m1, s1, m2, s2;

  static Mixture random(std::mt19937_64& rng)
  {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return { 0.2 + 0.6 * u(rng), -0.5 + u(rng), 0.5 + u(rng), -0.5 + u(rng), 0.5 + u(rng) };
  }
  static double g(double x, double m, double s)
  {
    const double z = (x - m) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
  }
  double operator()(double x) const { return w * g(x, m1, s1) + (1 - w) * g(x, m2, s2); }
  double prime(double x) const
  {
    return -w * (x - m1) / (s1 * s1) * g(x, m1, s1) - (1 - w) * (x - m2) / (s2 * s2) * g(x, m2, s2);
  }
};

// Smooth perturbation c0 + c1 sin(f x + p).
struct Wave
{
  double c0, c1, f, p;

  static Wave random(std::mt19937_64& rng)
  {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return { 0.1 * u(rng), 0.1 * u(rng), 1.0 + 2.0 * std::abs(u(rng)), 3.0 * u(rng) };
  }
  double operator()(double x) const { return c0 + c1 * std::sin(f * x + p); }
  double prime(double x) const { return c1 * f * std::cos(f * x + p); }
};

} // namespace

TEST(Xi, GaussianLogDerivatives)
{
  for (double x : linspace(-2.0, 2.0, 41)) {
    EXPECT_NEAR(xi_forward(gauss_half, gauss_half_prime, x, 1e-300), -x, 1e-14);
    auto n01 = [](double y) { return std::exp(-0.5 * y * y); };
    auto dn01 = [](double y) { return -y * std::exp(-0.5 * y * y); };
    EXPECT_NEAR(xi_forward(n01, dn01, x, 1e-300), -0.5 * x, 1e-14);
  }
}

TEST(Xi, ScaleInvariance)
{
  std::mt19937_64 rng(1);
  const auto f = Mixture::random(rng);
  for (double x : linspace(-1.0, 1.0, 21)) {
    const double base = xi_forward(f(x), f.prime(x), x, 0.0);
    EXPECT_NEAR(xi_forward(3.7 * f(x), 3.7 * f.prime(x), x, 0.0), base, 1e-12);
  }
}

TEST(Xi, FloorViolationCarriesLocation)
{
  try {
    xi_forward(1e-6, 0.0, 0.75, 1e-4);
    FAIL();
  } catch (const PositivityError& e) {
    EXPECT_EQ(e.x_lo(), 0.75);
    EXPECT_EQ(e.x_hi(), 0.75);
  }
}

TEST(XiInverse, LinearDriftGivesGaussian)
{
  const auto f = xi_inverse([](double x) { return -x; }, -3.0, 3.0);
  const double mass = std::erf(3.0);
  for (double x : linspace(-3.0, 3.0, 61)) {
    EXPECT_NEAR(f(x), gauss_half(x) / mass, 1e-8);
  }
}

TEST(XiInverse, ZeroDriftGivesUniform)
{
  const auto f = xi_inverse([](double) { return 0.0; }, -1.0, 3.0);
  for (double x : linspace(-1.0, 3.0, 41)) {
    EXPECT_NEAR(f(x), 0.25, 1e-12);
  }
}

TEST(XiInverse, CubicRoundTripAndMass)
{
  auto g = [](double x) { return -x * x * x; };
  const auto f = xi_inverse(g, -2.0, 2.0);
  double err = 0.0;
  for (double x : linspace(-2.0, 2.0, 801)) {
    err = std::max(err, std::abs(xi_forward(f(x), f.derivative(x), x, 0.0) - g(x)));
  }
  EXPECT_LE(err, 1e-4);
  const double mass = gauss_kronrod<double, 61>::integrate([&](double x) { return f(x); }, -2.0, 2.0, 15, 1e-12);
  EXPECT_NEAR(mass, 1.0, 1e-6);
}

// xi^{-1} o xi = id up to normalization, xi o xi^{-1} = id, random inputs.
TEST(XiInverse, RoundTripsOnRandomInputs)
{
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = Mixture::random(rng);
    const auto back = xi_inverse([&](double x) { return 0.5 * f.prime(x) / f(x); }, -2.0, 2.0);
    const double mass = gauss_kronrod<double, 61>::integrate(f, -2.0, 2.0, 15, 1e-12);
    for (double x : linspace(-2.0, 2.0, 41)) {
      EXPECT_NEAR(back(x), f(x) / mass, 1e-6 * f(x) / mass);
    }
    const auto wave = Wave::random(rng);
    const auto h = xi_inverse([&](double x) { return wave(x); }, -2.0, 2.0);
    for (double x : linspace(-2.0, 2.0, 41)) {
      EXPECT_NEAR(xi_forward(h(x), h.derivative(x), x, 0.0), wave(x), 1e-6);
    }
  }
}

// ||xi(f) - xi(g)||_inf <= ||1/f||_inf (1/2 + ||xi(g)||_inf) ||f - g||_{C^1}.
TEST(XiLipschitz, LocalBoundOnRandomPairs)
{
  std::mt19937_64 rng(3);
  const double a = -1.0;
  const double b = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = Mixture::random(rng);
    const auto g = Mixture::random(rng);
    double lhs = 0.0, inv_f = 0.0, xi_g = 0.0, diff = 0.0, ddiff = 0.0;
    for (double x : linspace(a, b, 4097)) {
      lhs = std::max(lhs, std::abs(0.5 * f.prime(x) / f(x) - 0.5 * g.prime(x) / g(x)));
      inv_f = std::max(inv_f, 1.0 / f(x));
      xi_g = std::max(xi_g, std::abs(0.5 * g.prime(x) / g(x)));
      diff = std::max(diff, std::abs(f(x) - g(x)));
      ddiff = std::max(ddiff, std::abs(f.prime(x) - g.prime(x)));
    }
    EXPECT_LE(lhs, inv_f * (0.5 + xi_g) * (diff + ddiff) * (1 + 1e-6));
  }
}

TEST(XiDerivative, Examples)
{
  for (double x : linspace(-1.0, 1.0, 21)) {
    EXPECT_NEAR(xi_derivative(gauss_half(x), gauss_half_prime(x), gauss_half(x),
                              gauss_half_prime(x), x, 0.0),
                0.0, 1e-14);
  }
  // constant h = c: finite differences of xi(mu + t c) at t = 1e-6
  const double c = 0.3;
  const double t = 1e-6;
  for (double x : linspace(-1.0, 1.0, 21)) {
    const double mu = gauss_half(x);
    const double dmu = gauss_half_prime(x);
    const double exact = xi_derivative(mu, dmu, c, 0.0, x, 0.0);
    const double fd = (0.5 * dmu / (mu + t * c) - 0.5 * dmu / mu) / t;
    EXPECT_NEAR(fd, exact, 1e-4 * std::max(std::abs(exact), 1e-3));
  }
  // linearity in h
  std::mt19937_64 rng(4);
  const auto h1 = Wave::random(rng);
  const auto h2 = Wave::random(rng);
  for (double x : linspace(-1.0, 1.0, 21)) {
    const double mu = gauss_half(x), dmu = gauss_half_prime(x);
    const double lhs = xi_derivative(mu, dmu, 2.0 * h1(x) - 3.0 * h2(x),
                                     2.0 * h1.prime(x) - 3.0 * h2.prime(x), x, 0.0);
    const double rhs = 2.0 * xi_derivative(mu, dmu, h1(x), h1.prime(x), x, 0.0) -
                       3.0 * xi_derivative(mu, dmu, h2(x), h2.prime(x), x, 0.0);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Plugin, ExactDensityGivesLinearDrift)
{
  const auto [lo, hi] = coefficient_support(basis(), 5, -1.0, 1.0);
  DensityEstimate exact{ analyze_function(basis(), gauss_half, 5, lo, hi), 1000, "exact" };
  const auto est = estimate_drift_plugin(exact, -1.0, 1.0);
  EXPECT_LE(sup_on([&](double x) { return est(x) + x; }, -1.0, 1.0), 1e-3);
}

TEST(Plugin, OuRegressionBound)
{
  const auto traj = simulate_ou_exact(1.0, 1.0, 100000, 1.0, 101, 0.0, true);
  const auto est = estimate_drift_plugin(traj, basis(), 1, -1.0, 1.0);
  EXPECT_LE(sup_on([&](double x) { return est(x) + x; }, -1.0, 1.0), 0.15);
}

TEST(Plugin, UnnormalizedDensityGivesSameDrift)
{
  const auto traj = simulate_ou_exact(1.0, 1.0, 20000, 1.0, 102, 0.0, true);
  const auto [lo, hi] = coefficient_support(basis(), 2, -1.0, 1.0);
  const auto mu = estimate_density(traj, basis(), 2, lo, hi);
  auto scaled = mu;
  scaled.coeffs *= 4.0;
  const auto e1 = estimate_drift_plugin(mu, -1.0, 1.0);
  const auto e2 = estimate_drift_plugin(scaled, -1.0, 1.0);
  for (double x : linspace(-1.0, 1.0, 101)) {
    EXPECT_NEAR(e1(x), e2(x), 1e-12);
  }
  EXPECT_LE(multiscale_norm(e1.coeffs - e2.coeffs, WeightSequence::density()), 1e-12);
}

TEST(Direct, ExactDensityRecoversProjectedDrift)
{
  const int J = 2;
  const int U = 4;
  const auto [lo, hi] = coefficient_support(basis(), J, -1.0, 1.0);
  DensityEstimate exact{ analyze_function(basis(), gauss_half, J + U, lo, hi), 1000, "exact" };
  const auto est = estimate_drift_direct(exact, J, -1.0, 1.0);
  const auto proj = analyze_function(basis(), [](double x) { return -x; }, J, -1.0, 1.0);
  const double bias = sup_on([&](double x) { return synthesize(proj, x) + x; }, -1.0, 1.0);
  EXPECT_LE(sup_on([&](double x) { return est(x) + x; }, -1.0, 1.0), bias + 1e-3);
}

TEST(Direct, OuRegressionBoundAndDeterminism)
{
  const auto traj = simulate_ou_exact(1.0, 1.0, 100000, 1.0, 103, 0.0, true);
  const auto e1 = estimate_drift_direct(traj, basis(), 1, default_offset(1e5), -1.0, 1.0);
  const auto e2 = estimate_drift_direct(traj, basis(), 1, default_offset(1e5), -1.0, 1.0);
  EXPECT_EQ(default_offset(1e5), 4);
  EXPECT_LE(sup_on([&](double x) { return e1(x) + x; }, -1.0, 1.0), 0.15);
  for (std::size_t i = 0; i < e1.coeffs.levels().size(); ++i) {
    EXPECT_EQ(e1.coeffs.levels()[i].values, e2.coeffs.levels()[i].values);
  }
}

// The quadratic remainder of the linearisation is small against the main
// linear term on OU data.
TEST(Direct, RemainderIsSubdominant)
{
  const auto traj = simulate_ou_exact(1.0, 1.0, 100000, 1.0, 104, 0.0, true);
  const auto est = estimate_drift_direct(traj, basis(), 1, 4, -1.0, 1.0);
  const auto& mh = *est.density;
  const DensityPair p{ gauss_half, gauss_half_prime, [&](double x) { return mh(x); },
                       [&](double x) { return mh.derivative(x); } };
  const double R = sup_on([&](double x) { return linearisation_remainder(p, x); }, -1.0, 1.0);
  const double main = sup_on([&](double x) { return linearisation_main(p, x); }, -1.0, 1.0);
  EXPECT_LE(R, 0.2 * main);
}

TEST(Direct, RejectsHaarAndBadOffsets)
{
  const auto traj = simulate_ou_exact(1.0, 1.0, 1000, 1.0, 105, 0.0, true);
  const WaveletBasis haar(1, 1, 10);
  EXPECT_THROW(estimate_drift_direct(traj, haar, 2, 2, -1.0, 1.0), ConfigError);
  EXPECT_THROW(estimate_drift_direct(traj, basis(), 2, 0, -1.0, 1.0), ConfigError);
}

TEST(Direct, PositivityFailureReportsRange)
{
  const auto traj = simulate_ou_exact(1.0, 1.0, 50, 1.0, 106, 0.0, true);
  try {
    estimate_drift_direct(traj, basis(), 3, 4, -1.0, 1.0);
    FAIL() << "expected a positivity failure";
  } catch (const PositivityError& e) {
    EXPECT_LE(e.x_lo(), e.x_hi());
    EXPECT_GE(e.x_lo(), -1.0);
    EXPECT_LE(e.x_hi(), 1.0);
  }
}

TEST(Bands, EnContainsCenterAndRecordsCap)
{
  const auto traj = simulate_ou_exact(1.0, 1.0, 20000, 1.0, 107, 0.0, true);
  const auto est = estimate_drift_direct(traj, basis(), 1, 4, -1.0, 1.0);
  const auto w = WeightSequence::critical_value_normalized(WeightSequence::Kind::drift_admissible, 1);
  const auto band = band_drift(est, 10.0, w, 3.0);
  EXPECT_DOUBLE_EQ(band.cap.u, w(1) * 0.5 / 1.0);
  EXPECT_TRUE(band_contains(band, est.coeffs, band.cap.u));
  EXPECT_FALSE(band_contains(band, est.coeffs, 1.01 * band.cap.u));
  EXPECT_THROW(band_drift(est, -1.0, w, 3.0), DomainError);
  ASSERT_TRUE(band.linf);
  EXPECT_DOUBLE_EQ(band.linf->radius, band.linf->stochastic + band.linf->bias);
}

TEST(Bands, DnNeedsCappedDensityBand)
{
  EXPECT_THROW(band_drift_image(nullptr), ConfigError);
  const auto traj = simulate_ou_exact(1.0, 1.0, 20000, 1.0, 108, 0.0, true);
  const auto mu = estimate_density(traj, basis(), 2, -1.0, 1.0);
  const auto w = WeightSequence::critical_value_normalized(WeightSequence::Kind::density, 1);
  auto plain = std::make_shared<const DensityBand>(band_density(mu, 5.0, w, 2.0, BandMode::multiscale));
  EXPECT_THROW(band_drift_image(plain), ConfigError);
}

// D_n holds b exactly when the capped density band holds mu = xi^{-1}(b).
TEST(Bands, ImageIdentityOnOu)
{
  const auto ou = make_ou_model();
  const auto w = WeightSequence::critical_value_normalized(WeightSequence::Kind::density, 1);
  std::function<double(double)> mu = ou.invariant_density;
  std::function<double(double)> dmu = ou.invariant_density_derivative;
  const double holder = holder_norm(mu, 2.0, -1.0, 1.0, 1025, dmu);
  for (int r = 0; r < 6; ++r) {
    const auto traj = simulate_ou_exact(1.0, 1.0, 20000, 1.0, derive_seed(109, r), 0.0, true);
    const auto est = estimate_density(traj, basis(), 2, -1.0, 1.0);
    // a range of radii so both outcomes occur
    const double zeta = 1.0 + 2.0 * r;
    auto db = std::make_shared<const DensityBand>(
      band_density(est, zeta, w, 2.0, BandMode::smoothness_cap, 4.0));
    const auto dn = band_drift_image(db);
    EXPECT_EQ(band_contains(dn, ou.drift), band_contains(*db, mu, holder)) << "r=" << r;
  }
}

TEST(Linearisation, IdentityWithKnownDensity)
{
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    const auto mu = Mixture::random(rng);
    const auto h = Wave::random(rng);
    const DensityPair p{ mu, [&](double x) { return mu.prime(x); },
                         [&](double x) { return mu(x) * (1.0 + h(x)); },
                         [&](double x) { return mu.prime(x) * (1.0 + h(x)) + mu(x) * h.prime(x); } };
    for (auto [j, k] : { std::pair{ 1, 0L }, std::pair{ 3, -2L }, std::pair{ kScalingLevel, -3L } }) {
      const auto t = linearisation_terms(basis(), p, j, k);
      EXPECT_NEAR(t.lhs, t.linear + t.remainder, 1e-6);
    }
  }
}
