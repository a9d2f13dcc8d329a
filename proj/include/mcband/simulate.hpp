#pragma once

#include "mcband/errors.hpp"
#include "mcband/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mcband {

/// Equispaced observations Z_0..Z_{n-1} with spacing delta and provenance.
struct Trajectory
{
  std::vector<double> samples;
  double delta = 1.0;
  std::uint64_t seed = 0;
  std::string model = "unknown";
  long long burn_in_steps = 0;

  std::size_t size() const noexcept { return samples.size(); }
};

/// Concatenation; the result keeps the provenance of `first`.
inline Trajectory concatenate(const Trajectory& first, const Trajectory& second)
{
  Trajectory out = first;
  out.samples.insert(
    out.samples.end(), second.samples.begin(), second.samples.end());
  return out;
}

//! Invariant density C0 sigma^{-2} exp(2 sigma^{-2} int_0^x b) tabulated from
//! the drift. The potential U(x) = int_0^x b is integrated with Simpson's
//! rule on a fine grid and interpolated by cubic Hermite splines using
//! U' = b, so mu and mu' = 2 b mu / sigma^2 are both available.
class TabulatedInvariantDensity
{
public:
  TabulatedInvariantDensity(std::function<double(double)> drift,
                            double sigma,
                            double lo,
                            double hi,
                            double step = 1.0 / 1024)
    : drift_(std::move(drift))
    , sigma2_(sigma * sigma)
    , lo_(lo)
    , step_(step)
  {
    if (!(lo < hi) || !(step > 0.0)) {
      throw DomainError("invariant density: need lo < hi and step > 0");
    }
    const long count =
      std::max(2L, static_cast<long>(std::ceil((hi - lo) / step)));
    step_ = (hi - lo) / static_cast<double>(count);
    step = step_;
    hi_ = hi;
    potential_.assign(static_cast<std::size_t>(count + 1), 0.0);
    slope_.resize(potential_.size());
    for (long i = 0; i <= count; ++i) {
      slope_[i] = drift_(node(i));
    }
    for (long i = 0; i < count; ++i) {
      const double x = node(i);
      potential_[i + 1] =
        potential_[i] +
        step / 6.0 * (slope_[i] + 4.0 * drift_(x + 0.5 * step) + slope_[i + 1]);
    }
    // shift so that U vanishes at 0 (or the nearest end of the table)
    const double u0 = potential(std::clamp(0.0, lo, hi));
    for (double& u : potential_) {
      u -= u0;
    }
    double max_u = *std::max_element(potential_.begin(), potential_.end());
    // normalize by Simpson over the table
    double mass = 0.0;
    for (long i = 0; i < count; ++i) {
      const double x = node(i);
      mass += step / 6.0 *
              (unnormalized(x, max_u) + 4.0 * unnormalized(x + 0.5 * step, max_u) +
               unnormalized(x + step, max_u));
    }
    log_norm_ = -2.0 * max_u / sigma2_ - std::log(mass);
  }

  double operator()(double x) const
  {
    if (x < lo_ || x > hi_) {
      return 0.0;
    }
    return std::exp(2.0 * potential(x) / sigma2_ + log_norm_);
  }

  double derivative(double x) const
  {
    return 2.0 * drift_(x) / sigma2_ * (*this)(x);
  }

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

private:
  double node(long i) const noexcept { return lo_ + step_ * static_cast<double>(i); }

  double unnormalized(double x, double shift) const
  {
    return std::exp(2.0 * (potential(x) - shift) / sigma2_);
  }

  double potential(double x) const
  {
    const double pos = (x - lo_) / step_;
    auto i = static_cast<long>(std::floor(pos));
    i = std::clamp(i, 0L, static_cast<long>(potential_.size()) - 2);
    const double t = pos - static_cast<double>(i);
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * potential_[i] +
           (t3 - 2 * t2 + t) * step_ * slope_[i] +
           (-2 * t3 + 3 * t2) * potential_[i + 1] +
           (t3 - t2) * step_ * slope_[i + 1];
  }

  std::function<double(double)> drift_;
  double sigma2_;
  double lo_;
  double hi_ = 0.0;
  double step_;
  double log_norm_ = 0.0;
  std::vector<double> potential_;
  std::vector<double> slope_;
};

/// Scalar diffusion dX = b(X) dt + sigma dW.
struct DiffusionModel
{
  std::function<double(double)> drift;
  /// b' where known (used for Hölder norms of the truth); may be empty.
  std::function<double(double)> drift_derivative;
  double sigma = 1.0;
  std::string family = "custom";
  std::map<std::string, double> params;
  std::function<double(double)> invariant_density;
  std::function<double(double)> invariant_density_derivative;

  bool has_invariant_density() const noexcept
  {
    return static_cast<bool>(invariant_density);
  }

  std::string descriptor() const
  {
    std::ostringstream os;
    os.precision(17);
    os << family;
    for (const auto& [k, v] : params) {
      os << ';' << k << '=' << v;
    }
    return os.str();
  }
};

/// b(x) = -theta x; invariant law N(0, sigma^2 / (2 theta)).
inline DiffusionModel make_ou_model(double theta = 1.0, double sigma = 1.0)
{
  if (!(theta > 0.0)) {
    throw ConfigError("theta", "must be > 0");
  }
  if (!(sigma > 0.0)) {
    throw ConfigError("sigma", "must be > 0");
  }
  DiffusionModel m;
  m.drift = [theta](double x) { return -theta * x; };
  m.drift_derivative = [theta](double) { return -theta; };
  m.sigma = sigma;
  m.family = "ou";
  m.params = { { "theta", theta }, { "sigma", sigma } };
  const double var = sigma * sigma / (2.0 * theta);
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi * var);
  m.invariant_density = [c, var](double x) {
    return c * std::exp(-x * x / (2.0 * var));
  };
  m.invariant_density_derivative = [c, var](double x) {
    return -x / var * c * std::exp(-x * x / (2.0 * var));
  };
  return m;
}

//! Drift that is smooth except for a jump in its s-th derivative at x_jump:
//!
//!   b(x) = -x + A g_s(x - x_jump) exp(-(x - x_jump)^2 / 2)
//!
//! with g_s(y) = |y|^s for odd s and y |y|^{s-1} for even s. Outside a compact
//! set b behaves like -x, so sign(x) b(x) <= -r there. The invariant density
//! is tabulated from the drift with sigma = 1.
inline DiffusionModel make_selfsimilar_drift(double s,
                                             double x_jump = 0.0,
                                             double amplitude = 1.0)
{
  if (s < 1.0 || s != std::floor(s) || s > 8.0) {
    throw ConfigError("s", "self-similar drift needs an integer s in [1, 8]");
  }
  const int si = static_cast<int>(s);
  auto g = [si](double y) {
    const double m = std::pow(std::abs(y), si - 1);
    return (si % 2 == 1) ? m * std::abs(y) : m * y;
  };
  // d/dy g_s = s |y|^{s-1} sign(y) (odd) or s |y|^{s-1} (even)
  auto dg = [si](double y) {
    if (si == 1) {
      return y > 0.0 ? 1.0 : (y < 0.0 ? -1.0 : 0.0);
    }
    const double m = si * std::pow(std::abs(y), si - 2);
    return (si % 2 == 1) ? m * y : m * std::abs(y);
  };
  DiffusionModel m;
  m.drift = [g, x_jump, amplitude](double x) {
    const double y = x - x_jump;
    return -x + amplitude * g(y) * std::exp(-0.5 * y * y);
  };
  m.drift_derivative = [g, dg, x_jump, amplitude](double x) {
    const double y = x - x_jump;
    return -1.0 + amplitude * (dg(y) - y * g(y)) * std::exp(-0.5 * y * y);
  };
  m.sigma = 1.0;
  m.family = "selfsim";
  m.params = { { "s", s }, { "x_jump", x_jump }, { "amplitude", amplitude } };
  auto density =
    std::make_shared<TabulatedInvariantDensity>(m.drift, 1.0, -12.0, 12.0);
  m.invariant_density = [density](double x) { return (*density)(x); };
  m.invariant_density_derivative = [density](double x) {
    return density->derivative(x);
  };
  return m;
}

/// Brownian motion (b = 0); no invariant law.
inline DiffusionModel make_brownian_model(double sigma = 1.0)
{
  DiffusionModel m;
  m.drift = [](double) { return 0.0; };
  m.drift_derivative = [](double) { return 0.0; };
  m.sigma = sigma;
  m.family = "brownian";
  m.params = { { "sigma", sigma } };
  return m;
}

/// max(16, ceil(delta / 0.01)).
inline int default_substeps(double delta)
{
  return std::max(16, static_cast<int>(std::ceil(delta / 0.01 - 1e-9)));
}

inline constexpr long long kDefaultBurnIn = 1000;

/// Euler–Maruyama with `substeps` inner steps per observation. The first
/// burn_in observation intervals are simulated and discarded.
inline Trajectory simulate_diffusion(const DiffusionModel& model,
                                     std::size_t n,
                                     double delta,
                                     int substeps,
                                     std::uint64_t seed,
                                     double x0 = 0.0,
                                     long long burn_in = kDefaultBurnIn)
{
  if (n < 1) {
    throw DomainError("simulate: n must be >= 1");
  }
  if (!(delta > 0.0)) {
    throw ConfigError("delta", "must be > 0");
  }
  if (substeps < 1) {
    throw ConfigError("substeps", "must be >= 1");
  }
  if (!(model.sigma > 0.0)) {
    throw ConfigError("sigma", "must be > 0");
  }
  if (burn_in < 0) {
    throw ConfigError("burn_in", "must be >= 0");
  }
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = delta / substeps;
  const double noise = model.sigma * std::sqrt(h);
  double x = x0;
  Trajectory out;
  out.delta = delta;
  out.seed = seed;
  out.model = model.descriptor();
  out.burn_in_steps = burn_in;
  out.samples.reserve(n);
  const long long total = burn_in + static_cast<long long>(n) - 1;
  long long step = 0;
  auto advance = [&]() {
    for (int s = 0; s < substeps; ++s) {
      x += model.drift(x) * h + noise * normal(rng);
      ++step;
      if (!std::isfinite(x) || std::abs(x) > 1e10) {
        throw SimulationError("trajectory exploded", step);
      }
    }
  };
  for (long long i = 0; i < burn_in; ++i) {
    advance();
  }
  out.samples.push_back(x);
  for (long long i = burn_in; i < total; ++i) {
    advance();
    out.samples.push_back(x);
  }
  return out;
}

/// Exact Gaussian transition of dX = -theta X dt + sigma dW.
/// With stationary_start the initial value is drawn from N(0, sigma^2/(2 theta))
/// and x0 is ignored.
inline Trajectory simulate_ou_exact(double theta,
                                    double sigma,
                                    std::size_t n,
                                    double delta,
                                    std::uint64_t seed,
                                    double x0 = 0.0,
                                    bool stationary_start = false)
{
  if (!(theta > 0.0)) {
    throw ConfigError("theta", "must be > 0");
  }
  if (!(sigma > 0.0)) {
    throw ConfigError("sigma", "must be > 0");
  }
  if (!(delta > 0.0)) {
    throw ConfigError("delta", "must be > 0");
  }
  if (n < 1) {
    throw DomainError("simulate: n must be >= 1");
  }
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double decay = std::exp(-theta * delta);
  const double stat_sd = sigma / std::sqrt(2.0 * theta);
  const double sd = stat_sd * std::sqrt(-std::expm1(-2.0 * theta * delta));
  Trajectory out;
  out.delta = delta;
  out.seed = seed;
  out.model = make_ou_model(theta, sigma).descriptor();
  out.samples.resize(n);
  double x = stationary_start ? stat_sd * normal(rng) : x0;
  out.samples[0] = x;
  for (std::size_t i = 1; i < n; ++i) {
    x = decay * x + sd * normal(rng);
    out.samples[i] = x;
  }
  return out;
}

/// Z_{k+1} = rho Z_k + eps_k, eps_k ~ N(0, innovation_sd^2). innovation_sd = 0
/// is allowed as a degenerate test hook.
struct AR1Chain
{
  double rho = 0.5;
  double innovation_sd = 1.0;

  double stationary_variance() const noexcept
  {
    return innovation_sd * innovation_sd / (1.0 - rho * rho);
  }
  /// Asymptotic variance of the identity function.
  double asymptotic_variance() const noexcept
  {
    return stationary_variance() * (1.0 + rho) / (1.0 - rho);
  }
};

inline Trajectory simulate_ar1(const AR1Chain& chain,
                               std::size_t n,
                               std::uint64_t seed,
                               double x0 = 0.0,
                               bool stationary_start = false)
{
  if (!(std::abs(chain.rho) < 1.0)) {
    throw ConfigError("rho", "AR(1) coefficient must satisfy |rho| < 1");
  }
  if (chain.innovation_sd < 0.0) {
    throw ConfigError("innovation_sd", "must be >= 0");
  }
  if (n < 1) {
    throw DomainError("simulate: n must be >= 1");
  }
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Trajectory out;
  out.delta = 1.0;
  out.seed = seed;
  std::ostringstream os;
  os.precision(17);
  os << "ar1;rho=" << chain.rho << ";innovation_sd=" << chain.innovation_sd;
  out.model = os.str();
  out.samples.resize(n);
  double x = stationary_start
               ? std::sqrt(chain.stationary_variance()) * normal(rng)
               : x0;
  out.samples[0] = x;
  for (std::size_t i = 1; i < n; ++i) {
    x = chain.rho * x + chain.innovation_sd * normal(rng);
    out.samples[i] = x;
  }
  return out;
}

} // namespace mcband
