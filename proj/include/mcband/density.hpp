#pragma once

#include "mcband/bounds.hpp"
#include "mcband/errors.hpp"
#include "mcband/simulate.hpp"
#include "mcband/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mcband {

/// Projection estimator of the invariant density up to level J.
struct DensityEstimate
{
  MultiScaleCoeffs coeffs;
  std::size_t n = 0;
  std::string schedule = "fixed";

  int level() const noexcept { return coeffs.max_level(); }
  double a() const noexcept { return coeffs.a(); }
  double b() const noexcept { return coeffs.b(); }
  double operator()(double x) const { return synthesize(coeffs, x); }
  double derivative(double x) const { return synthesize_derivative(coeffs, x); }
};

enum class Schedule
{
  chain,    ///< 2^{J_n} = (n / log n)^{1/(2s+1)}
  diffusion ///< 2^{J_n} = (n / log n)^{1/(2s+3)}
};

/// Resolution level of the density estimator, rounded to the nearest integer
/// and clamped below at min_level.
inline int resolution_schedule_density(double n,
                                       double s,
                                       Schedule kind = Schedule::chain,
                                       int min_level = 0)
{
  if (n < 3.0) {
    throw DomainError("resolution schedule: n must be >= 3");
  }
  if (!(s > 0.0)) {
    throw DomainError("resolution schedule: s must be > 0");
  }
  const double exponent =
    1.0 / (2.0 * s + (kind == Schedule::chain ? 1.0 : 3.0));
  const double level = exponent * std::log2(n / std::log(n));
  return std::max(min_level, static_cast<int>(std::lround(level)));
}

inline DensityEstimate estimate_density(const Trajectory& traj,
                                        const WaveletBasis& basis,
                                        int J,
                                        double a,
                                        double b)
{
  if (traj.samples.empty()) {
    throw DomainError("estimate_density: empty trajectory");
  }
  return { analyze_sample(basis, traj.samples, J, a, b), traj.size(), "fixed" };
}

/// ||mu_hat||_inf on a grid over [a, b].
inline double estimate_sup_mu(const DensityEstimate& est, int grid_points = 4096)
{
  return sup_norm_on_interval(est.coeffs, est.a(), est.b(), grid_points);
}

enum class BandMode
{
  multiscale,       ///< C_n
  smoothness_cap,   ///< C-bar_n
  linf              ///< C-tilde_n
};

inline std::string band_mode_name(BandMode m)
{
  switch (m) {
    case BandMode::multiscale:
      return "multiscale";
    case BandMode::smoothness_cap:
      return "with-smoothness-cap";
    case BandMode::linf:
      return "linf";
  }
  return "unknown";
}

struct SmoothnessCap
{
  double s = 1.0;
  double u = 1.0;         ///< cap on ||f||_{C^s}
  double cap_scale = 1.0; ///< multiplier applied to the nominal cap
};

struct LinfInfo
{
  double radius = 0.0;
  double stochastic = 0.0;
  double bias = 0.0;
  double rate = 0.0;     ///< (n/log n)^{-s/(2s+1)} u_n
  double constant = 0.0; ///< radius / rate
  int grid_points = 4096;
};

struct DensityBand
{
  DensityEstimate center;
  double zeta = 1.0;
  WeightSequence weights;
  BandMode mode = BandMode::multiscale;
  std::optional<SmoothnessCap> cap;
  std::optional<LinfInfo> linf;

  std::size_t n() const noexcept { return center.n; }
  double multiscale_radius() const
  {
    return zeta / std::sqrt(static_cast<double>(center.n));
  }
  /// Diameter bound in L-infinity (twice the radius), when available.
  double linf_diameter() const { return linf ? 2.0 * linf->radius : INFINITY; }
};

//! Builds C_n, C-bar_n or C-tilde_n around `est`.
//!
//! The cap is u_n = cap_scale * w_{J_n} / sqrt(J_n). For the two capped modes
//! the L-infinity radius implied by the multi-scale constraint and the cap is
//! recorded; C-tilde_n is the L-infinity ball of that radius.
inline DensityBand band_density(const DensityEstimate& est,
                                double zeta,
                                const WeightSequence& w,
                                double s,
                                BandMode mode,
                                double cap_scale = 1.0,
                                int grid_points = 4096)
{
  if (!(zeta > 0.0)) {
    throw DomainError("band_density: zeta must be > 0");
  }
  DensityBand band{ est, zeta, w, mode, std::nullopt, std::nullopt };
  if (mode == BandMode::multiscale) {
    return band;
  }
  const int J = est.level();
  const double u =
    cap_scale * w(J) / std::sqrt(static_cast<double>(J));
  band.cap = SmoothnessCap{ s, u, cap_scale };
  const auto bound =
    linf_bound(est.coeffs.basis(), J, band.multiscale_radius(), w, s, u);
  LinfInfo info;
  info.radius = bound.radius();
  info.stochastic = bound.stochastic;
  info.bias = bound.bias;
  const double n = static_cast<double>(est.n);
  info.rate = std::pow(n / std::log(n), -s / (2.0 * s + 1.0)) * u;
  info.constant = info.radius / info.rate;
  info.grid_points = grid_points;
  band.linf = info;
  return band;
}

/// max_{j <= J, k} |x_{j,k} - y_{j,k}| / w_j over the levels of x.
inline double multiscale_distance(const MultiScaleCoeffs& x,
                                  const MultiScaleCoeffs& y,
                                  const WeightSequence& w)
{
  return multiscale_norm(x - y, w);
}

//! Membership of a candidate given by its coefficients (up to at least the
//! band level) and, for capped modes, a bound on its C^s norm. Strict
//! inequality in the multi-scale constraint.
inline bool band_contains(const DensityBand& band,
                          const MultiScaleCoeffs& candidate,
                          std::optional<double> holder_bound = std::nullopt)
{
  const auto& center = band.center.coeffs;
  if (band.mode == BandMode::linf) {
    double worst = 0.0;
    for (double x : linspace(center.a(), center.b(), band.linf->grid_points)) {
      worst = std::max(
        worst, std::abs(synthesize(candidate, x) - synthesize(center, x)));
    }
    return worst <= band.linf->radius;
  }
  if (candidate.max_level() < center.max_level()) {
    throw DomainError("band_contains: candidate resolved below band level");
  }
  const auto truncated = candidate.truncated(center.max_level());
  if (!(multiscale_distance(truncated, center, band.weights) <
        band.multiscale_radius())) {
    return false;
  }
  if (band.cap) {
    if (!holder_bound) {
      throw DomainError("band_contains: capped band needs a Hölder bound");
    }
    return *holder_bound <= band.cap->u;
  }
  return true;
}

/// Membership of an evaluable function; coefficients by quadrature.
inline bool band_contains(const DensityBand& band,
                          const std::function<double(double)>& f,
                          std::optional<double> holder_bound = std::nullopt,
                          int refine = 6)
{
  const auto& c = band.center.coeffs;
  if (band.mode == BandMode::linf) {
    double worst = 0.0;
    for (double x : linspace(c.a(), c.b(), band.linf->grid_points)) {
      worst = std::max(worst, std::abs(f(x) - synthesize(c, x)));
    }
    return worst <= band.linf->radius;
  }
  const auto coeffs =
    analyze_function(c.basis(), f, c.max_level(), c.a(), c.b(), refine);
  return band_contains(band, coeffs, holder_bound);
}

/// Rows x, center, lower, upper of the band on an equispaced grid; the
/// envelope uses the L-infinity radius.
struct BandRow
{
  double x;
  double center;
  double lower;
  double upper;
};

template<class Center>
std::vector<BandRow> band_rows(const Center& center,
                               double a,
                               double b,
                               double radius,
                               int grid_points)
{
  std::vector<BandRow> rows;
  rows.reserve(static_cast<std::size_t>(grid_points));
  for (double x : linspace(a, b, grid_points)) {
    const double c = center(x);
    rows.push_back({ x, c, c - radius, c + radius });
  }
  return rows;
}

} // namespace mcband
