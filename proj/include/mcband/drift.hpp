#pragma once

#include "mcband/bounds.hpp"
#include "mcband/density.hpp"
#include "mcband/errors.hpp"
#include "mcband/holder.hpp"
#include "mcband/simulate.hpp"
#include "mcband/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mcband {

inline constexpr double kDefaultPositivityFactor = 1e-4;

/// xi(f)(x) = f'(x) / (2 f(x)).
inline double xi_forward(double f, double df, double x, double floor_value)
{
  if (!(f >= floor_value)) {
    throw PositivityError(x, x, floor_value);
  }
  return df / (2.0 * f);
}

inline double xi_forward(const std::function<double(double)>& f,
                         const std::function<double(double)>& df,
                         double x,
                         double floor_value)
{
  return xi_forward(f(x), df(x), x, floor_value);
}

/// xi of a synthesized density estimate; the derivative comes from the psi'
/// tables.
inline double xi_forward(const DensityEstimate& est, double x, double floor_value)
{
  return xi_forward(est(x), est.derivative(x), x, floor_value);
}

/// xi^{-1}(g) = exp(2 int_0^x g - c_g), normalized to unit mass on [lo, hi].
/// Cumulative integral by Simpson's rule on spacing `step`, Hermite
/// interpolation in between.
inline TabulatedInvariantDensity xi_inverse(std::function<double(double)> g,
                                            double lo,
                                            double hi,
                                            double step = 1.0 / 1024)
{
  TabulatedInvariantDensity out(std::move(g), 1.0, lo, hi, step);
  if (!std::isfinite(out(0.5 * (lo + hi)))) {
    throw DomainError("xi_inverse: non-finite quadrature");
  }
  return out;
}

/// Hadamard derivative xi'_mu(h) = (h' mu - h mu') / (2 mu^2).
inline double xi_derivative(double mu,
                            double dmu,
                            double h,
                            double dh,
                            double x,
                            double floor_value)
{
  if (!(mu >= floor_value)) {
    throw PositivityError(x, x, floor_value);
  }
  return 0.5 * (dh * mu - h * dmu) / (mu * mu);
}

enum class DriftMethod
{
  plugin,
  direct
};

inline std::string drift_method_name(DriftMethod m)
{
  return m == DriftMethod::plugin ? "plugin" : "direct";
}

struct DriftDiagnostics
{
  double floor_value = 0.0;  ///< positivity floor used
  double sup_mu = 0.0;       ///< sup of mu_hat on [a, b]
  long clipped_nodes = 0;    ///< quadrature nodes outside [a, b] lifted to the floor
  long quadrature_nodes = 0;
};

struct DriftEstimate
{
  MultiScaleCoeffs coeffs;
  int J = 0;
  int U = 0;
  int mu_level = 0;
  std::size_t n = 0;
  DriftMethod method = DriftMethod::direct;
  DriftDiagnostics diagnostics;
  /// The density estimate the drift was built from.
  std::shared_ptr<const DensityEstimate> density;

  double a() const noexcept { return coeffs.a(); }
  double b() const noexcept { return coeffs.b(); }

  /// Plug-in: xi(mu_hat)(x) pointwise. Direct: the projection sum.
  double operator()(double x) const
  {
    if (method == DriftMethod::plugin) {
      return xi_forward(*density, x, diagnostics.floor_value);
    }
    return synthesize(coeffs, x);
  }
};

/// Default oversmoothing offset U = ceil(log2 log n).
inline int default_offset(double n)
{
  if (n < 3.0) {
    throw DomainError("default_offset: n must be >= 3");
  }
  return std::max(1, static_cast<int>(std::ceil(std::log2(std::log(n)))));
}

namespace detail {

/// Checks mu_hat >= factor * sup mu_hat on a grid over [a, b]; throws with
/// the offending x-range. Returns the sup of mu_hat on the grid.
inline double check_positivity(const DensityEstimate& est,
                               double a,
                               double b,
                               double factor,
                               int grid_points,
                               double& floor_value)
{
  const auto x = linspace(a, b, grid_points);
  std::vector<double> v(x.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    v[i] = est(x[i]);
    sup = std::max(sup, v[i]);
  }
  floor_value = factor * sup;
  double bad_lo = INFINITY;
  double bad_hi = -INFINITY;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(v[i] >= floor_value) || !(v[i] > 0.0)) {
      bad_lo = std::min(bad_lo, x[i]);
      bad_hi = std::max(bad_hi, x[i]);
    }
  }
  if (bad_lo <= bad_hi) {
    throw PositivityError(bad_lo, bad_hi, floor_value);
  }
  return sup;
}

} // namespace detail

//! Coefficients of (1/2) pi_J (log g)' for a positive function g given on
//! midpoint nodes, computed by parts as -(1/2) <log g, psi'_{j,k}>.
//! `log_g` holds log g at the nodes of `grid`.
inline MultiScaleCoeffs half_log_derivative_coeffs(const WaveletBasis& basis,
                                                   const QuadratureGrid& grid,
                                                   const std::vector<double>& log_g,
                                                   int J,
                                                   double a,
                                                   double b)
{
  MultiScaleCoeffs out(basis, a, b, J);
  for (auto& lv : out.levels()) {
    const long k_min = lv.k_min;
    const long k_max = lv.k_max();
    auto& values = lv.values;
    for (long i = 0; i < grid.count; ++i) {
      const double w = -0.5 * log_g[i] * grid.h;
      basis.for_each_nonzero_derivative(
        lv.level, grid.node(i), k_min, k_max, [&](long k, double v) {
          values[static_cast<std::size_t>(k - k_min)] += w * v;
        });
    }
  }
  return out;
}

struct DriftOptions
{
  double positivity_factor = kDefaultPositivityFactor;
  int positivity_grid = 1024;
  int refine = 4; ///< quadrature spacing 2^{-(J + U + refine)}
};

namespace detail {

/// log mu_hat on the quadrature grid over the support of the level-J basis
/// functions of [a, b]; strict positivity on [a, b], lifting outside.
inline std::vector<double> log_density_on_grid(const DensityEstimate& mu_hat,
                                               const QuadratureGrid& grid,
                                               double a,
                                               double b,
                                               DriftDiagnostics& diag)
{
  std::vector<double> log_mu(static_cast<std::size_t>(grid.count));
  for (long i = 0; i < grid.count; ++i) {
    const double x = grid.node(i);
    double v = mu_hat(x);
    if (!(v >= diag.floor_value)) {
      if (x >= a && x <= b) {
        throw PositivityError(x, x, diag.floor_value);
      }
      v = diag.floor_value;
      ++diag.clipped_nodes;
    }
    log_mu[i] = std::log(v);
  }
  diag.quadrature_nodes = grid.count;
  return log_mu;
}

inline void require_drift_basis(const WaveletBasis& basis)
{
  if (!basis.differentiable()) {
    throw ConfigError("order", "drift estimation needs order >= 3 (C^1 wavelets)");
  }
}

} // namespace detail

//! Direct estimator b_hat_{J,U} = (1/2) pi_J (log mu_hat_{J+U})' on [a, b].
//!
//! mu_hat (level J + U) has to be resolved on the support of every level-J
//! basis function of [a, b], i.e. built on coefficient_support(basis, J, a, b).
//! It must stay above factor * sup mu_hat on [a, b] (PositivityError
//! otherwise); outside [a, b] it is lifted to that floor where smaller, and
//! the number of lifted quadrature nodes is reported.
inline DriftEstimate estimate_drift_direct(const DensityEstimate& mu_hat,
                                           int J,
                                           double a,
                                           double b,
                                           const DriftOptions& opt = {})
{
  const auto& basis = mu_hat.coeffs.basis();
  detail::require_drift_basis(basis);
  const int J_plus = mu_hat.level();
  if (J < basis.base_level() || J >= J_plus) {
    throw ConfigError("U", "need j0 <= J < J + U = density level");
  }
  DriftEstimate out{ MultiScaleCoeffs(basis, a, b, J),
                     J,
                     J_plus - J,
                     J_plus,
                     mu_hat.n,
                     DriftMethod::direct,
                     {},
                     std::make_shared<const DensityEstimate>(mu_hat) };
  auto& diag = out.diagnostics;
  diag.sup_mu = detail::check_positivity(
    mu_hat, a, b, opt.positivity_factor, opt.positivity_grid, diag.floor_value);
  const auto [lo, hi] = coefficient_support(basis, J, a, b);
  const auto grid = make_quadrature_grid(lo, hi, J_plus + opt.refine);
  const auto log_mu = detail::log_density_on_grid(mu_hat, grid, a, b, diag);
  out.coeffs = half_log_derivative_coeffs(basis, grid, log_mu, J, a, b);
  return out;
}

inline DriftEstimate estimate_drift_direct(const Trajectory& traj,
                                           const WaveletBasis& basis,
                                           int J,
                                           int U,
                                           double a,
                                           double b,
                                           const DriftOptions& opt = {})
{
  if (U < 1) {
    throw ConfigError("U", "oversmoothing offset must be >= 1");
  }
  const auto [lo, hi] = coefficient_support(basis, J, a, b);
  return estimate_drift_direct(
    estimate_density(traj, basis, J + U, lo, hi), J, a, b, opt);
}

//! Plug-in estimator xi(mu_hat_{J_mu}) on [a, b]. Pointwise evaluation uses
//! xi directly; the stored coefficients are those of (1/2) pi_{J_mu}
//! (log mu_hat)' with the same lifting outside [a, b] as the direct estimator.
inline DriftEstimate estimate_drift_plugin(const DensityEstimate& mu_hat,
                                           double a,
                                           double b,
                                           const DriftOptions& opt = {})
{
  const auto& basis = mu_hat.coeffs.basis();
  detail::require_drift_basis(basis);
  const int J = mu_hat.level();
  DriftEstimate out{ MultiScaleCoeffs(basis, a, b, J),
                     J,
                     0,
                     J,
                     mu_hat.n,
                     DriftMethod::plugin,
                     {},
                     std::make_shared<const DensityEstimate>(mu_hat) };
  auto& diag = out.diagnostics;
  diag.sup_mu = detail::check_positivity(
    mu_hat, a, b, opt.positivity_factor, opt.positivity_grid, diag.floor_value);
  const auto [lo, hi] = coefficient_support(basis, J, a, b);
  const auto grid = make_quadrature_grid(lo, hi, J + opt.refine + 2);
  const auto log_mu = detail::log_density_on_grid(mu_hat, grid, a, b, diag);
  out.coeffs = half_log_derivative_coeffs(basis, grid, log_mu, J, a, b);
  return out;
}

inline DriftEstimate estimate_drift_plugin(const DensityEstimate& mu_hat,
                                           const DriftOptions& opt = {})
{
  return estimate_drift_plugin(mu_hat, mu_hat.a(), mu_hat.b(), opt);
}

inline DriftEstimate estimate_drift_plugin(const Trajectory& traj,
                                           const WaveletBasis& basis,
                                           int J_mu,
                                           double a,
                                           double b,
                                           const DriftOptions& opt = {})
{
  const auto [lo, hi] = coefficient_support(basis, J_mu, a, b);
  return estimate_drift_plugin(
    estimate_density(traj, basis, J_mu, lo, hi), a, b, opt);
}

enum class DriftBandMode
{
  image_of_density_band, ///< D_n
  multiscale_cap,        ///< E_n
  adaptive               ///< E-tilde_n
};

inline std::string drift_band_mode_name(DriftBandMode m)
{
  switch (m) {
    case DriftBandMode::image_of_density_band:
      return "D_n";
    case DriftBandMode::multiscale_cap:
      return "E_n";
    case DriftBandMode::adaptive:
      return "adaptive";
  }
  return "unknown";
}

struct DriftBand
{
  DriftEstimate center;
  double zeta = 1.0;
  WeightSequence weights = WeightSequence::drift();
  DriftBandMode mode = DriftBandMode::multiscale_cap;
  SmoothnessCap cap;
  std::optional<LinfInfo> linf;
  /// D_n only: the density band whose image under xi this band is.
  std::shared_ptr<const DensityBand> density_band;
  /// D_n only: support on which pulled-back candidates are normalized.
  double pullback_lo = -12.0;
  double pullback_hi = 12.0;

  double multiscale_radius() const
  {
    return zeta / std::sqrt(static_cast<double>(center.n));
  }
  double linf_diameter() const { return linf ? 2.0 * linf->radius : INFINITY; }
};

//! E_n around a drift estimate at level J: multi-scale radius zeta / sqrt(n)
//! in drift-admissible weights, cap ||f||_{C^s} <= cap_scale w_J 2^{-J} / sqrt(J).
inline DriftBand band_drift(const DriftEstimate& est,
                            double zeta,
                            const WeightSequence& w,
                            double s,
                            double cap_scale = 1.0)
{
  if (!(zeta > 0.0)) {
    throw DomainError("band_drift: zeta must be > 0");
  }
  const int J = est.J;
  const double u = cap_scale * w(J) * std::ldexp(1.0, -J) /
                   std::sqrt(static_cast<double>(J));
  DriftBand band{ est,
                  zeta,
                  w,
                  DriftBandMode::multiscale_cap,
                  { s, u, cap_scale },
                  std::nullopt,
                  nullptr };
  const auto bound =
    linf_bound(est.coeffs.basis(), J, band.multiscale_radius(), w, s, u);
  LinfInfo info;
  info.radius = bound.radius();
  info.stochastic = bound.stochastic;
  info.bias = bound.bias;
  const double n = static_cast<double>(est.n);
  info.rate = std::pow(n / std::log(n), -s / (2.0 * s + 3.0)) * u;
  info.constant = info.radius / info.rate;
  band.linf = info;
  return band;
}

/// D_n = xi(C-bar_n). The center is the plug-in drift of the density band's
/// center.
inline DriftBand band_drift_image(std::shared_ptr<const DensityBand> density_band,
                                  double pullback_lo = -12.0,
                                  double pullback_hi = 12.0,
                                  const DriftOptions& opt = {})
{
  if (!density_band) {
    throw ConfigError("mode", "D_n needs an underlying density band");
  }
  if (!density_band->cap) {
    throw ConfigError("mode", "D_n is the image of the capped density band");
  }
  DriftBand band{ estimate_drift_plugin(density_band->center, opt),
                  density_band->zeta,
                  density_band->weights,
                  DriftBandMode::image_of_density_band,
                  *density_band->cap,
                  std::nullopt,
                  density_band,
                  pullback_lo,
                  pullback_hi };
  return band;
}

/// Membership in E_n (or the adaptive band) given candidate coefficients and
/// a bound on its C^s norm (s = band.cap.s).
inline bool band_contains(const DriftBand& band,
                          const MultiScaleCoeffs& candidate,
                          double holder_bound)
{
  if (band.mode == DriftBandMode::image_of_density_band) {
    throw DomainError("band_contains: D_n membership needs the candidate drift");
  }
  const auto& center = band.center.coeffs;
  if (candidate.max_level() < center.max_level()) {
    throw DomainError("band_contains: candidate resolved below band level");
  }
  const auto truncated = candidate.truncated(center.max_level());
  return multiscale_distance(truncated, center, band.weights) <
           band.multiscale_radius() &&
         holder_bound <= band.cap.u;
}

/// Membership of a candidate drift g. D_n pulls g back to the density
/// xi^{-1}(g) (normalized on the pull-back support) and tests it against
/// the density band with the Hölder norm of the pull-back; E_n analyzes g by
/// quadrature and uses `holder_bound`.
inline bool band_contains(const DriftBand& band,
                          const std::function<double(double)>& g,
                          std::optional<double> holder_bound = std::nullopt,
                          int refine = 6)
{
  const auto& c = band.center.coeffs;
  if (band.mode == DriftBandMode::image_of_density_band) {
    auto pulled = std::make_shared<TabulatedInvariantDensity>(
      xi_inverse(g, band.pullback_lo, band.pullback_hi));
    std::function<double(double)> f = [pulled](double x) { return (*pulled)(x); };
    std::function<double(double)> df = [pulled](double x) {
      return pulled->derivative(x);
    };
    const auto& db = *band.density_band;
    const double bound =
      holder_norm(f, db.cap->s, c.a(), c.b(), 1025, df);
    return mcband::band_contains(db, f, bound, refine);
  }
  if (!holder_bound) {
    throw DomainError("band_contains: E_n needs a Hölder bound");
  }
  const auto coeffs =
    analyze_function(c.basis(), g, c.max_level(), c.a(), c.b(), refine);
  return band_contains(band, coeffs, *holder_bound);
}

/// Terms of the linearisation
///   <b_hat - b, psi_{j,k}> = -<mu_hat - mu, psi'_{j,k} / (2 mu)> + <R, psi_{j,k}>,
///   R = -((mu_hat - mu) / (2 mu_hat)) ((mu_hat - mu) / mu)',
/// with b_hat = (1/2)(log mu_hat)' and b = (1/2)(log mu)', each evaluated by
/// its own midpoint quadrature.
struct LinearisationTerms
{
  double lhs = 0.0;
  double linear = 0.0;
  double remainder = 0.0;
};

struct DensityPair
{
  std::function<double(double)> mu;
  std::function<double(double)> dmu;
  std::function<double(double)> mu_hat;
  std::function<double(double)> dmu_hat;
};

inline double linearisation_remainder(const DensityPair& p, double x)
{
  const double mu = p.mu(x);
  const double mh = p.mu_hat(x);
  const double d = mh - mu;
  const double dd = p.dmu_hat(x) - p.dmu(x);
  const double ratio_prime = (dd * mu - d * p.dmu(x)) / (mu * mu);
  return -(d / (2.0 * mh)) * ratio_prime;
}

/// Pointwise main linear term (1/2)((mu_hat - mu) / mu)'.
inline double linearisation_main(const DensityPair& p, double x)
{
  const double mu = p.mu(x);
  const double d = p.mu_hat(x) - mu;
  const double dd = p.dmu_hat(x) - p.dmu(x);
  return 0.5 * (dd * mu - d * p.dmu(x)) / (mu * mu);
}

inline LinearisationTerms linearisation_terms(const WaveletBasis& basis,
                                              const DensityPair& p,
                                              int j,
                                              long k,
                                              int depth = 16)
{
  const auto [lo, hi] = basis.support(j, k);
  const auto grid = make_quadrature_grid(lo, hi, depth);
  LinearisationTerms t;
  for (long i = 0; i < grid.count; ++i) {
    const double x = grid.node(i);
    const double psi = basis.eval(j, k, x);
    const double dpsi = basis.eval_derivative(j, k, x);
    const double mu = p.mu(x);
    const double mh = p.mu_hat(x);
    const double b_hat = 0.5 * p.dmu_hat(x) / mh;
    const double b = 0.5 * p.dmu(x) / mu;
    t.lhs += (b_hat - b) * psi * grid.h;
    t.linear -= (mh - mu) * dpsi / (2.0 * mu) * grid.h;
    t.remainder += linearisation_remainder(p, x) * psi * grid.h;
  }
  return t;
}

} // namespace mcband
