#pragma once

#include "mcband/density.hpp"
#include "mcband/drift.hpp"
#include "mcband/errors.hpp"
#include "mcband/holder.hpp"
#include "mcband/simulate.hpp"
#include "mcband/variance.hpp"
#include "mcband/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mcband {

/// V(n, j) = (2^{3j} j / n)^{1/2}.
inline double lepski_scale(double n, int j)
{
  return std::sqrt(std::ldexp(1.0, 3 * j) * j / n);
}

struct LepskiConfig
{
  double r_max = 2.0; ///< maximal regularity r > 1
  double K = 1.0;     ///< threshold constant
  int J_min = 1;
  int J_max = 4;
  int U = 1;          ///< oversmoothing offset, 2^U ~ log n
  int grid_points = 512;

  std::vector<int> grid() const
  {
    std::vector<int> out;
    for (int j = J_min; j <= J_max; ++j) {
      out.push_back(j);
    }
    return out;
  }
};

//! Resolution grid for sample size n:
//!   2^{J_min} = (n / log n)^{1/(2 r + 3)}, rounded and clamped to >= j0;
//!   2^{J_max} = n^{1/4} / (log n)^2, rounded, but at least J_min + min_span.
//! The lower limit on the span keeps the grid non-trivial at sample sizes
//! where the second formula is below J_min.
inline LepskiConfig make_lepski_config(double n,
                                       const WaveletBasis& basis,
                                       double r_max,
                                       double K,
                                       int min_span = 3)
{
  if (n < 3.0) {
    throw ConfigError("n", "Lepski grid needs n >= 3");
  }
  if (!(r_max > 1.0)) {
    throw ConfigError("r_max", "must be > 1");
  }
  if (!(K > 0.0)) {
    throw ConfigError("K", "must be > 0");
  }
  LepskiConfig cfg;
  cfg.r_max = r_max;
  cfg.K = K;
  const double log_n = std::log(n);
  cfg.J_min = std::max(
    basis.base_level(),
    static_cast<int>(std::lround(std::log2(n / log_n) / (2.0 * r_max + 3.0))));
  const int formula_max =
    static_cast<int>(std::lround(0.25 * std::log2(n) - 2.0 * std::log2(log_n)));
  cfg.J_max = std::max(formula_max, cfg.J_min + min_span);
  cfg.U = default_offset(n);
  return cfg;
}

inline void validate(const LepskiConfig& cfg, const WaveletBasis& basis)
{
  if (cfg.J_min < basis.base_level()) {
    throw ConfigError("J_min", "must be >= j0");
  }
  if (cfg.J_min >= cfg.J_max) {
    throw ConfigError("J_max", "Lepski grid needs J_min < J_max");
  }
  if (cfg.U < 1) {
    throw ConfigError("U", "must be >= 1");
  }
  if (!(cfg.K > 0.0)) {
    throw ConfigError("K", "must be > 0");
  }
}

struct LepskiPair
{
  int J = 0;
  int j = 0;
  double statistic = 0.0; ///< ||b_hat_J - b_hat_j||_inf on [a, b]
  double threshold = 0.0; ///< K V(n, j)
  bool pass = false;
};

struct AdaptiveSelection
{
  int J_hat = 0;
  double s_hat = 1.0;
  double v_n = 0.0;
  bool saturated = false;
  int J_max_effective = 0;   ///< last level whose density passed the floor
  std::vector<LepskiPair> pairs;
  std::vector<DriftEstimate> estimates; ///< b_hat_J for J in the grid
  DensityEstimate density;             ///< mu_hat at level J_max + U

  const DriftEstimate& selected() const
  {
    for (const auto& e : estimates) {
      if (e.J == J_hat) {
        return e;
      }
    }
    throw DomainError("selection: estimate for J_hat missing");
  }
};

/// v_n = log(2 + log n).
inline double default_tuning(double n)
{
  return std::log(2.0 + std::log(n));
}

/// s_hat = max(1, (log n - log log n) / (2 log 2 (J + v_n)) - 1.5 (1 + v_n / J)).
inline double estimate_smoothness(int J, double n, double v_n)
{
  if (J < 1) {
    throw DomainError("estimate_smoothness: J must be >= 1");
  }
  if (!(v_n > 0.0)) {
    throw DomainError("estimate_smoothness: v_n must be > 0");
  }
  const double log_n = std::log(n);
  const double value = (log_n - std::log(log_n)) / (2.0 * std::log(2.0) * (J + v_n)) -
                       1.5 * (1.0 + v_n / J);
  return std::max(1.0, value);
}

//! J_hat = min{J in grid : ||b_hat_J - b_hat_j||_inf <= K V(n, j) for all j > J}.
//! All b_hat_J share one density estimate at level J_max + U, truncated to
//! J + U. The grid ends below the first level whose truncated density fails
//! the positivity floor (a failure at J_min propagates). The last level
//! always qualifies; saturated is set when nothing below it does.
inline AdaptiveSelection lepski_select(const Trajectory& traj,
                                       const WaveletBasis& basis,
                                       const LepskiConfig& cfg,
                                       double a,
                                       double b,
                                       const DriftOptions& opt = {})
{
  validate(cfg, basis);
  const auto [lo, hi] = coefficient_support(basis, cfg.J_min, a, b);
  AdaptiveSelection sel{ 0, 1.0, 0.0, false, cfg.J_max, {}, {},
                         estimate_density(traj, basis, cfg.J_max + cfg.U, lo, hi) };
  std::vector<int> grid;
  const auto x = linspace(a, b, cfg.grid_points);
  std::vector<std::vector<double>> values;
  for (int J : cfg.grid()) {
    DensityEstimate mu{ sel.density.coeffs.truncated(J + cfg.U), sel.density.n, "lepski" };
    try {
      sel.estimates.push_back(estimate_drift_direct(mu, J, a, b, opt));
    } catch (const PositivityError&) {
      if (J == cfg.J_min) {
        throw;
      }
      break;
    }
    grid.push_back(J);
    std::vector<double> v(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      v[i] = synthesize(sel.estimates.back().coeffs, x[i]);
    }
    values.push_back(std::move(v));
  }
  const double n = static_cast<double>(traj.size());
  std::vector<bool> admissible(grid.size(), true);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (std::size_t q = p + 1; q < grid.size(); ++q) {
      double stat = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        stat = std::max(stat, std::abs(values[p][i] - values[q][i]));
      }
      LepskiPair pair{ grid[p], grid[q], stat, cfg.K * lepski_scale(n, grid[q]), false };
      pair.pass = pair.statistic <= pair.threshold;
      admissible[p] = admissible[p] && pair.pass;
      sel.pairs.push_back(pair);
    }
  }
  std::size_t chosen = grid.size() - 1;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    if (admissible[p]) {
      chosen = p;
      break;
    }
  }
  sel.J_max_effective = grid.back();
  sel.J_hat = grid[chosen];
  sel.saturated = chosen + 1 == grid.size();
  sel.v_n = default_tuning(n);
  sel.s_hat = estimate_smoothness(sel.J_hat, n, sel.v_n);
  return sel;
}

struct OracleLevel
{
  int J_star = 0;
  bool saturated = false;
};

/// J* = min{J in grid : (d2 + 1) 2^{-J s} <= (K / 4) V(n, J)}.
inline OracleLevel lepski_oracle(double n, double s, const LepskiConfig& cfg, double d2)
{
  if (!(s >= 1.0 && s <= cfg.r_max)) {
    throw DomainError("lepski_oracle: s must lie in [1, r_max]");
  }
  for (int J = cfg.J_min; J <= cfg.J_max; ++J) {
    if ((d2 + 1.0) * std::pow(2.0, -J * s) <= 0.25 * cfg.K * lepski_scale(n, J)) {
      return { J, false };
    }
  }
  return { cfg.J_max, true };
}

/// Bias constant d2 = max_{J in levels} ||pi_J b - b||_inf 2^{J s} on [a, b],
/// pi_J by quadrature on the coefficient support of [a, b].
inline double bias_constant(const WaveletBasis& basis,
                            const std::function<double(double)>& b_fn,
                            double s,
                            double a,
                            double b,
                            int J_lo = 6,
                            int J_hi = 10,
                            int grid_points = 2049)
{
  double d2 = 0.0;
  for (int J = J_lo; J <= J_hi; ++J) {
    const auto c = analyze_function(basis, b_fn, J, a, b, 6);
    double err = 0.0;
    for (double x : linspace(a, b, grid_points)) {
      err = std::max(err, std::abs(synthesize(c, x) - b_fn(x)));
    }
    d2 = std::max(d2, err * std::pow(2.0, J * s));
  }
  return d2;
}

/// Threshold constant K = kappa sqrt(Sigma_tilde) Lambda_psi, Sigma_tilde the
/// maximal rescaled drift variance.
inline double lepski_threshold_constant(double kappa,
                                        double sigma_drift,
                                        const WaveletBasis& basis)
{
  return kappa * std::sqrt(sigma_drift) * localization_constant(basis, false);
}

struct AdaptiveBandInfo
{
  AdaptiveSelection selection;
  double beta = 0.0;
  int M = 3;
  double u_hat = 0.0;
  double t_n = 0.0;
  CriticalValue critical_value;
  double sigma_drift = 0.0;
};

struct AdaptiveBand
{
  DriftBand band;
  AdaptiveBandInfo info;
};

struct AdaptiveOptions
{
  double alpha = 0.1;
  int M = 3;
  double cap_scale = 1.0;  ///< multiplier on t_n
  double weight_scale = 1.0;
  DriftOptions drift;
};

//! E-tilde_n: center b_hat_{J_hat, U}, multi-scale radius zeta_beta / sqrt(n)
//! with beta = alpha / (M + 1), cap ||f||_{C^{s_hat}} <= t_n = sqrt(u_hat),
//! u_hat = w_{J_hat} 2^{-J_hat} / sqrt(J_hat). zeta_beta is the Gaussian
//! bound with the maximal rescaled drift variance at J_hat.
inline AdaptiveBand adaptive_band(const Trajectory& traj,
                                  const WaveletBasis& basis,
                                  const LepskiConfig& cfg,
                                  double a,
                                  double b,
                                  const AdaptiveOptions& opt = {})
{
  if (opt.M < 1) {
    throw ConfigError("M", "must be >= 1");
  }
  AdaptiveBandInfo info{
    lepski_select(traj, basis, cfg, a, b, opt.drift), 0.0, opt.M, 0.0, 0.0, {}, 0.0
  };
  info.beta = opt.alpha / (opt.M + 1);
  const auto& center = info.selection.selected();
  const int J = info.selection.J_hat;
  const auto w = WeightSequence::critical_value_normalized(
    WeightSequence::Kind::drift_admissible, basis.base_level(), opt.weight_scale);
  const auto& mu = *center.density;
  const auto variances = sigma_sup_drift(
    traj, basis, [&mu](double x) { return mu(x); }, center.diagnostics.floor_value, J, a, b);
  info.sigma_drift = variances.max_value;
  info.critical_value =
    zeta_gaussian_bound(info.beta, info.sigma_drift, basis, w, J, a, b);
  info.u_hat = w(J) * std::ldexp(1.0, -J) / std::sqrt(static_cast<double>(J));
  info.t_n = opt.cap_scale * std::sqrt(info.u_hat);

  const double s_hat = info.selection.s_hat;
  DriftBand band{ center,
                  info.critical_value.zeta,
                  w,
                  DriftBandMode::adaptive,
                  { s_hat, info.t_n, opt.cap_scale },
                  std::nullopt,
                  nullptr };
  const auto bound =
    linf_bound(basis, J, band.multiscale_radius(), w, s_hat, info.t_n);
  LinfInfo linf;
  linf.radius = bound.radius();
  linf.stochastic = bound.stochastic;
  linf.bias = bound.bias;
  const double n = static_cast<double>(traj.size());
  linf.rate = std::pow(n / std::log(n), -s_hat / (2.0 * s_hat + 3.0)) * info.t_n;
  linf.constant = linf.radius / linf.rate;
  band.linf = linf;
  return { std::move(band), std::move(info) };
}

} // namespace mcband
