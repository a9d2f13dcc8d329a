#pragma once

#include "mcband/adapt.hpp"
#include "mcband/config.hpp"
#include "mcband/density.hpp"
#include "mcband/drift.hpp"
#include "mcband/simulate.hpp"
#include "mcband/variance.hpp"
#include "mcband/wavelet.hpp"

#include <memory>

namespace mcband {

/// Stream tag for the Monte Carlo quantile of a trajectory's band.
inline constexpr std::uint64_t kQuantileStream = 0x71a7e5ULL;

//! A validated configuration with its model and basis built once. All
//! methods are const and safe to call from several threads.
class Experiment
{
public:
  explicit Experiment(ExperimentConfig cfg)
    : cfg_((validate(cfg), std::move(cfg)))
    , model_(make_model(cfg_))
    , basis_(cfg_.basis.N, cfg_.basis.j0, cfg_.basis.R)
  {}

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const DiffusionModel& model() const noexcept { return model_; }
  const WaveletBasis& basis() const noexcept { return basis_; }
  double a() const noexcept { return cfg_.a; }
  double b() const noexcept { return cfg_.b; }

  static DiffusionModel make_model(const ExperimentConfig& c)
  {
    const auto& m = c.model;
    if (m.family == "ou") {
      return make_ou_model(m.theta, m.sigma);
    }
    if (m.family == "selfsim") {
      return make_selfsimilar_drift(m.s, m.x_jump, m.amplitude);
    }
    return make_brownian_model(m.sigma);
  }

  Trajectory simulate(std::uint64_t seed) const { return simulate(seed, cfg_.sampling.n); }

  Trajectory simulate(std::uint64_t seed, std::uint64_t n) const
  {
    const auto& s = cfg_.sampling;
    if (s.sampler == "exact") {
      return simulate_ou_exact(cfg_.model.theta, cfg_.model.sigma, n, s.delta, seed,
                               s.x0, s.stationary_start);
    }
    const int substeps = s.substeps > 0 ? s.substeps : default_substeps(s.delta);
    return simulate_diffusion(model_, n, s.delta, substeps, seed, s.x0, s.burn_in);
  }

  /// Trajectory of replication `index`, seeded by (master seed, index).
  Trajectory replicate(std::uint64_t index) const
  {
    return simulate(derive_seed(cfg_.sampling.seed, index));
  }

  int density_level(double n) const
  {
    if (cfg_.estimator.J >= 0) {
      return cfg_.estimator.J;
    }
    const auto kind =
      cfg_.estimator.schedule == "chain" ? Schedule::chain : Schedule::diffusion;
    return resolution_schedule_density(n, density_regularity(), kind, cfg_.basis.j0);
  }

  /// Regularity of the invariant density: s for the density target, s + 1
  /// for the drift target (mu' = 2 b mu).
  double density_regularity() const
  {
    return cfg_.estimator.target == "density" ? cfg_.estimator.s : cfg_.estimator.s + 1.0;
  }

  int drift_level(double n) const
  {
    if (cfg_.estimator.J >= 0) {
      return cfg_.estimator.J;
    }
    return resolution_schedule_density(n, cfg_.estimator.s, Schedule::diffusion,
                                       cfg_.basis.j0);
  }

  int offset(double n) const
  {
    return cfg_.estimator.U > 0 ? cfg_.estimator.U : default_offset(n);
  }

  DriftOptions drift_options() const
  {
    DriftOptions o;
    o.positivity_factor = cfg_.estimator.positivity_factor;
    return o;
  }

  WeightSequence density_weights() const
  {
    return WeightSequence::critical_value_normalized(
      WeightSequence::Kind::density, cfg_.basis.j0, cfg_.band.weight_scale);
  }

  WeightSequence drift_weights() const
  {
    return WeightSequence::critical_value_normalized(
      WeightSequence::Kind::drift_admissible, cfg_.basis.j0, cfg_.band.weight_scale);
  }

  BandMode density_mode() const
  {
    if (cfg_.band.density_mode == "multiscale") {
      return BandMode::multiscale;
    }
    return cfg_.band.density_mode == "linf" ? BandMode::linf : BandMode::smoothness_cap;
  }

  DensityEstimate density_estimate(const Trajectory& traj) const
  {
    require_samples(traj);
    const int J = density_level(static_cast<double>(traj.size()));
    auto est = estimate_density(traj, basis_, J, cfg_.a, cfg_.b);
    est.schedule = cfg_.estimator.J >= 0 ? "fixed" : cfg_.estimator.schedule;
    return est;
  }

  /// Critical value for the density band at level J from the configured
  /// construction.
  CriticalValue density_critical_value(const Trajectory& traj, int J) const
  {
    if (cfg_.band.zeta > 0.0) {
      return fixed_critical_value();
    }
    const auto w = density_weights();
    const auto v = sigma_sup(traj, basis_, J, cfg_.a, cfg_.b);
    if (cfg_.band.zeta_method == "mc-quantile") {
      return zeta_mc_quantile(cfg_.band.alpha, v.variances, w, cfg_.band.mc_replications,
                              derive_seed(traj.seed, kQuantileStream));
    }
    return zeta_gaussian_bound(cfg_.band.alpha, v.max_value, basis_, w, J, cfg_.a, cfg_.b);
  }

  struct DensityResult
  {
    DensityBand band;
    CriticalValue critical_value;
  };

  DensityResult density_band(const Trajectory& traj) const
  {
    auto est = density_estimate(traj);
    const auto cv = density_critical_value(traj, est.level());
    auto band = band_density(est, cv.zeta, density_weights(), density_regularity(),
                             density_mode(), cfg_.band.cap_scale, cfg_.band.grid_points);
    return { std::move(band), cv };
  }

  DriftEstimate drift_estimate(const Trajectory& traj) const
  {
    require_samples(traj);
    const double n = static_cast<double>(traj.size());
    if (cfg_.estimator.method == "plugin") {
      return estimate_drift_plugin(traj, basis_, drift_level(n), cfg_.a, cfg_.b,
                                   drift_options());
    }
    return estimate_drift_direct(traj, basis_, drift_level(n), offset(n), cfg_.a, cfg_.b,
                                 drift_options());
  }

  CriticalValue drift_critical_value(const Trajectory& traj, const DriftEstimate& est) const
  {
    if (cfg_.band.zeta > 0.0) {
      return fixed_critical_value();
    }
    const auto w = drift_weights();
    const auto& mu = *est.density;
    const auto v = sigma_sup_drift(
      traj, basis_, [&mu](double x) { return mu(x); }, est.diagnostics.floor_value, est.J,
      cfg_.a, cfg_.b);
    if (cfg_.band.zeta_method == "mc-quantile") {
      return zeta_mc_quantile(cfg_.band.alpha, v.variances, w, cfg_.band.mc_replications,
                              derive_seed(traj.seed, kQuantileStream));
    }
    return zeta_gaussian_bound(cfg_.band.alpha, v.max_value, basis_, w, est.J, cfg_.a,
                               cfg_.b);
  }

  struct DriftResult
  {
    DriftBand band;
    CriticalValue critical_value;
  };

  /// E_n around the configured estimator, or D_n as the image of the capped
  /// density band (density regularity s + 1).
  DriftResult drift_band(const Trajectory& traj) const
  {
    if (cfg_.band.drift_mode == "D_n") {
      auto est = density_estimate(traj);
      const auto cv = density_critical_value(traj, est.level());
      auto db = std::make_shared<const DensityBand>(
        band_density(est, cv.zeta, density_weights(), density_regularity(),
                     BandMode::smoothness_cap, cfg_.band.cap_scale, cfg_.band.grid_points));
      return { band_drift_image(db, -12.0, 12.0, drift_options()), cv };
    }
    auto est = drift_estimate(traj);
    const auto cv = drift_critical_value(traj, est);
    auto band =
      band_drift(est, cv.zeta, drift_weights(), cfg_.estimator.s, cfg_.band.cap_scale);
    return { std::move(band), cv };
  }

  LepskiConfig lepski_config(double n) const
  {
    auto lc = make_lepski_config(n, basis_, cfg_.lepski.r_max, cfg_.lepski.K,
                                 cfg_.lepski.min_span);
    lc.U = offset(n);
    lc.grid_points = cfg_.band.grid_points;
    return lc;
  }

  AdaptiveOptions adaptive_options() const
  {
    AdaptiveOptions o;
    o.alpha = cfg_.band.alpha;
    o.M = cfg_.lepski.M;
    o.cap_scale = cfg_.band.cap_scale;
    o.weight_scale = cfg_.band.weight_scale;
    o.drift = drift_options();
    return o;
  }

  AdaptiveBand adaptive_band(const Trajectory& traj) const
  {
    require_samples(traj);
    return mcband::adaptive_band(traj, basis_, lepski_config(static_cast<double>(traj.size())),
                                 cfg_.a, cfg_.b, adaptive_options());
  }

private:
  CriticalValue fixed_critical_value() const
  {
    CriticalValue cv;
    cv.alpha = cfg_.band.alpha;
    cv.zeta = cfg_.band.zeta;
    cv.construction = "fixed";
    cv.sigma = 0.0;
    return cv;
  }

  static void require_samples(const Trajectory& traj)
  {
    if (traj.samples.empty()) {
      throw DomainError("trajectory is empty");
    }
    if (traj.size() < 3) {
      throw DomainError("trajectory needs at least 3 samples");
    }
  }

  ExperimentConfig cfg_;
  DiffusionModel model_;
  WaveletBasis basis_;
};

} // namespace mcband
