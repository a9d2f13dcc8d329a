#pragma once

#include "mcband/density.hpp"
#include "mcband/errors.hpp"
#include "mcband/rng.hpp"
#include "mcband/simulate.hpp"
#include "mcband/wavelet.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mcband {

struct AsymptoticVariance
{
  double value = 0.0;
  int lag_truncation = 0; ///< last lag entering the sum
  std::string kind = "geyer-monotone";
  bool degenerate = false;
};

//! Geyer's initial monotone sequence estimator of
//! Sigma_f = gamma_0 + 2 sum_{h >= 1} gamma_h.
//!
//! Pair sums Gamma_m = gamma_{2m} + gamma_{2m+1} are accumulated up to the
//! first non-positive one, made nonincreasing by a running minimum, and
//! combined as -gamma_0 + 2 sum_m Gamma_m. Autocovariances use divisor n.
inline AsymptoticVariance geyer_variance(std::span<const double> x,
                                         std::optional<double> center = std::nullopt)
{
  const std::size_t n = x.size();
  if (n < 10) {
    throw DomainError("geyer_variance: need at least 10 samples");
  }
  double m = 0.0;
  if (center) {
    m = *center;
  } else {
    for (double v : x) {
      m += v;
    }
    m /= static_cast<double>(n);
  }
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = x[i] - m;
  }
  auto gamma = [&](std::size_t h) {
    double acc = 0.0;
    const double* p = c.data();
    const std::size_t len = n - h;
    for (std::size_t i = 0; i < len; ++i) {
      acc += p[i] * p[i + h];
    }
    return acc / static_cast<double>(n);
  };
  AsymptoticVariance out;
  const double g0 = gamma(0);
  if (g0 == 0.0) {
    out.degenerate = true;
    return out;
  }
  double sum = 0.0;
  double prev = INFINITY;
  std::size_t h = 0;
  for (; 2 * h + 1 < n; ++h) {
    const double pair = (h == 0 ? g0 : gamma(2 * h)) + gamma(2 * h + 1);
    if (!(pair > 0.0)) {
      break;
    }
    prev = std::min(prev, pair);
    sum += prev;
  }
  out.lag_truncation = h == 0 ? 0 : static_cast<int>(2 * h - 1);
  out.value = std::max(0.0, -g0 + 2.0 * sum);
  if (out.value == 0.0) {
    out.degenerate = true;
  }
  return out;
}

/// Per-coefficient asymptotic variances together with their maximum.
struct CoefficientVariances
{
  MultiScaleCoeffs variances;
  double max_value = 0.0;
  int argmax_level = 0;
  long argmax_k = 0;
  int degenerate_count = 0;
};

namespace detail {

/// Runs geyer_variance on t_{j,k}(Z_i) for every stored (j, k), where
/// `fill(level, k_min, k_max, rows)` writes the sequences of one level into
/// rows[k - k_min][i].
template<class Fill>
CoefficientVariances coefficient_variances(const WaveletBasis& basis,
                                           std::size_t n,
                                           int J,
                                           double a,
                                           double b,
                                           Fill&& fill)
{
  CoefficientVariances out{ MultiScaleCoeffs(basis, a, b, J), -INFINITY, 0, 0, 0 };
  for (auto& lv : out.variances.levels()) {
    std::vector<std::vector<double>> rows(lv.values.size(),
                                          std::vector<double>(n, 0.0));
    fill(lv.level, lv.k_min, lv.k_max(), rows);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto v = geyer_variance(rows[r]);
      lv.values[r] = v.value;
      out.degenerate_count += v.degenerate ? 1 : 0;
      if (v.value > out.max_value) {
        out.max_value = v.value;
        out.argmax_level = lv.level;
        out.argmax_k = lv.k_min + static_cast<long>(r);
      }
    }
  }
  out.max_value = std::max(0.0, out.max_value);
  return out;
}

} // namespace detail

/// Sigma_hat = max_{j <= J, k in K_j} Sigma_hat_{psi_{j,k}}.
inline CoefficientVariances sigma_sup(const Trajectory& traj,
                                      const WaveletBasis& basis,
                                      int J,
                                      double a,
                                      double b)
{
  const auto& z = traj.samples;
  return detail::coefficient_variances(
    basis, z.size(), J, a, b,
    [&](int level, long k_min, long k_max, std::vector<std::vector<double>>& rows) {
      for (std::size_t i = 0; i < z.size(); ++i) {
        basis.for_each_nonzero(level, z[i], k_min, k_max, [&](long k, double v) {
          rows[static_cast<std::size_t>(k - k_min)][i] = v;
        });
      }
    });
}

//! Variances of the drift field: Sigma_hat of
//! f_{j,k} = 2^{-j} psi'_{j,k} / (2 mu_hat) (2^{-j0} on the scaling level),
//! the influence functions of the direct drift estimator rescaled to O(1).
//! mu_hat is lifted to `floor_value` where it is smaller.
inline CoefficientVariances sigma_sup_drift(const Trajectory& traj,
                                            const WaveletBasis& basis,
                                            const std::function<double(double)>& mu_hat,
                                            double floor_value,
                                            int J,
                                            double a,
                                            double b)
{
  const auto& z = traj.samples;
  std::vector<double> inv(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    inv[i] = 0.5 / std::max(mu_hat(z[i]), floor_value);
  }
  return detail::coefficient_variances(
    basis, z.size(), J, a, b,
    [&](int level, long k_min, long k_max, std::vector<std::vector<double>>& rows) {
      const double scale = 1.0 / basis.dilation(level);
      for (std::size_t i = 0; i < z.size(); ++i) {
        basis.for_each_nonzero_derivative(
          level, z[i], k_min, k_max, [&](long k, double v) {
            rows[static_cast<std::size_t>(k - k_min)][i] = scale * v * inv[i];
          });
      }
    });
}

/// (1 + rho) / (1 - rho) sup_mu, an upper bound for the asymptotic variance
/// of any psi_{j,k} under an L^2(mu)-contraction with factor rho.
inline double contraction_bound(double rho, double sup_mu)
{
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw DomainError("contraction_bound: rho must lie in [0, 1)");
  }
  if (!(sup_mu > 0.0)) {
    throw DomainError("contraction_bound: sup_mu must be > 0");
  }
  return (1.0 + rho) / (1.0 - rho) * sup_mu;
}

struct RhoEstimate
{
  double rho = 0.0;
  double leading = 0.0; ///< largest eigenvalue (close to 1)
  int dimension = 0;
  double gram_condition = 0.0;
};

//! Second-largest eigenvalue modulus of the empirical transition operator on
//! V_J: cross moments C = (1/(n-1)) sum_i e(Z_i) e(Z_{i+1})^T symmetrized and
//! whitened by the empirical Gram matrix G = (1/n) sum_i e(Z_i) e(Z_i)^T via
//! (G + 1e-8 I)^{-1/2}.
//!
//! Requires n >= 10 dim(V_J)^2. Throws ConditioningError when G is singular
//! (some basis function sees no data).
inline RhoEstimate estimate_rho(const Trajectory& traj,
                                const WaveletBasis& basis,
                                int J,
                                double a,
                                double b,
                                bool enforce_sample_size = true)
{
  const MultiScaleCoeffs layout(basis, a, b, J);
  const int dim = static_cast<int>(layout.size());
  const auto& z = traj.samples;
  const std::size_t n = z.size();
  if (n < 2) {
    throw DomainError("estimate_rho: need at least 2 samples");
  }
  if (enforce_sample_size &&
      static_cast<double>(n) < 10.0 * static_cast<double>(dim) * dim) {
    throw ConfigError("J", "estimate_rho needs n >= 10 dim(V_J)^2 = " +
                             std::to_string(10L * dim * dim));
  }
  std::vector<long> offset;
  {
    long acc = 0;
    for (const auto& lv : layout.levels()) {
      offset.push_back(acc);
      acc += static_cast<long>(lv.values.size());
    }
  }
  using Entry = std::pair<int, double>;
  auto features = [&](double x, std::vector<Entry>& out) {
    out.clear();
    for (std::size_t l = 0; l < layout.levels().size(); ++l) {
      const auto& lv = layout.levels()[l];
      basis.for_each_nonzero(lv.level, x, lv.k_min, lv.k_max(), [&](long k, double v) {
        if (v != 0.0) {
          out.emplace_back(static_cast<int>(offset[l] + k - lv.k_min), v);
        }
      });
    }
  };
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<Entry> cur;
  std::vector<Entry> next;
  features(z[0], cur);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [p, u] : cur) {
      for (const auto& [q, v] : cur) {
        G(p, q) += u * v;
      }
    }
    if (i + 1 < n) {
      features(z[i + 1], next);
      for (const auto& [p, u] : cur) {
        for (const auto& [q, v] : next) {
          C(p, q) += u * v;
        }
      }
      std::swap(cur, next);
    }
  }
  G /= static_cast<double>(n);
  C /= static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram(G);
  const auto& gv = gram.eigenvalues();
  RhoEstimate out;
  out.dimension = dim;
  out.gram_condition = gv.maxCoeff() / std::max(gv.minCoeff(), 1e-300);
  if (!(gv.minCoeff() > 1e-12 * gv.maxCoeff())) {
    throw ConditioningError(
      "estimate_rho: empirical Gram matrix is singular (condition " +
      std::to_string(out.gram_condition) + "); use a larger n or a smaller J");
  }
  Eigen::VectorXd inv_sqrt = (gv.array() + 1e-8).rsqrt();
  const Eigen::MatrixXd W =
    gram.eigenvectors() * inv_sqrt.asDiagonal() * gram.eigenvectors().transpose();
  const Eigen::MatrixXd S = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> op(W * S * W);
  std::vector<double> ev(op.eigenvalues().data(), op.eigenvalues().data() + dim);
  std::sort(ev.begin(), ev.end(), [](double x, double y) {
    return std::abs(x) > std::abs(y);
  });
  out.leading = ev[0];
  const double second = dim > 1 ? std::abs(ev[1]) : 0.0;
  out.rho = std::clamp(second, 0.0, 1.0 - 1e-6);
  return out;
}

struct CriticalValue
{
  double alpha = 0.05;
  double zeta = 0.0;
  std::string construction = "gaussian-bound";
  double sigma = 1.0;
  double C = 0.0;                     ///< gaussian-bound only
  std::optional<std::uint64_t> seed;  ///< mc-quantile only
  int replications = 0;               ///< mc-quantile only
  std::string covariance_model;       ///< mc-quantile only
};

/// Weights as seen by the critical-value bound: w_j divided by the drift
/// rescaling 2^j (identity for density weights).
inline double normalized_weight(const WeightSequence& w, int j, int j0)
{
  return w(j) / w.level_scale(j, j0);
}

/// C = (sup_{j >= j0} (4 log |K_j| + 2 log 2) / j)^{1/2}. The sup runs over
/// [j0, J_cap + 40] and is extended until the summand decreases over the last
/// 10 levels.
inline double critical_value_constant(const WaveletBasis& basis,
                                      int J_cap,
                                      double a,
                                      double b)
{
  const int j0 = basis.base_level();
  if (j0 < 1) {
    throw ConfigError("j0", "the Gaussian critical value needs j0 >= 1");
  }
  std::vector<double> term;
  int last = std::max(J_cap, j0) + 40;
  for (int j = j0;; ++j) {
    const double size = static_cast<double>(index_set(basis, j, a, b).size());
    term.push_back((4.0 * std::log(size) + 2.0 * std::log(2.0)) / j);
    if (j >= last) {
      bool decreasing = true;
      for (std::size_t i = term.size() - 10; i + 1 < term.size(); ++i) {
        decreasing = decreasing && term[i + 1] <= term[i];
      }
      if (decreasing || j > 400) {
        break;
      }
      last += 10;
    }
  }
  return std::sqrt(*std::max_element(term.begin(), term.end()));
}

/// Checks w_{-1} = sqrt(j0) and inf_j w_j / sqrt(j) >= 1 for the normalized
/// weights over [j0, J_cap + 40].
inline void validate_critical_value_weights(const WeightSequence& w,
                                            int j0,
                                            int J_cap)
{
  const double w_minus1 = normalized_weight(w, kScalingLevel, j0);
  if (std::abs(w_minus1 - std::sqrt(static_cast<double>(j0))) >
      1e-12 * std::sqrt(static_cast<double>(j0))) {
    throw ConfigError("weights", "critical value needs w_{-1} = sqrt(j0) (got " +
                                   std::to_string(w_minus1) + ")");
  }
  for (int j = j0; j <= J_cap + 40; ++j) {
    if (normalized_weight(w, j, j0) < std::sqrt(static_cast<double>(j)) * (1.0 - 1e-12)) {
      throw ConfigError("weights", "critical value needs w_j >= sqrt(j), violated at j = " +
                                     std::to_string(j));
    }
  }
}

//! zeta_bar = (sqrt(2 log(1/alpha)) + 2 C + 32 / (3 C) 2^{-2 j0}) sqrt(Sigma).
inline CriticalValue zeta_gaussian_bound(double alpha,
                                         double sigma,
                                         const WaveletBasis& basis,
                                         const WeightSequence& w,
                                         int J_cap,
                                         double a,
                                         double b)
{
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("zeta_gaussian_bound: alpha must lie in (0, 1)");
  }
  if (!(sigma >= 0.0)) {
    throw DomainError("zeta_gaussian_bound: Sigma must be >= 0");
  }
  const int j0 = basis.base_level();
  validate_critical_value_weights(w, j0, J_cap);
  const double C = critical_value_constant(basis, J_cap, a, b);
  CriticalValue out;
  out.alpha = alpha;
  out.sigma = sigma;
  out.C = C;
  out.construction = "gaussian-bound";
  out.zeta = (std::sqrt(2.0 * std::log(1.0 / alpha)) + 2.0 * C +
              32.0 / (3.0 * C) * std::ldexp(1.0, -2 * j0)) *
             std::sqrt(sigma);
  return out;
}

enum class CovarianceModel
{
  diagonal,
  full
};

/// Empirical (1 - alpha)-quantile of max_{j,k} |G_{j,k}| / w_j over
/// `replications` draws, sorted-sample definition (the ceil((1-alpha) R)-th
/// order statistic).
inline double empirical_quantile(std::vector<double> values, double level)
{
  if (values.empty()) {
    throw DomainError("empirical_quantile: no values");
  }
  std::sort(values.begin(), values.end());
  const auto R = static_cast<double>(values.size());
  auto idx = static_cast<std::size_t>(std::ceil(level * R));
  idx = std::clamp<std::size_t>(idx, 1, values.size()) - 1;
  return values[idx];
}

//! Monte Carlo quantile with independent G_{j,k} ~ N(0, Sigma_{j,k}), the
//! variances given level-wise in `variances`. Drift weights enter through
//! normalized_weight, so drift variances must be the rescaled ones of
//! sigma_sup_drift.
inline CriticalValue zeta_mc_quantile(double alpha,
                                      const MultiScaleCoeffs& variances,
                                      const WeightSequence& w,
                                      int replications,
                                      std::uint64_t seed)
{
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("zeta_mc_quantile: alpha must lie in (0, 1)");
  }
  if (replications < 1000) {
    throw ConfigError("replications", "mc-quantile needs at least 1000 replications");
  }
  const int j0 = variances.basis().base_level();
  std::vector<double> sd;
  std::vector<double> inv_w;
  double sigma_max = 0.0;
  for (const auto& lv : variances.levels()) {
    for (double v : lv.values) {
      if (v < 0.0) {
        throw DomainError("zeta_mc_quantile: negative variance");
      }
      sd.push_back(std::sqrt(v));
      inv_w.push_back(1.0 / normalized_weight(w, lv.level, j0));
      sigma_max = std::max(sigma_max, v);
    }
  }
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> draws(static_cast<std::size_t>(replications));
  for (auto& d : draws) {
    double m = 0.0;
    for (std::size_t i = 0; i < sd.size(); ++i) {
      m = std::max(m, std::abs(sd[i] * normal(rng)) * inv_w[i]);
    }
    d = m;
  }
  CriticalValue out;
  out.alpha = alpha;
  out.zeta = empirical_quantile(std::move(draws), 1.0 - alpha);
  out.construction = "mc-quantile";
  out.sigma = sigma_max;
  out.seed = seed;
  out.replications = replications;
  out.covariance_model = "diagonal";
  return out;
}

//! Long-run covariance matrix of the vector e(Z_i) = (psi_{j,k}(Z_i))_{j,k}:
//! Gamma_0 + sum_{h=1}^{L} (Gamma_h + Gamma_h^T), with L the largest Geyer
//! truncation lag over the diagonal entries.
inline Eigen::MatrixXd long_run_covariance(const Trajectory& traj,
                                           const WaveletBasis& basis,
                                           int J,
                                           double a,
                                           double b,
                                           int max_dimension = 512)
{
  const MultiScaleCoeffs layout(basis, a, b, J);
  const int dim = static_cast<int>(layout.size());
  if (dim > max_dimension) {
    throw ConfigError("J", "full covariance limited to dim(V_J) <= " +
                             std::to_string(max_dimension));
  }
  const auto& z = traj.samples;
  const auto n = static_cast<long>(z.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, dim);
  long base = 0;
  for (const auto& lv : layout.levels()) {
    for (long i = 0; i < n; ++i) {
      basis.for_each_nonzero(lv.level, z[i], lv.k_min, lv.k_max(), [&](long k, double v) {
        X(i, base + k - lv.k_min) = v;
      });
    }
    base += static_cast<long>(lv.values.size());
  }
  X.rowwise() -= X.colwise().mean();
  int L = 0;
  for (int c = 0; c < dim; ++c) {
    std::vector<double> col(X.col(c).data(), X.col(c).data() + n);
    L = std::max(L, geyer_variance(col, 0.0).lag_truncation);
  }
  Eigen::MatrixXd S = X.transpose() * X / static_cast<double>(n);
  for (int h = 1; h <= L && h < n; ++h) {
    const Eigen::MatrixXd Gh =
      X.topRows(n - h).transpose() * X.bottomRows(n - h) / static_cast<double>(n);
    S += Gh + Gh.transpose();
  }
  return S;
}

/// Monte Carlo quantile under a full covariance (nearest-PSD projection by
/// clipping negative eigenvalues). The ordering of coordinates is that of
/// the coefficient layout of `layout`.
inline CriticalValue zeta_mc_quantile_full(double alpha,
                                           const Eigen::MatrixXd& covariance,
                                           const MultiScaleCoeffs& layout,
                                           const WeightSequence& w,
                                           int replications,
                                           std::uint64_t seed)
{
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("zeta_mc_quantile: alpha must lie in (0, 1)");
  }
  if (replications < 1000) {
    throw ConfigError("replications", "mc-quantile needs at least 1000 replications");
  }
  const long dim = covariance.rows();
  if (dim != static_cast<long>(layout.size())) {
    throw DomainError("zeta_mc_quantile: covariance does not match layout");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (covariance + covariance.transpose()));
  const Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd root = es.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
  Eigen::VectorXd inv_w(dim);
  long idx = 0;
  for (const auto& lv : layout.levels()) {
    for (std::size_t k = 0; k < lv.values.size(); ++k) {
      inv_w(idx++) = 1.0 / w(lv.level);
    }
  }
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd e(dim);
  std::vector<double> draws(static_cast<std::size_t>(replications));
  for (auto& d : draws) {
    for (long i = 0; i < dim; ++i) {
      e(i) = normal(rng);
    }
    d = (root * e).cwiseAbs().cwiseProduct(inv_w).maxCoeff();
  }
  CriticalValue out;
  out.alpha = alpha;
  out.zeta = empirical_quantile(std::move(draws), 1.0 - alpha);
  out.construction = "mc-quantile";
  out.sigma = covariance.diagonal().maxCoeff();
  out.seed = seed;
  out.replications = replications;
  out.covariance_model = "full";
  return out;
}

} // namespace mcband
