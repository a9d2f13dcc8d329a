#pragma once

#include "mcband/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mcband {

/// Level index of the scaling functions phi_{j0,k}. Detail levels run
/// j0, j0+1, ... and the scaling level sits in front of them.
inline constexpr int kScalingLevel = -1;

//! Low-pass filter h_0..h_{2N-1} of the extremal-phase Daubechies wavelet
//! with N vanishing moments, normalized so that sum h_k = sqrt(2).
//!
//! Computed by spectral factorization: the roots of
//! P(y) = sum_{k<N} binom(N-1+k, k) y^k are mapped to z + 1/z = 2 - 4y and the
//! roots inside the unit circle are kept. Root finding runs in long double
//! with Newton polishing, which keeps sum h_k h_{k+2m} = delta_m to ~1e-14
//! for N <= 20.
inline std::vector<double> daubechies_filter(int order)
{
  if (order < 1) {
    throw DomainError("daubechies_filter: order must be >= 1");
  }
  using ld = long double;
  using cld = std::complex<ld>;
  const int N = order;

  std::vector<ld> c(static_cast<std::size_t>(N));
  c[0] = 1.0L;
  for (int k = 1; k < N; ++k) {
    c[k] = c[k - 1] * static_cast<ld>(N - 1 + k) / static_cast<ld>(k);
  }

  std::vector<cld> yroots;
  if (N > 1) {
    const int deg = N - 1;
    Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic> companion =
      Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic>::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) {
      companion(i, i - 1) = 1.0L;
    }
    for (int i = 0; i < deg; ++i) {
      companion(i, deg - 1) = -c[i] / c[deg];
    }
    Eigen::EigenSolver<Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic>> es(
      companion, false);
    for (int i = 0; i < deg; ++i) {
      cld y = es.eigenvalues()(i);
      for (int it = 0; it < 8; ++it) {
        cld p = c[deg];
        cld dp = 0.0L;
        for (int k = deg - 1; k >= 0; --k) {
          dp = dp * y + p;
          p = p * y + c[k];
        }
        if (std::abs(dp) == 0.0L) {
          break;
        }
        y -= p / dp;
      }
      yroots.push_back(y);
    }
  }

  // Polynomial in z, ascending powers.
  std::vector<cld> poly{ cld(1.0L) };
  auto multiply_linear = [&poly](cld root) {
    std::vector<cld> next(poly.size() + 1, cld(0.0L));
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= root * poly[i];
    }
    poly = std::move(next);
  };
  for (int i = 0; i < N; ++i) {
    multiply_linear(cld(-1.0L));
  }
  for (const cld& y : yroots) {
    const cld mid = 1.0L - 2.0L * y;
    const cld disc = std::sqrt(mid * mid - 1.0L);
    cld z = mid + disc;
    if (std::abs(z) > 1.0L) {
      z = mid - disc;
    }
    multiply_linear(z);
  }

  ld sum = 0.0L;
  for (const cld& p : poly) {
    sum += p.real();
  }
  const ld scale = std::sqrt(2.0L) / sum;
  std::vector<double> h(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) {
    h[poly.size() - 1 - i] = static_cast<double>(poly[i].real() * scale);
  }
  return h;
}

namespace detail {

// phi^{(d)} at the integers 1..2N-2 as the eigenvector of the two-scale
// matrix with eigenvalue 2^{-d}; d = 0 normalized by partition of unity,
// d = 1 by sum_n n phi'(n) = -1 (reproduction of x).
inline std::vector<double> integer_values(const std::vector<double>& h,
                                          int derivative)
{
  const int len = static_cast<int>(h.size());
  const int m = len - 2;
  const double root2 = std::sqrt(2.0);
  const double lambda = std::ldexp(1.0, -derivative);
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
  for (int i = 1; i <= m; ++i) {
    for (int n = 1; n <= m; ++n) {
      const int idx = 2 * i - n;
      if (idx >= 0 && idx < len) {
        sys(i - 1, n - 1) = root2 * h[idx];
      }
    }
    sys(i - 1, i - 1) -= lambda;
  }
  for (int n = 1; n <= m; ++n) {
    sys(m, n - 1) = derivative == 0 ? 1.0 : static_cast<double>(n);
  }
  rhs(m) = derivative == 0 ? 1.0 : -1.0;
  Eigen::VectorXd v = sys.colPivHouseholderQr().solve(rhs);
  std::vector<double> out(static_cast<std::size_t>(len), 0.0);
  for (int n = 1; n <= m; ++n) {
    out[n] = v(n - 1);
  }
  return out;
}

// Values of phi^{(d)} on the dyadic grid of spacing 2^{-depth} over [0, 2N-1].
inline std::vector<double> cascade_table(const std::vector<double>& h,
                                         int depth,
                                         int derivative)
{
  const int len = static_cast<int>(h.size());
  const std::int64_t per_unit = std::int64_t{ 1 } << depth;
  const std::int64_t size = (len - 1) * per_unit + 1;
  std::vector<double> table(static_cast<std::size_t>(size), 0.0);
  const auto ints = integer_values(h, derivative);
  for (int n = 0; n < len; ++n) {
    table[n * per_unit] = ints[n];
  }
  const double factor = std::sqrt(2.0) * std::ldexp(1.0, derivative);
  for (int r = 1; r <= depth; ++r) {
    const std::int64_t step = std::int64_t{ 1 } << (depth - r);
    for (std::int64_t i = step; i < size; i += 2 * step) {
      double acc = 0.0;
      for (int k = 0; k < len; ++k) {
        const std::int64_t idx = 2 * i - k * per_unit;
        if (idx > 0 && idx < size) {
          acc += h[k] * table[idx];
        }
      }
      table[i] = factor * acc;
    }
  }
  return table;
}

// psi^{(d)}(t) = 2^d sqrt(2) sum_k g_k phi^{(d)}(2t - k), g_k = (-1)^k h_{1-k},
// tabulated on spacing 2^{-depth} over [-N+1, N].
inline std::vector<double> wavelet_table(const std::vector<double>& h,
                                         const std::vector<double>& phi_table,
                                         int depth,
                                         int derivative)
{
  const int len = static_cast<int>(h.size());
  const int N = len / 2;
  const std::int64_t per_unit = std::int64_t{ 1 } << depth;
  const std::int64_t size = (len - 1) * per_unit + 1;
  const auto phi_size = static_cast<std::int64_t>(phi_table.size());
  std::vector<double> table(static_cast<std::size_t>(size), 0.0);
  const double factor = std::sqrt(2.0) * std::ldexp(1.0, derivative);
  for (std::int64_t i = 0; i < size; ++i) {
    // t = -N + 1 + i / per_unit ; phi index of 2t - k is (2t - k) * per_unit
    double acc = 0.0;
    for (int k = 2 - 2 * N; k <= 1; ++k) {
      const double g = ((k % 2 == 0) ? 1.0 : -1.0) * h[1 - k];
      const std::int64_t idx = 2 * (1 - N) * per_unit + 2 * i - k * per_unit;
      if (idx >= 0 && idx < phi_size) {
        acc += g * phi_table[idx];
      }
    }
    table[i] = factor * acc;
  }
  return table;
}

struct BasisTables
{
  std::vector<double> filter;
  std::vector<double> phi;
  std::vector<double> psi;
  std::vector<double> dphi; // empty when N < 3
  std::vector<double> dpsi;
};

} // namespace detail

//! Daubechies wavelet basis of order N on the real line with base level j0.
//!
//! phi and psi (and their first derivatives for N >= 3) are tabulated on the
//! dyadic grid of spacing 2^{-R} by the two-scale recursion started from the
//! exact integer values; off-grid points use linear interpolation. Values
//! outside the support are exactly zero. Haar (N = 1) is evaluated in closed
//! form. The object is immutable and cheap to copy.
class WaveletBasis
{
public:
  explicit WaveletBasis(int order = 8, int base_level = 3, int grid_depth = 12)
    : order_(order)
    , base_level_(base_level)
    , grid_depth_(grid_depth)
  {
    if (order < 1 || order > 40) {
      throw ConfigError("order", "must be in [1, 40]");
    }
    if (base_level < 0) {
      throw ConfigError("j0", "base level must be >= 0");
    }
    if (grid_depth < 4 || grid_depth > 20) {
      throw ConfigError("grid_depth", "must be in [4, 20]");
    }
    auto tables = std::make_shared<detail::BasisTables>();
    tables->filter = daubechies_filter(order);
    if (order > 1) {
      tables->phi = detail::cascade_table(tables->filter, grid_depth, 0);
      tables->psi =
        detail::wavelet_table(tables->filter, tables->phi, grid_depth, 0);
      if (order >= 3) {
        tables->dphi = detail::cascade_table(tables->filter, grid_depth, 1);
        tables->dpsi =
          detail::wavelet_table(tables->filter, tables->dphi, grid_depth, 1);
      }
    }
    tables_ = std::move(tables);
    per_unit_ = std::ldexp(1.0, grid_depth);
  }

  int order() const noexcept { return order_; }
  int base_level() const noexcept { return base_level_; }
  int grid_depth() const noexcept { return grid_depth_; }
  const std::vector<double>& filter() const noexcept { return tables_->filter; }
  bool differentiable() const noexcept { return order_ >= 3; }

  /// Support of phi is [0, 2N-1], of psi is [-N+1, N].
  double phi_support_lo() const noexcept { return 0.0; }
  double phi_support_hi() const noexcept { return 2.0 * order_ - 1.0; }
  double psi_support_lo() const noexcept { return 1.0 - order_; }
  double psi_support_hi() const noexcept { return static_cast<double>(order_); }

  double phi(double t) const noexcept
  {
    if (order_ == 1) {
      return (t >= 0.0 && t < 1.0) ? 1.0 : 0.0;
    }
    return lookup(tables_->phi, t - phi_support_lo());
  }

  double psi(double t) const noexcept
  {
    if (order_ == 1) {
      if (t >= 0.0 && t < 0.5) {
        return 1.0;
      }
      return (t >= 0.5 && t < 1.0) ? -1.0 : 0.0;
    }
    return lookup(tables_->psi, t - psi_support_lo());
  }

  double dphi(double t) const
  {
    require_differentiable();
    return lookup(tables_->dphi, t - phi_support_lo());
  }

  double dpsi(double t) const
  {
    require_differentiable();
    return lookup(tables_->dpsi, t - psi_support_lo());
  }

  /// 2^j for detail levels, 2^{j0} for the scaling level.
  double dilation(int level) const noexcept
  {
    return std::ldexp(1.0, level == kScalingLevel ? base_level_ : level);
  }

  /// psi_{j,k}(x) = 2^{j/2} psi(2^j x - k); level -1 gives phi_{j0,k}.
  double eval(int level, long k, double x) const noexcept
  {
    const double s = dilation(level);
    const double t = s * x - static_cast<double>(k);
    return std::sqrt(s) * (level == kScalingLevel ? phi(t) : psi(t));
  }

  /// d/dx psi_{j,k}(x) = 2^{3j/2} psi'(2^j x - k).
  double eval_derivative(int level, long k, double x) const
  {
    const double s = dilation(level);
    const double t = s * x - static_cast<double>(k);
    return s * std::sqrt(s) * (level == kScalingLevel ? dphi(t) : dpsi(t));
  }

  /// Closed support of psi_{j,k} (phi_{j0,k} for the scaling level).
  std::pair<double, double> support(int level, long k) const noexcept
  {
    const double s = dilation(level);
    const double lo =
      level == kScalingLevel ? phi_support_lo() : psi_support_lo();
    const double hi =
      level == kScalingLevel ? phi_support_hi() : psi_support_hi();
    return { (lo + static_cast<double>(k)) / s,
             (hi + static_cast<double>(k)) / s };
  }

  /// Translates k for which psi_{j,k}(x) can be nonzero.
  std::pair<long, long> translates_at(int level, double x) const noexcept
  {
    const double t = dilation(level) * x;
    const double lo =
      level == kScalingLevel ? phi_support_lo() : psi_support_lo();
    const double hi =
      level == kScalingLevel ? phi_support_hi() : psi_support_hi();
    return { static_cast<long>(std::ceil(t - hi)),
             static_cast<long>(std::floor(t - lo)) };
  }

  /// Calls fn(k, psi_{j,k}(x)) for every k in [k_lo, k_hi] whose support
  /// contains x.
  template<class Fn>
  void for_each_nonzero(int level,
                        double x,
                        long k_lo,
                        long k_hi,
                        Fn&& fn) const
  {
    auto [lo, hi] = translates_at(level, x);
    lo = std::max(lo, k_lo);
    hi = std::min(hi, k_hi);
    for (long k = lo; k <= hi; ++k) {
      fn(k, eval(level, k, x));
    }
  }

  template<class Fn>
  void for_each_nonzero_derivative(int level,
                                   double x,
                                   long k_lo,
                                   long k_hi,
                                   Fn&& fn) const
  {
    auto [lo, hi] = translates_at(level, x);
    lo = std::max(lo, k_lo);
    hi = std::min(hi, k_hi);
    for (long k = lo; k <= hi; ++k) {
      fn(k, eval_derivative(level, k, x));
    }
  }

private:
  void require_differentiable() const
  {
    if (!differentiable()) {
      throw ConfigError("order",
                        "derivatives need a C^1 wavelet (order >= 3), got N=" +
                          std::to_string(order_));
    }
  }

  double lookup(const std::vector<double>& table, double u) const noexcept
  {
    const double pos = u * per_unit_;
    const auto last = static_cast<double>(table.size() - 1);
    if (!(pos >= 0.0) || pos > last) {
      return 0.0;
    }
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= table.size()) {
      return table.back();
    }
    const double frac = pos - static_cast<double>(i);
    return table[i] + frac * (table[i + 1] - table[i]);
  }

  int order_;
  int base_level_;
  int grid_depth_;
  double per_unit_ = 0.0;
  std::shared_ptr<const detail::BasisTables> tables_;
};

/// Contiguous range of translates at one level whose support meets [a, b].
struct LevelIndexSet
{
  int level = 0;
  double a = 0.0;
  double b = 1.0;
  long k_min = 0;
  long k_max = -1;

  std::size_t size() const noexcept
  {
    return k_max >= k_min ? static_cast<std::size_t>(k_max - k_min + 1) : 0;
  }
  bool contains(long k) const noexcept { return k >= k_min && k <= k_max; }
};

/// K_j = {k : 2^j a - N <= k <= 2^j b + N - 1} for detail levels and
/// L = {k : 2^{j0} a - 2N + 1 <= k <= 2^{j0} b} for the scaling level.
inline LevelIndexSet index_set(const WaveletBasis& basis,
                               int level,
                               double a,
                               double b)
{
  if (!(a < b)) {
    throw DomainError("index_set: need a < b");
  }
  if (level != kScalingLevel && level < basis.base_level()) {
    throw DomainError("index_set: level below base level");
  }
  const double s = basis.dilation(level);
  const int N = basis.order();
  LevelIndexSet out;
  out.level = level;
  out.a = a;
  out.b = b;
  if (level == kScalingLevel) {
    out.k_min = static_cast<long>(std::ceil(s * a - 2.0 * N + 1.0));
    out.k_max = static_cast<long>(std::floor(s * b));
  } else {
    out.k_min = static_cast<long>(std::ceil(s * a - N));
    out.k_max = static_cast<long>(std::floor(s * b + N - 1.0));
  }
  return out;
}

/// Levels -1, j0, ..., J in storage order.
inline std::vector<int> levels_up_to(const WaveletBasis& basis, int max_level)
{
  std::vector<int> out{ kScalingLevel };
  for (int j = basis.base_level(); j <= max_level; ++j) {
    out.push_back(j);
  }
  return out;
}

//! Weight sequence of a multi-scale space M(w).
//!
//! density kind:          w_j = scale * sqrt(j log(2 + j))
//! drift-admissible kind: w_j = scale * 2^j sqrt(j) log(2 + j)
//!
//! w_{-1} is stored explicitly: 1 for the plain space, or the normalization
//! sqrt(j0) (times 2^{j0} for drift weights) used by the Gaussian critical
//! value bound.
struct WeightSequence
{
  enum class Kind
  {
    density,
    drift_admissible
  };

  Kind kind = Kind::density;
  double scale = 1.0;
  double w_minus1 = 1.0;

  static WeightSequence density(double scale = 1.0) { return { Kind::density, scale, 1.0 }; }
  static WeightSequence drift(double scale = 1.0) { return { Kind::drift_admissible, scale, 1.0 }; }

  /// Weights normalized as required by the Gaussian critical-value bound:
  /// w_{-1} = sqrt(j0), resp. sqrt(j0) 2^{j0} for drift weights.
  static WeightSequence critical_value_normalized(Kind kind,
                                                  int j0,
                                                  double scale = 1.0)
  {
    WeightSequence w{ kind, scale, std::sqrt(static_cast<double>(j0)) };
    if (kind == Kind::drift_admissible) {
      w.w_minus1 *= std::ldexp(1.0, j0);
    }
    return w;
  }

  double operator()(int j) const noexcept
  {
    if (j == kScalingLevel) {
      return w_minus1;
    }
    const double jd = static_cast<double>(j);
    if (kind == Kind::density) {
      return scale * std::sqrt(jd * std::log(2.0 + jd));
    }
    return scale * std::ldexp(1.0, j) * std::sqrt(jd) * std::log(2.0 + jd);
  }

  /// Multiplier that turns the drift field into one with O(1) variances:
  /// 2^j for drift weights (2^{j0} on the scaling level), 1 otherwise.
  double level_scale(int j, int j0) const noexcept
  {
    if (kind == Kind::density) {
      return 1.0;
    }
    return std::ldexp(1.0, j == kScalingLevel ? j0 : j);
  }

  std::string kind_name() const
  {
    return kind == Kind::density ? "density" : "drift-admissible";
  }
};

/// One resolution level of a coefficient array.
struct CoeffLevel
{
  int level = 0;
  long k_min = 0;
  std::vector<double> values;

  long k_max() const noexcept
  {
    return k_min + static_cast<long>(values.size()) - 1;
  }
};

//! Wavelet coefficients x_{j,k} for j in {-1, j0, ..., J} and k in K_j, with
//! respect to a fixed basis and interval [a, b].
class MultiScaleCoeffs
{
public:
  MultiScaleCoeffs(WaveletBasis basis, double a, double b, int max_level)
    : basis_(std::move(basis))
    , a_(a)
    , b_(b)
    , max_level_(max_level)
  {
    if (!(a < b)) {
      throw DomainError("coefficients: need a < b");
    }
    if (max_level < basis_.base_level()) {
      throw DomainError("coefficients: max level J must be >= j0");
    }
    for (int j : levels_up_to(basis_, max_level)) {
      const auto set = index_set(basis_, j, a, b);
      levels_.push_back({ j, set.k_min, std::vector<double>(set.size(), 0.0) });
    }
  }

  const WaveletBasis& basis() const noexcept { return basis_; }
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  int max_level() const noexcept { return max_level_; }
  const std::vector<CoeffLevel>& levels() const noexcept { return levels_; }
  std::vector<CoeffLevel>& levels() noexcept { return levels_; }

  CoeffLevel& level(int j) { return levels_.at(position(j)); }
  const CoeffLevel& level(int j) const { return levels_.at(position(j)); }

  double at(int j, long k) const
  {
    const auto& lv = level(j);
    if (k < lv.k_min || k > lv.k_max()) {
      return 0.0;
    }
    return lv.values[static_cast<std::size_t>(k - lv.k_min)];
  }

  void set(int j, long k, double v)
  {
    auto& lv = level(j);
    if (k < lv.k_min || k > lv.k_max()) {
      throw DomainError("coefficients: translate outside index set");
    }
    lv.values[static_cast<std::size_t>(k - lv.k_min)] = v;
  }

  std::size_t size() const noexcept
  {
    std::size_t n = 0;
    for (const auto& lv : levels_) {
      n += lv.values.size();
    }
    return n;
  }

  /// Projection onto V_{J'} for J' <= J: coefficient truncation.
  MultiScaleCoeffs truncated(int new_max) const
  {
    if (new_max > max_level_ || new_max < basis_.base_level()) {
      throw DomainError("truncated: level outside [j0, J]");
    }
    MultiScaleCoeffs out(basis_, a_, b_, new_max);
    for (std::size_t i = 0; i < out.levels_.size(); ++i) {
      out.levels_[i].values = levels_[i].values;
    }
    return out;
  }

  bool all_finite() const noexcept
  {
    for (const auto& lv : levels_) {
      for (double v : lv.values) {
        if (!std::isfinite(v)) {
          return false;
        }
      }
    }
    return true;
  }

  MultiScaleCoeffs& operator*=(double c)
  {
    for (auto& lv : levels_) {
      for (double& v : lv.values) {
        v *= c;
      }
    }
    return *this;
  }

  /// Elementwise difference over the common levels (the shorter max level).
  friend MultiScaleCoeffs operator-(const MultiScaleCoeffs& x,
                                    const MultiScaleCoeffs& y)
  {
    const int J = std::min(x.max_level_, y.max_level_);
    MultiScaleCoeffs out = x.truncated(J);
    for (std::size_t i = 0; i < out.levels_.size(); ++i) {
      auto& dst = out.levels_[i].values;
      const auto& src = y.levels_[i].values;
      for (std::size_t k = 0; k < dst.size(); ++k) {
        dst[k] -= src[k];
      }
    }
    return out;
  }

  /// Smallest x with a nonzero basis function of this array.
  double support_lo() const
  {
    double lo = a_;
    for (const auto& lv : levels_) {
      lo = std::min(lo, basis_.support(lv.level, lv.k_min).first);
    }
    return lo;
  }

  double support_hi() const
  {
    double hi = b_;
    for (const auto& lv : levels_) {
      hi = std::max(hi, basis_.support(lv.level, lv.k_max()).second);
    }
    return hi;
  }

private:
  std::size_t position(int j) const
  {
    if (j == kScalingLevel) {
      return 0;
    }
    if (j < basis_.base_level() || j > max_level_) {
      throw DomainError("coefficients: level " + std::to_string(j) +
                        " not stored");
    }
    return static_cast<std::size_t>(j - basis_.base_level() + 1);
  }

  WaveletBasis basis_;
  double a_;
  double b_;
  int max_level_;
  std::vector<CoeffLevel> levels_;
};

/// Empirical coefficients (1/n) sum_i psi_{j,k}(Z_i) for all stored (j, k).
/// Samples whose basis functions fall outside K_j contribute nothing there.
inline MultiScaleCoeffs analyze_sample(const WaveletBasis& basis,
                                       std::span<const double> samples,
                                       int max_level,
                                       double a,
                                       double b)
{
  if (samples.empty()) {
    throw DomainError("analyze: empty sample");
  }
  MultiScaleCoeffs out(basis, a, b, max_level);
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  for (auto& lv : out.levels()) {
    const long k_min = lv.k_min;
    const long k_max = lv.k_max();
    auto& values = lv.values;
    for (double x : samples) {
      basis.for_each_nonzero(lv.level, x, k_min, k_max, [&](long k, double v) {
        values[static_cast<std::size_t>(k - k_min)] += v;
      });
    }
    for (double& v : values) {
      v *= inv_n;
    }
  }
  return out;
}

/// Midpoint nodes (i + 1/2) h covering [lo, hi] on the dyadic grid h.
struct QuadratureGrid
{
  double h = 0.0;
  long first = 0; // node i sits at (first + i + 1/2) h
  long count = 0;

  double node(long i) const noexcept
  {
    return (static_cast<double>(first + i) + 0.5) * h;
  }
};

inline QuadratureGrid make_quadrature_grid(double lo, double hi, int depth)
{
  QuadratureGrid g;
  g.h = std::ldexp(1.0, -depth);
  g.first = static_cast<long>(std::floor(lo / g.h));
  const long last = static_cast<long>(std::ceil(hi / g.h));
  g.count = std::max(0L, last - g.first);
  return g;
}

/// Union of the supports of all basis functions stored up to max_level.
inline std::pair<double, double> coefficient_support(const WaveletBasis& basis,
                                                     int max_level,
                                                     double a,
                                                     double b)
{
  double lo = a;
  double hi = b;
  for (int j : levels_up_to(basis, max_level)) {
    const auto set = index_set(basis, j, a, b);
    lo = std::min(lo, basis.support(j, set.k_min).first);
    hi = std::max(hi, basis.support(j, set.k_max).second);
  }
  return { lo, hi };
}

/// Coefficients <f, psi_{j,k}> by composite midpoint quadrature with spacing
/// 2^{-(J + refine)}. The rule is second order where f psi is C^2 and first
/// order across kinks of f.
inline MultiScaleCoeffs analyze_function(const WaveletBasis& basis,
                                         const std::function<double(double)>& f,
                                         int max_level,
                                         double a,
                                         double b,
                                         int refine = 6)
{
  MultiScaleCoeffs out(basis, a, b, max_level);
  const auto [lo, hi] = coefficient_support(basis, max_level, a, b);
  const auto grid = make_quadrature_grid(lo, hi, max_level + refine);
  std::vector<double> fx(static_cast<std::size_t>(grid.count));
  for (long i = 0; i < grid.count; ++i) {
    fx[i] = f(grid.node(i));
  }
  for (auto& lv : out.levels()) {
    const long k_min = lv.k_min;
    const long k_max = lv.k_max();
    auto& values = lv.values;
    for (long i = 0; i < grid.count; ++i) {
      const double w = fx[i] * grid.h;
      if (w == 0.0) {
        continue;
      }
      basis.for_each_nonzero(
        lv.level, grid.node(i), k_min, k_max, [&](long k, double v) {
          values[static_cast<std::size_t>(k - k_min)] += w * v;
        });
    }
  }
  return out;
}

/// sum_{j,k} x_{j,k} psi_{j,k}(x).
inline double synthesize(const MultiScaleCoeffs& coeffs, double x)
{
  const auto& basis = coeffs.basis();
  double acc = 0.0;
  for (const auto& lv : coeffs.levels()) {
    basis.for_each_nonzero(lv.level, x, lv.k_min, lv.k_max(), [&](long k, double v) {
      acc += lv.values[static_cast<std::size_t>(k - lv.k_min)] * v;
    });
  }
  return acc;
}

/// Derivative of the synthesized function (needs order >= 3).
inline double synthesize_derivative(const MultiScaleCoeffs& coeffs, double x)
{
  const auto& basis = coeffs.basis();
  double acc = 0.0;
  for (const auto& lv : coeffs.levels()) {
    basis.for_each_nonzero_derivative(
      lv.level, x, lv.k_min, lv.k_max(), [&](long k, double v) {
        acc += lv.values[static_cast<std::size_t>(k - lv.k_min)] * v;
      });
  }
  return acc;
}

/// ||x||_{M(w)} = max_j max_{k in K_j} |x_{j,k}| / w_j over the stored levels.
inline double multiscale_norm(const MultiScaleCoeffs& coeffs,
                              const WeightSequence& w)
{
  double best = 0.0;
  for (const auto& lv : coeffs.levels()) {
    const double wj = w(lv.level);
    for (double v : lv.values) {
      best = std::max(best, std::abs(v) / wj);
    }
  }
  return best;
}

/// Equispaced grid of `points` nodes on [a, b], endpoints included.
inline std::vector<double> linspace(double a, double b, int points)
{
  if (points < 2) {
    throw DomainError("linspace: need at least 2 points");
  }
  std::vector<double> x(static_cast<std::size_t>(points));
  const double step = (b - a) / (points - 1);
  for (int i = 0; i < points; ++i) {
    x[i] = a + step * i;
  }
  x.back() = b;
  return x;
}

/// max |synthesize| over an equispaced grid on [a, b]. This is a lower bound
/// for the true sup norm; 4096 points resolve levels up to ~10 on unit
/// intervals.
inline double sup_norm_on_interval(const MultiScaleCoeffs& coeffs,
                                   double a,
                                   double b,
                                   int grid_points = 4096)
{
  double best = 0.0;
  for (double x : linspace(a, b, grid_points)) {
    best = std::max(best, std::abs(synthesize(coeffs, x)));
  }
  return best;
}

/// ||sum_k |psi(. - k)| ||_inf (scaling function when scaling = true),
/// the constant that converts a level-wise coefficient maximum into a
/// sup-norm bound: ||sum_k c_k psi_{j,k}||_inf <= 2^{j/2} L max_k |c_k|.
inline double localization_constant(const WaveletBasis& basis, bool scaling)
{
  double best = 0.0;
  const int steps = 1024;
  const double lo = scaling ? basis.phi_support_lo() : basis.psi_support_lo();
  const double hi = scaling ? basis.phi_support_hi() : basis.psi_support_hi();
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    double acc = 0.0;
    for (long k = static_cast<long>(std::floor(t - hi));
         k <= static_cast<long>(std::ceil(t - lo));
         ++k) {
      acc += std::abs(scaling ? basis.phi(t - k) : basis.psi(t - k));
    }
    best = std::max(best, acc);
  }
  return best;
}

} // namespace mcband
