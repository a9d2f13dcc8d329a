#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace testing_support {

/// sup_x |F_n(x) - F(x)|.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf)
{
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({ d, (i + 1) / n - f, f - i / n });
  }
  return d;
}

inline double ks_two_sample(std::vector<double> x, std::vector<double> y)
{
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) {
      ++i;
    }
    while (j < y.size() && y[j] <= v) {
      ++j;
    }
    d = std::max(d, std::abs(i / n - j / m));
  }
  return d;
}

/// Asymptotic 1% critical value of the KS statistic, c(0.01) = 1.628.
inline double ks_critical_1pct(double n, double m = 0.0)
{
  const double eff = m > 0.0 ? n * m / (n + m) : n;
  return 1.628 / std::sqrt(eff);
}

inline double mean(std::span<const double> x)
{
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x)
{
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) {
    acc += (v - m) * (v - m);
  }
  return acc / static_cast<double>(x.size() - 1);
}

} // namespace testing_support
