#pragma once

#include "mcband/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace mcband {

//! Hölder norm on [lo, hi]:
//!
//!   ||f||_{C^s} = sum_{k <= [s]} ||f^{(k)}||_inf
//!                 + sup_{x != y} |f^{([s])}(x) - f^{([s])}(y)| / |x - y|^{s - [s]}
//!
//! For integer s the last term is the oscillation of f^{(s)}.
//!
//! Derivatives are taken by central differences of f on `points` equispaced
//! nodes, or from `derivative` (f') when supplied, which removes one level of
//! differencing. Jumps in the top derivative show up as large difference
//! quotients, which is the intended behaviour for functions outside C^s.
inline double holder_norm(const std::function<double(double)>& f,
                          double s,
                          double lo,
                          double hi,
                          int points = 1025,
                          const std::function<double(double)>& derivative = {})
{
  if (s < 0.0) {
    throw DomainError("holder_norm: s must be >= 0");
  }
  if (!(lo < hi) || points < 5) {
    throw DomainError("holder_norm: need lo < hi and at least 5 points");
  }
  const int top = static_cast<int>(std::floor(s));
  const double frac = s - top;
  const double h = (hi - lo) / (points - 1);

  std::vector<double> x(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    x[i] = lo + h * i;
  }

  auto differentiate = [h](const std::vector<double>& v) {
    const std::size_t m = v.size();
    std::vector<double> d(m);
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) / (2.0 * h);
    for (std::size_t i = 1; i + 1 < m; ++i) {
      d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    return d;
  };
  auto sup_abs = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double e : v) {
      m = std::max(m, std::abs(e));
    }
    return m;
  };

  std::vector<double> current(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    current[i] = f(x[i]);
  }
  double norm = sup_abs(current);
  for (int k = 1; k <= top; ++k) {
    if (k == 1 && derivative) {
      for (int i = 0; i < points; ++i) {
        current[i] = derivative(x[i]);
      }
    } else {
      current = differentiate(current);
    }
    norm += sup_abs(current);
  }

  if (frac == 0.0) {
    const auto [mn, mx] = std::minmax_element(current.begin(), current.end());
    norm += *mx - *mn;
  } else {
    std::vector<double> scale(static_cast<std::size_t>(points));
    for (int lag = 1; lag < points; ++lag) {
      scale[lag] = std::pow(h * lag, -frac);
    }
    double semi = 0.0;
    for (int i = 0; i < points; ++i) {
      for (int j = i + 1; j < points; ++j) {
        const double q = std::abs(current[i] - current[j]) * scale[j - i];
        semi = std::max(semi, q);
      }
    }
    norm += semi;
  }
  return norm;
}

} // namespace mcband
