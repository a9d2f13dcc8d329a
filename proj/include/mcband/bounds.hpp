#pragma once

#include "mcband/wavelet.hpp"

#include <cmath>

namespace mcband {

/// int |y - c|^s |psi(y)| dy / [s]!, c the midpoint of supp psi. Bounds the
/// detail coefficients of f in C^s (s < N) by
/// |<f, psi_{j,k}>| <= ||f||_{C^s} m_s 2^{-j(s + 1/2)}.
inline double wavelet_tail_moment(const WaveletBasis& basis, double s)
{
  const double lo = basis.psi_support_lo();
  const double hi = basis.psi_support_hi();
  const double c = 0.5 * (lo + hi);
  const int steps = 1 << 14;
  const double h = (hi - lo) / steps;
  double acc = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double y = lo + (i + 0.5) * h;
    acc += std::pow(std::abs(y - c), s) * std::abs(basis.psi(y)) * h;
  }
  return acc / std::tgamma(std::floor(s) + 1.0);
}

/// Split of the L-infinity radius of a multi-scale band with a C^s cap.
struct LinfBound
{
  double stochastic = 0.0; ///< from the coefficient constraints up to level J
  double bias = 0.0;       ///< from the C^s cap beyond level J
  double radius() const noexcept { return stochastic + bias; }
};

//! Every f with max_k |<f - center, psi_{j,k}>| < r w_j for j <= J and
//! ||f||_{C^s} <= cap satisfies ||f - center||_inf <= radius() on [a, b]:
//!
//!   stochastic = r sum_{j <= J} 2^{j/2} Lambda_j w_j
//!   bias       = cap Lambda_psi m_s 2^{-(J+1)s} / (1 - 2^{-s})
//!
//! with Lambda_j = ||sum_k |psi(. - k)|||_inf (phi on the scaling level).
inline LinfBound linf_bound(const WaveletBasis& basis,
                            int J,
                            double multiscale_radius,
                            const WeightSequence& w,
                            double s,
                            double cap)
{
  if (s <= 0.0) {
    throw DomainError("linf_bound: s must be > 0");
  }
  if (std::floor(s) >= basis.order()) {
    throw ConfigError("order", "L-infinity bound needs more vanishing moments than s");
  }
  const double lambda_phi = localization_constant(basis, true);
  const double lambda_psi = localization_constant(basis, false);
  LinfBound out;
  for (int j : levels_up_to(basis, J)) {
    const double lambda = j == kScalingLevel ? lambda_phi : lambda_psi;
    out.stochastic += std::sqrt(basis.dilation(j)) * lambda * w(j);
  }
  out.stochastic *= multiscale_radius;
  out.bias = cap * lambda_psi * wavelet_tail_moment(basis, s) *
             std::pow(2.0, -(J + 1) * s) / (1.0 - std::pow(2.0, -s));
  return out;
}

} // namespace mcband
