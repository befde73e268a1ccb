#pragma once

// Exact sampling of (T, U) from the bivariate Weibull model.
//
// X = (T/eta_t)^(lambda_t/theta) and Y = (U/eta_u)^(lambda_u/theta) have joint
// survival exp(-(x+y)^theta). Writing V = (X+Y)^theta and W = X/(X+Y), W is
// uniform on (0,1) and independent of V, whose density is the mixture
// theta * Gamma(2,1) + (1 - theta) * Exp(1).

#include <cmath>
#include <random>
#include <vector>

#include "bayeswarranty/inference.hpp"
#include "bayeswarranty/model.hpp"

namespace bw {

template <class Rng>
LifePoint sample_lifetime(const ParamVector& psi, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  double v = expo(rng);
  if (unif(rng) < psi.theta) v += expo(rng);
  double w = unif(rng);
  while (w <= 0.0) w = unif(rng);
  const double log_s = std::log(v) / psi.theta;
  return {psi.eta_t * std::exp((psi.theta / psi.lambda_t) * (log_s + std::log(w))),
          psi.eta_u * std::exp((psi.theta / psi.lambda_u) * (log_s + std::log1p(-w)))};
}

/// n simulated units censored at (t0, u0): failures inside the open window
/// keep their coordinates, everything else is stored at (t0, u0).
template <class Rng>
Dataset simulate_dataset(const ParamVector& psi, std::size_t n, double t0, double u0, Rng& rng) {
  Dataset d;
  d.t0 = t0;
  d.u0 = u0;
  d.observations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LifePoint p = sample_lifetime(psi, rng);
    if (p.t < t0 && p.u < u0 && p.t > 0 && p.u > 0) {
      d.observations.push_back({p.t, p.u, true});
    } else {
      d.observations.push_back({t0, u0, false});
    }
  }
  return d;
}

}  // namespace bw
