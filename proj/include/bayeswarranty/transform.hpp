#pragma once

// Unconstrained coordinates for the parameter vector:
// z = (log eta_t, log lambda_t, log eta_u, log lambda_u, logit theta).

#include <array>
#include <cmath>

#include "bayeswarranty/model.hpp"

namespace bw {

using ZVector = std::array<double, ParamVector::kSize>;

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline ZVector to_unconstrained(const ParamVector& psi) {
  return {std::log(psi.eta_t), std::log(psi.lambda_t), std::log(psi.eta_u),
          std::log(psi.lambda_u), logit(psi.theta)};
}

inline ParamVector from_unconstrained(const ZVector& z) {
  return {std::exp(z[0]), std::exp(z[1]), std::exp(z[2]), std::exp(z[3]), logistic(z[4])};
}

/// log |d psi / d z| = log(eta_t lambda_t eta_u lambda_u theta (1 - theta)).
inline double log_jacobian(const ParamVector& psi) {
  return std::log(psi.eta_t) + std::log(psi.lambda_t) + std::log(psi.eta_u) +
         std::log(psi.lambda_u) + std::log(psi.theta) + std::log1p(-psi.theta);
}

/// Diagonal of d psi / d z.
inline ZVector jacobian_diagonal(const ParamVector& psi) {
  return {psi.eta_t, psi.lambda_t, psi.eta_u, psi.lambda_u, psi.theta * (1.0 - psi.theta)};
}

}  // namespace bw
