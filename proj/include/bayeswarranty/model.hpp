#pragma once

// Bivariate Weibull lifetime model built with the multivariate-extension
// (Gumbel survival copula) construction:
//
//   R(t,u) = exp{ -[ (t/eta_t)^(lambda_t/theta) + (u/eta_u)^(lambda_u/theta) ]^theta }
//
// All evaluations go through the log cumulative hazards so that the large
// exponents lambda/theta (around 30 for small theta) never overflow.

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bw {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Which marginal lifetime scale a quantity refers to.
enum class Scale { kAge, kUsage };

inline const char* to_string(Scale s) { return s == Scale::kAge ? "age" : "usage"; }

/// Model parameters in fixed order (eta_t, lambda_t, eta_u, lambda_u, theta).
struct ParamVector {
  double eta_t = 1.0;
  double lambda_t = 1.0;
  double eta_u = 1.0;
  double lambda_u = 1.0;
  double theta = 1.0;

  static constexpr std::size_t kSize = 5;
  static constexpr std::array<const char*, kSize> kNames = {"eta_t", "lambda_t", "eta_u",
                                                            "lambda_u", "theta"};

  [[nodiscard]] bool valid() const {
    return std::isfinite(eta_t) && std::isfinite(lambda_t) && std::isfinite(eta_u) &&
           std::isfinite(lambda_u) && eta_t > 0 && lambda_t > 0 && eta_u > 0 && lambda_u > 0 &&
           theta > 0 && theta <= 1;
  }

  void validate() const {
    if (!valid()) {
      throw std::domain_error("invalid parameter vector (" + std::to_string(eta_t) + ", " +
                              std::to_string(lambda_t) + ", " + std::to_string(eta_u) + ", " +
                              std::to_string(lambda_u) + ", " + std::to_string(theta) + ")");
    }
  }

  [[nodiscard]] std::array<double, kSize> to_array() const {
    return {eta_t, lambda_t, eta_u, lambda_u, theta};
  }

  static ParamVector from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }

  [[nodiscard]] double operator[](std::size_t i) const { return to_array().at(i); }

  [[nodiscard]] double scale_of(Scale s) const { return s == Scale::kAge ? eta_t : eta_u; }
  [[nodiscard]] double shape_of(Scale s) const { return s == Scale::kAge ? lambda_t : lambda_u; }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

/// A point in the (age, usage) plane.
struct LifePoint {
  double t = 0.0;
  double u = 0.0;
};

namespace detail {

inline void check_point(const LifePoint& p) {
  if (!std::isfinite(p.t) || !std::isfinite(p.u)) {
    throw std::domain_error("life point must be finite");
  }
  if (p.t < 0 || p.u < 0) {
    throw std::domain_error("life point must be nonnegative");
  }
}

// log((x/eta)^(lambda/theta)); -inf at x = 0.
inline double log_power_hazard(double x, double eta, double lambda, double theta) {
  if (x == 0.0) return kNegInf;
  return (lambda / theta) * (std::log(x) - std::log(eta));
}

inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// log S where S = (t/eta_t)^(lambda_t/theta) + (u/eta_u)^(lambda_u/theta).
inline double log_combined_hazard(const LifePoint& p, const ParamVector& psi) {
  return log_add_exp(log_power_hazard(p.t, psi.eta_t, psi.lambda_t, psi.theta),
                     log_power_hazard(p.u, psi.eta_u, psi.lambda_u, psi.theta));
}

}  // namespace detail

/// Joint cumulative hazard S^theta; log R = -cumulative_hazard.
inline double joint_cumulative_hazard(const LifePoint& p, const ParamVector& psi) {
  const double log_s = detail::log_combined_hazard(p, psi);
  if (log_s == kNegInf) return 0.0;
  return std::exp(psi.theta * log_s);
}

/// R(t,u) = P(T >= t, U >= u).
inline double joint_reliability(const LifePoint& p, const ParamVector& psi) {
  psi.validate();
  detail::check_point(p);
  return std::exp(-joint_cumulative_hazard(p, psi));
}

/// log R(t,u); exact even where R underflows.
inline double log_joint_reliability(const LifePoint& p, const ParamVector& psi) {
  psi.validate();
  detail::check_point(p);
  return -joint_cumulative_hazard(p, psi);
}

/// F(t,u) = 1 - R(t,u). This is the complement of the joint survival
/// function, not P(T <= t, U <= u); see rectangle_probability for the latter.
inline double joint_cdf(const LifePoint& p, const ParamVector& psi) {
  psi.validate();
  detail::check_point(p);
  return -std::expm1(-joint_cumulative_hazard(p, psi));
}

/// Log of the joint density on the open quadrant.
///
/// On an axis the density is 0 when the matching exponent lambda/theta - 1 is
/// positive and finite when it is zero; a negative exponent is a singular
/// boundary and raises std::domain_error, as does the origin.
inline double log_joint_pdf(const LifePoint& p, const ParamVector& psi) {
  psi.validate();
  detail::check_point(p);
  const double a = psi.lambda_t / psi.theta;
  const double b = psi.lambda_u / psi.theta;
  if (p.t == 0.0 && p.u == 0.0) {
    throw std::domain_error("joint density is undefined at the origin");
  }
  auto log_edge_term = [](double x, double eta, double expo) {
    // (expo - 1) * log(x) - expo * log(eta), with the x = 0 limit.
    if (x > 0) return (expo - 1.0) * std::log(x) - expo * std::log(eta);
    if (expo > 1.0) return kNegInf;
    if (expo == 1.0) return -std::log(eta);
    throw std::domain_error("joint density is singular on this boundary");
  };
  const double edge_t = log_edge_term(p.t, psi.eta_t, a);
  const double edge_u = log_edge_term(p.u, psi.eta_u, b);
  if (edge_t == kNegInf || edge_u == kNegInf) return kNegInf;

  const double log_s = detail::log_combined_hazard(p, psi);
  if (log_s == std::numeric_limits<double>::infinity()) return kNegInf;
  const double s_theta = std::exp(psi.theta * log_s);
  if (std::isinf(s_theta)) return kNegInf;
  return std::log(psi.lambda_t) + std::log(psi.lambda_u) + edge_t + edge_u +
         (psi.theta - 2.0) * log_s + std::log(s_theta + (1.0 - psi.theta) / psi.theta) - s_theta;
}

/// f(t,u) = d^2 R / dt du.
inline double joint_pdf(const LifePoint& p, const ParamVector& psi) {
  return std::exp(log_joint_pdf(p, psi));
}

/// P(T <= t, U <= u) = 1 - R(t,0) - R(0,u) + R(t,u).
inline double rectangle_probability(const LifePoint& p, const ParamVector& psi) {
  const double r_t = joint_reliability({p.t, 0.0}, psi);
  const double r_u = joint_reliability({0.0, p.u}, psi);
  const double r_tu = joint_reliability(p, psi);
  return std::max(0.0, 1.0 - r_t - r_u + r_tu);
}

/// Weibull marginal CDF of the selected scale.
inline double marginal_cdf(Scale s, double x, const ParamVector& psi) {
  if (x <= 0) return 0.0;
  return -std::expm1(-std::pow(x / psi.scale_of(s), psi.shape_of(s)));
}

/// Weibull marginal density of the selected scale.
inline double marginal_pdf(Scale s, double x, const ParamVector& psi) {
  if (x <= 0) return 0.0;
  const double eta = psi.scale_of(s);
  const double lam = psi.shape_of(s);
  const double z = std::pow(x / eta, lam);
  return lam / x * z * std::exp(-z);
}

/// x such that the marginal CDF of the selected scale equals prob.
inline double marginal_quantile(Scale s, double prob, const ParamVector& psi) {
  psi.validate();
  if (!(prob > 0.0 && prob < 1.0)) {
    throw std::domain_error("quantile probability must lie in (0, 1)");
  }
  return psi.scale_of(s) * std::pow(-std::log1p(-prob), 1.0 / psi.shape_of(s));
}

}  // namespace bw
