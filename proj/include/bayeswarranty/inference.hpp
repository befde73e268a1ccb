#pragma once

// Censored log-likelihood, maximum-likelihood fitting and the Fisher
// information used to scale the posterior sampler.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayeswarranty/model.hpp"
#include "bayeswarranty/quadrature.hpp"
#include "bayeswarranty/simplex.hpp"
#include "bayeswarranty/transform.hpp"

namespace bw {

using Vector5 = Eigen::Matrix<double, 5, 1>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;

struct Observation {
  double t = 0.0;
  double u = 0.0;
  bool failed = false;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Units observed up to the termination thresholds (t0, u0). Censored units
/// are stored at (t0, u0).
struct Dataset {
  std::vector<Observation> observations;
  double t0 = std::numeric_limits<double>::infinity();
  double u0 = std::numeric_limits<double>::infinity();

  [[nodiscard]] std::size_t size() const { return observations.size(); }

  [[nodiscard]] std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(
        observations.begin(), observations.end(), [](const Observation& o) { return o.failed; }));
  }

  [[nodiscard]] std::size_t censored() const { return size() - failures(); }

  void validate() const {
    if (!(t0 > 0) || !(u0 > 0)) throw std::invalid_argument("termination thresholds must be positive");
    if (failures() == 0) {
      throw std::invalid_argument("dataset has no failures; the likelihood is not identifiable");
    }
    for (std::size_t i = 0; i < observations.size(); ++i) {
      const auto& o = observations[i];
      if (!o.failed) continue;
      if (!(o.t > 0) || !(o.u > 0) || !(o.t < t0) || !(o.u < u0) || !std::isfinite(o.t) ||
          !std::isfinite(o.u)) {
        throw std::invalid_argument("failure record " + std::to_string(i) +
                                    " lies outside the open observation window");
      }
    }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Sum of log f over failures plus (n - d) log R(t0, u0). Returns -infinity
/// when some failure has zero density instead of throwing.
inline double log_likelihood(const Dataset& data, const ParamVector& psi) {
  psi.validate();
  double ll = 0.0;
  std::size_t censored = 0;
  for (const auto& o : data.observations) {
    if (!o.failed) {
      ++censored;
      continue;
    }
    const double lf = log_joint_pdf({o.t, o.u}, psi);
    if (lf == kNegInf || std::isnan(lf)) return kNegInf;
    ll += lf;
  }
  if (censored > 0) {
    ll += static_cast<double>(censored) * log_joint_reliability({data.t0, data.u0}, psi);
  }
  return ll;
}

// --- finite differences ------------------------------------------------------

namespace detail {

inline double fd_step(double x, double rel) { return rel * std::max(1.0, std::abs(x)); }

// Central differences in psi; the theta coordinate falls back to a
// second-order one-sided stencil when theta + h would leave (0, 1].
template <class F>
Vector5 fd_gradient(F&& fn, const ParamVector& psi, double rel) {
  const auto base = psi.to_array();
  Vector5 g;
  for (std::size_t j = 0; j < 5; ++j) {
    const double h = fd_step(base[j], rel);
    auto at = [&](double delta) {
      auto a = base;
      a[j] += delta;
      return fn(ParamVector::from_array(a));
    };
    if (j == 4 && base[j] + h > 1.0) {
      g(static_cast<Eigen::Index>(j)) = (3.0 * fn(psi) - 4.0 * at(-h) + at(-2.0 * h)) / (2.0 * h);
    } else {
      g(static_cast<Eigen::Index>(j)) = (at(h) - at(-h)) / (2.0 * h);
    }
  }
  return g;
}

template <class F>
Matrix5 fd_hessian(F&& fn, const ParamVector& psi, double rel) {
  auto base = psi.to_array();
  // Shift theta inward so the four-point stencil stays inside (0, 1].
  const double h_theta = fd_step(base[4], rel);
  if (base[4] + h_theta > 1.0) base[4] = 1.0 - h_theta;
  auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
    auto a = base;
    a[i] += di;
    a[j] += dj;
    return fn(ParamVector::from_array(a));
  };
  Matrix5 h;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = i; j < 5; ++j) {
      const double hi = fd_step(base[i], rel);
      const double hj = fd_step(base[j], rel);
      const double v =
          (at(i, hi, j, hj) - at(i, hi, j, -hj) - at(i, -hi, j, hj) + at(i, -hi, j, -hj)) /
          (4.0 * hi * hj);
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return h;
}

}  // namespace detail

inline constexpr double kScoreRelStep = 1e-5;
inline constexpr double kHessianRelStep = 1e-4;

/// Gradient of log f(t,u | psi) with respect to psi.
inline Vector5 score_density(const LifePoint& p, const ParamVector& psi) {
  return detail::fd_gradient([&](const ParamVector& q) { return log_joint_pdf(p, q); }, psi,
                             kScoreRelStep);
}

/// Gradient of log R(t0,u0 | psi) with respect to psi.
inline Vector5 score_survival(const LifePoint& p, const ParamVector& psi) {
  return detail::fd_gradient([&](const ParamVector& q) { return log_joint_reliability(p, q); },
                             psi, kScoreRelStep);
}

/// Score of one observation under the censored model.
inline Vector5 score_observation(const Observation& o, double t0, double u0,
                                 const ParamVector& psi) {
  return o.failed ? score_density({o.t, o.u}, psi) : score_survival({t0, u0}, psi);
}

// --- Fisher information --------------------------------------------------------

struct QuadratureError : std::runtime_error {
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_tolerance(achieved) {}
  double achieved_tolerance;
};

/// Probability mass attached to a censored unit.
enum class CensoringTerm {
  kSurvivalCorner,       // R(t0, u0), as in the likelihood above
  kRectangleComplement,  // 1 - P(T < t0, U < u0), the mass of the actual censoring event
};

struct FisherOptions {
  std::size_t nodes = 64;
  std::size_t check_nodes = 96;
  std::size_t max_nodes = 768;  // refinement doubles the rule up to this size
  double tolerance = 1e-5;      // relative to the largest entry
  CensoringTerm censoring = CensoringTerm::kSurvivalCorner;
};

namespace detail {

// Integrates g(t,u) f(t,u) over [0,t0) x [0,u0) for one parameter vector.
//
// Coordinates: with x = (t/eta_t)^(lambda_t/theta), y = (u/eta_u)^(lambda_u/theta),
// s = x + y, v = s^theta and w = x/s, the measure f dt du becomes
// e^-v (theta v + 1 - theta) dv dw on (0, inf) x (0, 1), with the window
// mapped to v <= min((x0/w)^theta, (y0/(1-w))^theta). The w range is split at
// the kink w* = x0/(x0+y0); cubic grading absorbs the log singularities of
// the score at w in {0, 1} and v = 0. Infinite windows are truncated at
// v = kMaxHazard, where the remaining mass is below 1e-24.
inline constexpr double kMaxHazard = 60.0;

template <class G>
void integrate_window(const ParamVector& psi, double t0, double u0, std::size_t nodes, G&& g) {
  const double th = psi.theta;
  const double log_x0 = std::isfinite(t0) ? (psi.lambda_t / th) * (std::log(t0) - std::log(psi.eta_t))
                                          : std::numeric_limits<double>::infinity();
  const double log_y0 = std::isfinite(u0) ? (psi.lambda_u / th) * (std::log(u0) - std::log(psi.eta_u))
                                          : std::numeric_limits<double>::infinity();
  double w_split = 0.5;
  if (std::isfinite(log_x0) || std::isfinite(log_y0)) w_split = logistic(log_x0 - log_y0);

  const auto& rule = GaussLegendre::cached(nodes);
  for (int panel = 0; panel < 2; ++panel) {
    const double width = panel == 0 ? w_split : 1.0 - w_split;
    if (!(width > 0)) continue;
    for (std::size_t i = 0; i < nodes; ++i) {
      const double xi = 0.5 * (1.0 + rule.nodes()[i]);
      const double xi3 = xi * xi * xi;
      const double w = panel == 0 ? w_split * xi3 : 1.0 - width * xi3;
      const double log_w = std::log(w);
      const double log_1mw = std::log1p(-w);
      const double wt_w = 0.5 * rule.weights()[i] * width * 3.0 * xi * xi;
      const double log_vmax = th * std::min(log_x0 - log_w, log_y0 - log_1mw);
      const double v_max = log_vmax > std::log(kMaxHazard) ? kMaxHazard : std::exp(log_vmax);
      for (std::size_t j = 0; j < nodes; ++j) {
        const double rho = 0.5 * (1.0 + rule.nodes()[j]);
        const double v = v_max * rho * rho * rho;
        const double wt = wt_w * 0.5 * rule.weights()[j] * v_max * 3.0 * rho * rho *
                          std::exp(-v) * (th * v + 1.0 - th);
        if (!(wt > 0)) continue;
        const double log_s = std::log(v) / th;
        const double t = psi.eta_t * std::exp((th / psi.lambda_t) * (log_s + log_w));
        const double u = psi.eta_u * std::exp((th / psi.lambda_u) * (log_s + log_1mw));
        if (!(t > 0) || !(u > 0)) continue;
        g(t, u, wt);
      }
    }
  }
}

// Single-unit score moments: first = E[score], second = E[score score^T].
struct ScoreMoments {
  Vector5 first = Vector5::Zero();
  Matrix5 second = Matrix5::Zero();
};

inline ScoreMoments score_moments(const ParamVector& psi, double t0, double u0,
                                  std::size_t nodes, CensoringTerm censoring) {
  ScoreMoments m;
  integrate_window(psi, t0, u0, nodes, [&](double t, double u, double wt) {
    const Vector5 s = score_density({t, u}, psi);
    m.first += wt * s;
    m.second += wt * (s * s.transpose());
  });
  if (std::isfinite(t0) && std::isfinite(u0)) {
    double mass = 0.0;
    Vector5 sc;
    if (censoring == CensoringTerm::kSurvivalCorner) {
      mass = joint_reliability({t0, u0}, psi);
      sc = score_survival({t0, u0}, psi);
    } else {
      auto log_mass = [&](const ParamVector& q) {
        return std::log1p(-rectangle_probability({t0, u0}, q));
      };
      mass = 1.0 - rectangle_probability({t0, u0}, psi);
      sc = fd_gradient(log_mass, psi, kScoreRelStep);
    }
    if (mass > 0) {
      m.first += mass * sc;
      m.second += mass * (sc * sc.transpose());
    }
  }
  return m;
}

inline double relative_change(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double scale) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(scale, 1e-300);
}

// Score moments at opt.nodes, checked against opt.check_nodes. On
// disagreement the rule is doubled until two successive rules agree or
// max_nodes is reached. `change` measures the disagreement of two results.
template <class Change>
ScoreMoments refined_moments(const ParamVector& psi, double t0, double u0, const FisherOptions& opt,
                             Change&& change, const char* what) {
  auto coarse = score_moments(psi, t0, u0, opt.nodes, opt.censoring);
  if (opt.check_nodes == 0) return coarse;
  std::size_t m = opt.check_nodes;
  for (bool first = true;; first = false) {
    auto fine = score_moments(psi, t0, u0, m, opt.censoring);
    const double diff = change(coarse, fine);
    if (diff <= opt.tolerance) return first ? coarse : fine;
    if (2 * m > opt.max_nodes || !std::isfinite(diff)) {
      throw QuadratureError(std::string(what) + ": quadrature refinement changed the result by " +
                                std::to_string(diff) + " (relative)",
                            diff);
    }
    coarse = std::move(fine);
    m *= 2;
  }
}

}  // namespace detail

/// Expected Fisher information for n units censored at (t0, u0):
///   n [ int_0^t0 int_0^u0 s s^T f dt du + R(t0,u0) s_c s_c^T ].
/// Infinite thresholds mean no censoring. Throws QuadratureError when the
/// rule cannot be refined to tolerance within max_nodes.
inline Matrix5 fisher_information(const ParamVector& psi, double t0, double u0, std::size_t n,
                                  const FisherOptions& opt = {}) {
  psi.validate();
  if (!(t0 > 0) || !(u0 > 0)) throw std::invalid_argument("thresholds must be positive");
  if (n == 0) throw std::invalid_argument("fisher_information needs n >= 1");
  const auto mom = detail::refined_moments(
      psi, t0, u0, opt,
      [](const auto& a, const auto& b) {
        return detail::relative_change(a.second, b.second, b.second.cwiseAbs().maxCoeff());
      },
      "fisher_information");
  Matrix5 info = static_cast<double>(n) * mom.second;
  return 0.5 * (info + info.transpose());
}

/// Expected single-unit score under the same integration scheme.
inline Vector5 expected_score(const ParamVector& psi, double t0, double u0,
                              const FisherOptions& opt = {}) {
  psi.validate();
  if (!(t0 > 0) || !(u0 > 0)) throw std::invalid_argument("thresholds must be positive");
  // Scaled by the score second moment: the expected score itself may be ~0.
  const auto mom = detail::refined_moments(
      psi, t0, u0, opt,
      [](const auto& a, const auto& b) {
        return detail::relative_change(a.first, b.first, std::sqrt(b.second.diagonal().cwiseAbs().maxCoeff()));
      },
      "expected_score");
  return mom.first;
}

// --- maximum likelihood --------------------------------------------------------

struct MleResult {
  ParamVector psi_hat;
  std::optional<std::array<double, 5>> std_errors;  // empty when the Hessian is singular
  double log_lik = kNegInf;
  bool converged = false;
  std::size_t iterations = 0;
};

struct MleOptions {
  double x_tol = 1e-9;
  std::size_t max_iterations = 5000;
  std::size_t max_restarts = 8;  // simplex restarts from the incumbent until no gain
};

namespace detail {

// Method-of-moments Weibull (eta, lambda) from a sample.
inline std::pair<double, double> weibull_moments_fit(const std::vector<double>& x) {
  if (x.size() < 2) throw std::invalid_argument("moment fit needs at least two values");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size() - 1);
  const double cv = std::sqrt(var) / mean;
  auto cv_of = [](double k) {
    const double g1 = std::tgamma(1.0 + 1.0 / k);
    const double g2 = std::tgamma(1.0 + 2.0 / k);
    return std::sqrt(std::max(0.0, g2 / (g1 * g1) - 1.0));
  };
  // cv is decreasing in k.
  double lo = 0.05, hi = 50.0;
  if (cv >= cv_of(lo)) {
    hi = lo;
  } else if (cv <= cv_of(hi)) {
    lo = hi;
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = std::sqrt(lo * hi);
      (cv_of(mid) > cv ? lo : hi) = mid;
    }
  }
  const double k = 0.5 * (lo + hi);
  return {mean / std::tgamma(1.0 + 1.0 / k), k};
}

}  // namespace detail

/// Marginal moment fits on the failure records with theta = 0.5.
inline ParamVector default_initial_guess(const Dataset& data) {
  std::vector<double> ts, us;
  for (const auto& o : data.observations) {
    if (!o.failed) continue;
    ts.push_back(o.t);
    us.push_back(o.u);
  }
  const auto [et, lt] = detail::weibull_moments_fit(ts);
  const auto [eu, lu] = detail::weibull_moments_fit(us);
  return {et, lt, eu, lu, 0.5};
}

/// Observed-information standard errors at psi.
inline std::optional<std::array<double, 5>> observed_std_errors(const Dataset& data,
                                                               const ParamVector& psi) {
  const Matrix5 h = detail::fd_hessian(
      [&](const ParamVector& q) { return log_likelihood(data, q); }, psi, kHessianRelStep);
  if (!h.allFinite()) return std::nullopt;
  const Matrix5 info = -h;
  Eigen::LDLT<Matrix5> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
  const Matrix5 cov = ldlt.solve(Matrix5::Identity());
  std::array<double, 5> se{};
  for (Eigen::Index i = 0; i < 5; ++i) {
    if (!(cov(i, i) > 0) || !std::isfinite(cov(i, i))) return std::nullopt;
    se[static_cast<std::size_t>(i)] = std::sqrt(cov(i, i));
  }
  return se;
}

/// Maximize the censored log-likelihood by simplex search on the log/logit
/// coordinates, restarting from the incumbent until the gain vanishes.
inline MleResult fit_mle(const Dataset& data, const ParamVector& init, const MleOptions& opt = {}) {
  data.validate();
  init.validate();
  auto objective = [&](const std::vector<double>& z) {
    ZVector a{};
    std::copy(z.begin(), z.end(), a.begin());
    const ParamVector psi = from_unconstrained(a);
    if (!psi.valid()) return std::numeric_limits<double>::infinity();
    return -log_likelihood(data, psi);
  };
  const ZVector z0 = to_unconstrained(init);
  std::vector<double> z(z0.begin(), z0.end());
  SimplexOptions so;
  so.x_tol = opt.x_tol;
  so.max_iterations = opt.max_iterations;
  so.initial_step.assign(5, 0.2);

  MleResult out;
  double best = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (std::size_t r = 0; r <= opt.max_restarts; ++r) {
    const auto res = nelder_mead(objective, z, so);
    out.iterations += res.iterations;
    converged = res.converged;
    const bool improved = res.value < best - 1e-12;
    if (res.value <= best) {
      best = res.value;
      z = res.x;
    }
    if (!improved) break;
    so.initial_step.assign(5, 0.05);
  }
  ZVector zf{};
  std::copy(z.begin(), z.end(), zf.begin());
  out.psi_hat = from_unconstrained(zf);
  out.log_lik = -best;
  out.converged = converged && std::isfinite(best);
  if (out.converged) out.std_errors = observed_std_errors(data, out.psi_hat);
  return out;
}

inline MleResult fit_mle(const Dataset& data) { return fit_mle(data, default_initial_guess(data)); }

}  // namespace bw
