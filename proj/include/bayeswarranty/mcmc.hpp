#pragma once

// Priors, posterior sampling by random-walk Metropolis-Hastings on the
// log/logit coordinates, and posterior-predictive summaries.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayeswarranty/inference.hpp"
#include "bayeswarranty/model.hpp"
#include "bayeswarranty/quadrature.hpp"
#include "bayeswarranty/transform.hpp"

namespace bw {

/// Gamma(a_j, b_j) (rate b_j) on eta_t, lambda_t, eta_u, lambda_u and
/// Beta(a_5, b_5) on theta.
struct PriorHyper {
  std::array<double, 5> a{1, 1, 1, 1, 1};
  std::array<double, 5> b{1, 1, 1, 1, 1};

  void validate() const {
    for (std::size_t j = 0; j < 5; ++j) {
      if (!(a[j] > 0) || !(b[j] > 0) || !std::isfinite(a[j]) || !std::isfinite(b[j])) {
        throw std::invalid_argument("prior hyperparameters must be positive and finite");
      }
    }
  }
};

/// Method-of-moments hyperparameters: Gamma means and variances for the four
/// positive parameters, Beta moments for theta.
inline PriorHyper elicit_hyperparams(const ParamVector& mean, const std::array<double, 5>& variances) {
  mean.validate();
  PriorHyper h;
  const auto m = mean.to_array();
  for (std::size_t j = 0; j < 5; ++j) {
    if (!(variances[j] > 0)) throw std::invalid_argument("prior variances must be positive");
  }
  for (std::size_t j = 0; j < 4; ++j) {
    h.a[j] = m[j] * m[j] / variances[j];
    h.b[j] = m[j] / variances[j];
  }
  const double mt = m[4];
  const double vt = variances[4];
  if (!(mt < 1.0) || !(mt * (1.0 - mt) > vt)) {
    throw std::invalid_argument("infeasible beta moments: need mean (1 - mean) > variance");
  }
  const double k = mt * (1.0 - mt) / vt - 1.0;
  h.a[4] = mt * k;
  h.b[4] = (1.0 - mt) * k;
  return h;
}

/// Log prior density; -infinity outside the support.
inline double log_prior(const ParamVector& psi, const PriorHyper& hyper) {
  const auto x = psi.to_array();
  double lp = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    if (!(x[j] > 0)) return kNegInf;
    const double a = hyper.a[j];
    const double b = hyper.b[j];
    lp += a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(x[j]) - b * x[j];
  }
  const double th = x[4];
  const double a = hyper.a[4];
  const double b = hyper.b[4];
  if (!(th > 0) || th > 1) return kNegInf;
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  auto term = [](double expo, double x) {
    // (expo) * log(x) with 0 * log 0 = 0.
    if (expo == 0.0) return 0.0;
    return expo * std::log(x);
  };
  lp += term(a - 1.0, th) + term(b - 1.0, 1.0 - th) - log_beta;
  if (std::isnan(lp)) return kNegInf;
  return lp;
}

inline double log_posterior(const Dataset& data, const PriorHyper& hyper, const ParamVector& psi) {
  if (!psi.valid()) return kNegInf;
  const double lp = log_prior(psi, hyper);
  if (lp == kNegInf) return kNegInf;
  return lp + log_likelihood(data, psi);
}

// --- sampler -------------------------------------------------------------------

struct McmcConfig {
  std::size_t n_iter = 50000;
  std::size_t burn_in = 10000;
  std::uint64_t seed = 20240601;
  double proposal_scale = 1.0;
  double min_acceptance = 0.01;
  double max_acceptance = 0.95;
  std::size_t min_guard_draws = 100;  // shorter runs skip the acceptance check

  void validate() const {
    if (!(burn_in < n_iter)) throw std::invalid_argument("burn_in must be smaller than n_iter");
    if (!(proposal_scale > 0)) throw std::invalid_argument("proposal_scale must be positive");
  }
};

/// Output of a random-walk run in the sampler's own coordinates.
struct RandomWalkRun {
  std::vector<Eigen::VectorXd> draws;  // post burn-in
  double acceptance_rate = 0.0;        // post burn-in
};

/// Random-walk Metropolis with Gaussian increments L * N(0, I). The target
/// density is given on the sampling coordinates (any Jacobian already folded
/// in by the caller). Deterministic for a given seed.
template <class LogTarget>
RandomWalkRun random_walk_metropolis(LogTarget&& log_target, const Eigen::VectorXd& x0,
                                     const Eigen::MatrixXd& proposal_chol, std::size_t n_iter,
                                     std::size_t burn_in, std::uint64_t seed) {
  const Eigen::Index d = x0.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  RandomWalkRun run;
  run.draws.reserve(n_iter - burn_in);
  Eigen::VectorXd x = x0;
  double cur = log_target(x);
  if (!std::isfinite(cur)) throw std::invalid_argument("initial state has zero target density");
  std::size_t accepted = 0;
  Eigen::VectorXd step(d);
  for (std::size_t i = 0; i < n_iter; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) step(k) = normal(rng);
    const Eigen::VectorXd prop = x + proposal_chol * step;
    const double val = log_target(prop);
    const double log_u = std::log(unif(rng));
    if (std::isfinite(val) && log_u < val - cur) {
      x = prop;
      cur = val;
      if (i >= burn_in) ++accepted;
    }
    if (i >= burn_in) run.draws.push_back(x);
  }
  run.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(n_iter - burn_in);
  return run;
}

struct PosteriorChain {
  std::vector<ParamVector> draws;
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_iter = 0;
  std::size_t burn_in = 0;

  [[nodiscard]] std::size_t size() const { return draws.size(); }
  [[nodiscard]] bool empty() const { return draws.empty(); }
};

struct McmcError : std::runtime_error {
  McmcError(const std::string& what, PosteriorChain c)
      : std::runtime_error(what), chain(std::move(c)) {}
  PosteriorChain chain;
};

/// Proposal covariance on the z coordinates: proposal_scale * D I^-1 D with
/// D = diag(dz/dpsi), i.e. the delta-method image of the inverse information.
inline Eigen::MatrixXd transformed_proposal_covariance(const Matrix5& info, const ParamVector& psi,
                                                       double proposal_scale) {
  Matrix5 m = info;
  Eigen::LLT<Matrix5> llt(m);
  if (llt.info() != Eigen::Success) {
    m += 1e-8 * Matrix5::Identity();
    llt.compute(m);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("Fisher information is not positive definite");
    }
  }
  const Matrix5 cov = llt.solve(Matrix5::Identity());
  const auto jac = jacobian_diagonal(psi);
  Matrix5 dz = Matrix5::Zero();
  for (Eigen::Index j = 0; j < 5; ++j) dz(j, j) = 1.0 / jac[static_cast<std::size_t>(j)];
  Eigen::MatrixXd out = proposal_scale * (dz * cov * dz);
  return 0.5 * (out + out.transpose());
}

/// Posterior sampling for the censored bivariate Weibull model. The proposal
/// is centred at the current transformed state with covariance fixed at the
/// transformed inverse Fisher information at psi0, and the acceptance ratio
/// carries the Jacobian eta_t lambda_t eta_u lambda_u theta (1 - theta).
/// Throws McmcError (carrying the chain) when the post burn-in acceptance
/// rate leaves [min_acceptance, max_acceptance]; runs with fewer than
/// min_guard_draws retained iterations are not checked.
inline PosteriorChain mh_sample(const Dataset& data, const PriorHyper& hyper, const ParamVector& psi0,
                                const McmcConfig& cfg, const FisherOptions& fisher = {}) {
  data.validate();
  hyper.validate();
  psi0.validate();
  cfg.validate();
  const Matrix5 info = fisher_information(psi0, data.t0, data.u0, data.size(), fisher);
  const Eigen::MatrixXd cov = transformed_proposal_covariance(info, psi0, cfg.proposal_scale);
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();

  auto to_psi = [](const Eigen::VectorXd& z) {
    ZVector a{};
    for (std::size_t j = 0; j < 5; ++j) a[j] = z(static_cast<Eigen::Index>(j));
    return from_unconstrained(a);
  };
  auto log_target = [&](const Eigen::VectorXd& z) {
    const ParamVector psi = to_psi(z);
    if (!psi.valid() || !(psi.theta < 1.0)) return kNegInf;
    const double lp = log_posterior(data, hyper, psi);
    if (lp == kNegInf) return kNegInf;
    return lp + log_jacobian(psi);
  };
  const ZVector z0a = to_unconstrained(psi0.theta < 1.0 ? psi0 : ParamVector{psi0.eta_t, psi0.lambda_t, psi0.eta_u, psi0.lambda_u, 1.0 - 1e-6});
  Eigen::VectorXd z0(5);
  for (std::size_t j = 0; j < 5; ++j) z0(static_cast<Eigen::Index>(j)) = z0a[j];

  const auto run = random_walk_metropolis(log_target, z0, chol, cfg.n_iter, cfg.burn_in, cfg.seed);
  PosteriorChain chain;
  chain.acceptance_rate = run.acceptance_rate;
  chain.seed = cfg.seed;
  chain.n_iter = cfg.n_iter;
  chain.burn_in = cfg.burn_in;
  chain.draws.reserve(run.draws.size());
  for (const auto& z : run.draws) {
    const ParamVector psi = to_psi(z);
    if (!psi.valid()) throw std::logic_error("sampler produced an invalid parameter vector");
    chain.draws.push_back(psi);
  }
  const bool guarded = cfg.n_iter - cfg.burn_in >= cfg.min_guard_draws;
  if (guarded && (run.acceptance_rate < cfg.min_acceptance || run.acceptance_rate > cfg.max_acceptance)) {
    throw McmcError("acceptance rate " + std::to_string(run.acceptance_rate) +
                        " outside the allowed range; rescale the proposal",
                    std::move(chain));
  }
  return chain;
}

/// Every k-th draw so that at most max_draws remain (evenly spaced).
inline PosteriorChain thin(const PosteriorChain& chain, std::size_t max_draws) {
  if (max_draws == 0 || chain.size() <= max_draws) return chain;
  PosteriorChain out = chain;
  out.draws.clear();
  const double stride = static_cast<double>(chain.size()) / static_cast<double>(max_draws);
  for (std::size_t i = 0; i < max_draws; ++i) {
    out.draws.push_back(chain.draws[static_cast<std::size_t>(stride * static_cast<double>(i))]);
  }
  return out;
}

inline ParamVector posterior_mean(const PosteriorChain& chain) {
  if (chain.empty()) throw std::invalid_argument("empty chain");
  std::array<std::vector<double>, 5> cols;
  for (const auto& d : chain.draws) {
    const auto a = d.to_array();
    for (std::size_t j = 0; j < 5; ++j) cols[j].push_back(a[j]);
  }
  std::array<double, 5> m{};
  for (std::size_t j = 0; j < 5; ++j) m[j] = pairwise_sum(cols[j]) / static_cast<double>(chain.size());
  return ParamVector::from_array(m);
}

// --- posterior predictive --------------------------------------------------------

namespace detail {
template <class F>
double chain_average(const PosteriorChain& chain, F&& per_draw) {
  if (chain.empty()) throw std::invalid_argument("posterior chain is empty");
  std::vector<double> vals(chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i) vals[i] = per_draw(chain.draws[i]);
  return pairwise_sum(vals) / static_cast<double>(chain.size());
}
}  // namespace detail

inline double predictive_pdf(const LifePoint& p, const PosteriorChain& chain) {
  return detail::chain_average(chain, [&](const ParamVector& psi) { return joint_pdf(p, psi); });
}

inline double predictive_cdf(const LifePoint& p, const PosteriorChain& chain) {
  return detail::chain_average(chain, [&](const ParamVector& psi) { return joint_cdf(p, psi); });
}

/// Root of the chain-averaged marginal CDF by bracketing bisection (absolute
/// tolerance 1e-8 in x).
inline double predictive_quantile(Scale s, double prob, const PosteriorChain& chain) {
  if (!(prob > 0.0 && prob < 1.0)) throw std::domain_error("quantile probability must lie in (0, 1)");
  if (chain.empty()) throw std::invalid_argument("posterior chain is empty");
  std::vector<double> scale(chain.size()), shape(chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i) {
    scale[i] = chain.draws[i].scale_of(s);
    shape[i] = chain.draws[i].shape_of(s);
  }
  std::vector<double> buf(chain.size());
  auto cdf = [&](double x) {
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = -std::expm1(-std::pow(x / scale[i], shape[i]));
    return pairwise_sum(buf) / static_cast<double>(buf.size());
  };
  double lo = 0.0;
  double hi = *std::max_element(scale.begin(), scale.end());
  int expansions = 0;
  while (cdf(hi) < prob) {
    lo = hi;
    hi *= 2.0;
    if (++expansions > 200) throw std::runtime_error("predictive_quantile: failed to bracket the root");
  }
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace bw
