#pragma once

// Expected-utility maximization over the warranty thresholds and the
// cost-parameter sensitivity scan.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayeswarranty/costs.hpp"
#include "bayeswarranty/mcmc.hpp"
#include "bayeswarranty/parallel.hpp"
#include "bayeswarranty/simplex.hpp"
#include "bayeswarranty/transform.hpp"

namespace bw {

struct OptimResult {
  WarrantyRegion region;
  double utility = 0.0;
  std::size_t iterations = 0;  // summed over restarts
  bool converged = false;
  std::size_t restarts_used = 0;
  std::vector<std::string> boundary;  // degenerate-boundary notes for the optimum
};

struct OptimizerOptions {
  std::size_t n_restarts = 16;
  std::uint64_t seed = 7;
  double x_tol = 1e-6;
  std::size_t max_iterations = 2000;
  double cap_fraction = 0.999;  // x_w2 <= cap_fraction * L
  double z_bound = 10.0;        // |z_k| <= z_bound keeps boundary optima finite
  std::size_t threads = 1;      // restarts in flight
  // Objective evaluation: thinned chain and quadrature for the expected utility.
  std::size_t max_draws = 500;
  CostOptions cost{12, CostMethod::kEdge, CdfReading::kRectangle, false, 1};
};

/// z = (z1, z2, z3, z4) <-> region with x_w2 = cap sigma(z2), x_w1 = x_w2 sigma(z1)
/// (usage analogous with z3, z4); ordering holds by construction.
struct RegionMap {
  double cap_t = 1.0;
  double cap_u = 1.0;

  [[nodiscard]] WarrantyRegion to_region(const std::vector<double>& z) const {
    const double t2 = cap_t * logistic(z[1]);
    const double u2 = cap_u * logistic(z[3]);
    return {t2 * logistic(z[0]), t2, u2 * logistic(z[2]), u2};
  }

  [[nodiscard]] std::vector<double> to_z(const WarrantyRegion& r) const {
    auto clamp = [](double p) { return std::clamp(p, 1e-9, 1.0 - 1e-9); };
    const double f2t = clamp(r.t_w2 / cap_t);
    const double f2u = clamp(r.u_w2 / cap_u);
    const double f1t = r.t_w2 > 0 ? clamp(r.t_w1 / r.t_w2) : 0.5;
    const double f1u = r.u_w2 > 0 ? clamp(r.u_w1 / r.u_w2) : 0.5;
    return {logit(f1t), logit(f2t), logit(f1u), logit(f2u)};
  }
};

namespace detail {

/// Latin-hypercube points in the fraction coordinates (sigma(z)), kept away
/// from the degenerate faces.
inline std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
  std::vector<std::size_t> perm(n);
  for (std::size_t d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = (static_cast<double>(perm[i]) + unif(rng)) / static_cast<double>(n);
      pts[i][d] = 0.02 + 0.96 * p;
    }
  }
  return pts;
}

inline std::vector<std::string> boundary_notes(const std::vector<double>& z, double z_bound) {
  std::vector<std::string> notes;
  const double kEdge = 2.0 * logistic(-z_bound);
  const char* names[2] = {"age", "usage"};
  for (int s = 0; s < 2; ++s) {
    const double ratio = logistic(z[static_cast<std::size_t>(2 * s)]);
    const double outer = logistic(z[static_cast<std::size_t>(2 * s + 1)]);
    if (ratio > 1.0 - kEdge) notes.push_back(std::string(names[s]) + ": x_w1 = x_w2 (FRW only)");
    if (ratio < kEdge) notes.push_back(std::string(names[s]) + ": x_w1 = 0 (PRW only)");
    if (outer > 1.0 - kEdge) notes.push_back(std::string(names[s]) + ": x_w2 at the expected-life cap");
    if (outer < kEdge) notes.push_back(std::string(names[s]) + ": x_w2 = 0 (no coverage)");
  }
  return notes;
}

}  // namespace detail

/// Maximize `objective(region)` over 0 <= t_w1 <= t_w2 <= cap_t and
/// 0 <= u_w1 <= u_w2 <= cap_u by Nelder-Mead on the z coordinates, from
/// `init` (if given) plus Latin-hypercube starts, n_restarts in total.
template <class Objective>
OptimResult maximize_region(Objective&& objective, double cap_t, double cap_u,
                            const std::optional<WarrantyRegion>& init, const OptimizerOptions& opt) {
  if (!(cap_t > 0) || !(cap_u > 0)) throw std::invalid_argument("region caps must be positive");
  if (opt.n_restarts == 0) throw std::invalid_argument("need at least one restart");
  const RegionMap map{cap_t, cap_u};

  std::vector<std::vector<double>> starts;
  if (init) {
    init->validate();
    starts.push_back(map.to_z(*init));
  }
  const std::size_t n_lhs = opt.n_restarts - starts.size();
  for (const auto& p : detail::latin_hypercube(n_lhs, 4, opt.seed)) {
    starts.push_back({logit(p[0]), logit(p[1]), logit(p[2]), logit(p[3])});
  }

  auto f = [&](const std::vector<double>& z) {
    for (double zk : z) {
      if (std::abs(zk) > opt.z_bound) return std::numeric_limits<double>::infinity();
    }
    const WarrantyRegion r = map.to_region(z);
    if (!r.valid() || r.t_w2 > cap_t || r.u_w2 > cap_u) throw std::logic_error("infeasible candidate region");
    return -objective(r);
  };
  SimplexOptions so;
  so.initial_step.assign(4, 0.5);
  so.x_tol = opt.x_tol;
  so.max_iterations = opt.max_iterations;
  const auto runs = parallel_map<SimplexResult>(starts.size(), opt.threads,
                                                [&](std::size_t i) { return nelder_mead(f, starts[i], so); });

  OptimResult best;
  std::optional<std::size_t> arg;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    best.iterations += runs[i].iterations;
    best.converged = best.converged || runs[i].converged;
    if (!std::isfinite(runs[i].value)) continue;
    if (!arg) {
      arg = i;
      continue;
    }
    const double vi = runs[i].value;
    const double vb = runs[*arg].value;
    if (vi < vb || (vi == vb && map.to_region(runs[i].x).to_array() < map.to_region(runs[*arg].x).to_array())) {
      arg = i;
    }
  }
  best.restarts_used = runs.size();
  if (!arg) {
    best.converged = false;
    best.region = init.value_or(WarrantyRegion{});
    best.utility = -std::numeric_limits<double>::infinity();
    return best;
  }
  best.region = map.to_region(runs[*arg].x);
  best.utility = -runs[*arg].value;
  best.boundary = detail::boundary_notes(runs[*arg].x, opt.z_bound);
  return best;
}

/// The chain actually used by the optimizer objective.
inline PosteriorChain objective_chain(const PosteriorChain& chain, const OptimizerOptions& opt) {
  return thin(chain, opt.max_draws);
}

/// Expected-utility maximization; the returned utility equals
/// expected_utility(region, objective_chain(chain, opt), cfg, opt.cost).
inline OptimResult optimize_region(const PosteriorChain& chain, const CostConfig& cfg,
                                   const std::optional<WarrantyRegion>& init = std::nullopt,
                                   const OptimizerOptions& opt = {}) {
  cfg.validate();
  if (chain.empty()) throw std::invalid_argument("posterior chain is empty");
  const PosteriorChain used = objective_chain(chain, opt);
  auto objective = [&](const WarrantyRegion& r) { return expected_utility(r, used, cfg, opt.cost); };
  return maximize_region(objective, opt.cap_fraction * cfg.lt, opt.cap_fraction * cfg.lu, init, opt);
}

// --- sensitivity ---------------------------------------------------------------------

using Overrides = std::map<std::string, double>;

/// Reference quantities for re-deriving the benefit rates: A2 = A(t_w, q*_t),
/// A3 = A(u_w, q*_u).
struct BenefitCalibration {
  double t_w = 0.2006;
  double u_w = 0.0787;
  double q_star_t = 0.75;
  double q_star_u = 0.75;
};

struct SensitivityRow {
  Overrides varied;
  CostConfig cfg;
  std::optional<OptimResult> result;
  std::string error;  // empty when the row succeeded
};

/// Applies overrides to a copy of the configuration. Changing s keeps the
/// profit a1 fixed and moves c; changing t_w, u_w or a q* recalibrates A2/A3
/// unless a2/a3 are given explicitly.
inline CostConfig apply_overrides(const CostConfig& base, BenefitCalibration cal, const Overrides& ov) {
  CostConfig c = base;
  bool recalibrate = false;
  for (const auto& [key, v] : ov) {
    if (key == "s") {
      c.s = v;
      c.c = v - c.a1;
    } else if (key == "c") {
      c.c = v;
      c.a1 = c.s - v;
    } else if (key == "m") {
      c.m = v;
    } else if (key == "q1t") {
      c.q1t = v;
    } else if (key == "q2t") {
      c.q2t = v;
    } else if (key == "q1u") {
      c.q1u = v;
    } else if (key == "q2u") {
      c.q2u = v;
    } else if (key == "q1") {
      c.q1t = c.q1u = v;
    } else if (key == "q2") {
      c.q2t = c.q2u = v;
    } else if (key == "lt") {
      c.lt = v;
    } else if (key == "lu") {
      c.lu = v;
    } else if (key == "t_w") {
      cal.t_w = v;
      recalibrate = true;
    } else if (key == "u_w") {
      cal.u_w = v;
      recalibrate = true;
    } else if (key == "q_star_t") {
      cal.q_star_t = v;
      recalibrate = true;
    } else if (key == "q_star_u") {
      cal.q_star_u = v;
      recalibrate = true;
    } else if (key == "q_star") {
      cal.q_star_t = cal.q_star_u = v;
      recalibrate = true;
    } else if (key != "a2" && key != "a3") {
      throw std::invalid_argument("unknown override '" + key + "'");
    }
  }
  if (recalibrate) {
    c.a2 = calibrate_benefit_rate(cal.t_w, cal.q_star_t);
    c.a3 = calibrate_benefit_rate(cal.u_w, cal.q_star_u);
  }
  if (auto it = ov.find("a2"); it != ov.end()) c.a2 = it->second;
  if (auto it = ov.find("a3"); it != ov.end()) c.a3 = it->second;
  c.validate();
  return c;
}

/// One optimize_region per grid point, in grid order; a failing row records
/// its error and the scan continues.
inline std::vector<SensitivityRow> sensitivity_scan(const PosteriorChain& chain, const CostConfig& base_cfg,
                                                    const BenefitCalibration& cal, const std::vector<Overrides>& grid,
                                                    const std::optional<WarrantyRegion>& init = std::nullopt,
                                                    const OptimizerOptions& opt = {}) {
  std::vector<SensitivityRow> rows;
  rows.reserve(grid.size());
  for (const auto& ov : grid) {
    SensitivityRow row;
    row.varied = ov;
    row.cfg = base_cfg;
    try {
      row.cfg = apply_overrides(base_cfg, cal, ov);
      row.result = optimize_region(chain, row.cfg, init, opt);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace bw
