#pragma once

// Nelder-Mead downhill simplex (minimization) over an unconstrained space.
// Constraints are handled by the callers through reparameterization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace bw {

struct SimplexOptions {
  std::vector<double> initial_step;  // per coordinate; empty means 0.1 everywhere
  double x_tol = 1e-6;  // simplex diameter (max coordinate distance to the best vertex)
  std::size_t max_iterations = 2000;
};

struct SimplexResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Minimize f starting from x0. Non-finite objective values are treated as
/// +infinity so the simplex retreats from them.
template <class F>
SimplexResult nelder_mead(F&& f, const std::vector<double>& x0, const SimplexOptions& opt = {}) {
  const std::size_t n = x0.size();
  SimplexResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) {
    const double step = opt.initial_step.empty() ? 0.1 : opt.initial_step[i];
    pts[i + 1][i] += step;
  }
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;

  auto combine = [&](std::vector<double>& out, double a, const std::vector<double>& p) {
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + a * (p[j] - centroid[j]);
  };

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < n; ++j) d = std::max(d, std::abs(pts[i][j] - pts[best][j]));
      diameter = std::max(diameter, d);
    }
    if (diameter < opt.x_tol) {
      res.converged = std::isfinite(vals[best]);
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    combine(trial, -kReflect, pts[worst]);
    const double f_r = eval(trial);
    if (f_r < vals[best]) {
      combine(trial2, -kExpand, pts[worst]);
      const double f_e = eval(trial2);
      if (f_e < f_r) {
        pts[worst] = trial2;
        vals[worst] = f_e;
      } else {
        pts[worst] = trial;
        vals[worst] = f_r;
      }
      continue;
    }
    if (f_r < vals[second]) {
      pts[worst] = trial;
      vals[worst] = f_r;
      continue;
    }
    // Contraction: outside if the reflected point improved on the worst.
    if (f_r < vals[worst]) {
      combine(trial2, -kContract, pts[worst]);
      const double f_c = eval(trial2);
      if (f_c <= f_r) {
        pts[worst] = trial2;
        vals[worst] = f_c;
        continue;
      }
    } else {
      combine(trial2, kContract, pts[worst]);
      const double f_c = eval(trial2);
      if (f_c < vals[worst]) {
        pts[worst] = trial2;
        vals[worst] = f_c;
        continue;
      }
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j) {
        pts[i][j] = pts[best][j] + kShrink * (pts[i][j] - pts[best][j]);
      }
      vals[i] = eval(pts[i]);
    }
  }

  const auto it = std::min_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.value = *it;
  return res;
}

}  // namespace bw
