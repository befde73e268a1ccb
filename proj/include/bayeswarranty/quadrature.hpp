#pragma once

// Gauss-Legendre rules and tensor-product integration on rectangles.

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace bw {

/// n-point Gauss-Legendre rule on [-1, 1].
class GaussLegendre {
 public:
  explicit GaussLegendre(std::size_t n) : nodes_(n), weights_(n) {
    if (n == 0) throw std::invalid_argument("Gauss-Legendre rule needs at least one node");
    // Newton iteration on P_n from the Chebyshev initial guesses; roots are
    // symmetric so only half are computed.
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
      double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                          (static_cast<double>(n) + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
          p0 = p1;
          p1 = pk;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes_[i] = -x;
      nodes_[n - 1 - i] = x;
      weights_[i] = w;
      weights_[n - 1 - i] = w;
    }
  }

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] const std::vector<double>& nodes() const { return nodes_; }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }

  /// Shared cached rule; construction is O(n^2) so repeated callers reuse it.
  static const GaussLegendre& cached(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::unique_ptr<GaussLegendre>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<GaussLegendre>(n);
    return *slot;
  }

  /// Integral of f over [a, b].
  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) sum += weights_[i] * f(mid + half * nodes_[i]);
    return half * sum;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Axis-aligned rectangle [t_lo, t_hi] x [u_lo, u_hi].
struct Rect {
  double t_lo = 0.0;
  double t_hi = 0.0;
  double u_lo = 0.0;
  double u_hi = 0.0;

  [[nodiscard]] bool empty() const { return !(t_hi > t_lo) || !(u_hi > u_lo); }
};

/// Composite Gauss-Legendre on [a, b]: `panels` equal panels of `n` nodes.
template <class F>
double integrate_1d(F&& f, double a, double b, std::size_t n, std::size_t panels = 1) {
  if (!(b > a)) return 0.0;
  const auto& rule = GaussLegendre::cached(n);
  const double h = (b - a) / static_cast<double>(panels);
  double sum = 0.0;
  for (std::size_t k = 0; k < panels; ++k) {
    const double lo = a + h * static_cast<double>(k);
    sum += rule.integrate(f, lo, lo + h);
  }
  return sum;
}

/// Tensor-product Gauss-Legendre on a rectangle with nt x nu nodes.
template <class F>
double integrate_2d(F&& f, const Rect& r, std::size_t nt, std::size_t nu) {
  if (r.empty()) return 0.0;
  const auto& rt = GaussLegendre::cached(nt);
  const auto& ru = GaussLegendre::cached(nu);
  const double ht = 0.5 * (r.t_hi - r.t_lo);
  const double mt = 0.5 * (r.t_hi + r.t_lo);
  const double hu = 0.5 * (r.u_hi - r.u_lo);
  const double mu = 0.5 * (r.u_hi + r.u_lo);
  double sum = 0.0;
  for (std::size_t i = 0; i < nt; ++i) {
    const double t = mt + ht * rt.nodes()[i];
    double inner = 0.0;
    for (std::size_t j = 0; j < nu; ++j) inner += ru.weights()[j] * f(t, mu + hu * ru.nodes()[j]);
    sum += rt.weights()[i] * inner;
  }
  return ht * hu * sum;
}

/// Pairwise (cascade) summation; the result depends only on the value order.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

}  // namespace bw
