#pragma once

// Economic benefit, per-unit warranty and dissatisfaction costs, and their
// posterior-predictive expectations for the combined FRW-PRW policy in age
// and usage.

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayeswarranty/mcmc.hpp"
#include "bayeswarranty/model.hpp"
#include "bayeswarranty/parallel.hpp"
#include "bayeswarranty/quadrature.hpp"
#include "bayeswarranty/transform.hpp"

namespace bw {

struct WarrantyRegion {
  double t_w1 = 0.0;
  double t_w2 = 0.0;
  double u_w1 = 0.0;
  double u_w2 = 0.0;

  [[nodiscard]] bool valid() const {
    return std::isfinite(t_w2) && std::isfinite(u_w2) && t_w1 >= 0 && u_w1 >= 0 && t_w1 <= t_w2 &&
           u_w1 <= u_w2;
  }
  void validate() const {
    if (!valid()) throw std::invalid_argument("warranty region must satisfy 0 <= x_w1 <= x_w2 < inf");
  }
  [[nodiscard]] std::array<double, 4> to_array() const { return {t_w1, t_w2, u_w1, u_w2}; }
  auto operator<=>(const WarrantyRegion&) const = default;
};

struct CostConfig {
  double s = 700.0;   // unit sale price
  double c = 500.0;   // production cost
  double a1 = 200.0;  // profit per unit, s - c
  double m = 1.0;     // market size
  double a2 = 10.95;  // age benefit rate
  double a3 = 27.91;  // usage benefit rate
  double q1t = 0.10;
  double q2t = 0.05;
  double q1u = 0.10;
  double q2u = 0.05;
  double lt = 1.020;
  double lu = 0.6547;

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("cost config: " + m); };
    if (!(s > 0)) fail("s must be positive");
    if (!(std::abs(a1 - (s - c)) <= 1e-9 * std::max(1.0, std::abs(s)))) fail("a1 must equal s - c");
    if (!(m > 0)) fail("m must be positive");
    if (!(a2 > 0) || !(a3 > 0)) fail("benefit rates must be positive");
    if (!(0 < q2t && q2t < q1t && q1t < 1)) fail("need 0 < q2t < q1t < 1");
    if (!(0 < q2u && q2u < q1u && q1u < 1)) fail("need 0 < q2u < q1u < 1");
    if (!(lt > 0) || !(lu > 0)) fail("expected lives must be positive");
  }
};

// --- closed-form pieces ------------------------------------------------------------

/// h(A, x_w) = [1 - exp(-A x_w / 2)] / [1 - exp(-A x_w)], which simplifies to
/// the logistic function of A x_w / 2.
inline double benefit_ratio(double a, double x_w) { return logistic(0.5 * a * x_w); }

/// The A solving h(A, x_w) = q_star.
inline double calibrate_benefit_rate(double x_w, double q_star) {
  if (!(q_star > 0.5 && q_star < 1.0)) throw std::domain_error("q_star must lie in (0.5, 1)");
  if (!(x_w > 0) || !std::isfinite(x_w)) throw std::domain_error("x_w must be positive and finite");
  return 2.0 / x_w * logit(q_star);
}

inline double economic_benefit(const WarrantyRegion& r, const CostConfig& cfg) {
  r.validate();
  return cfg.a1 * cfg.m * -std::expm1(-cfg.a2 * 0.5 * (r.t_w1 + r.t_w2)) *
         -std::expm1(-cfg.a3 * 0.5 * (r.u_w1 + r.u_w2));
}

/// Reimbursement for a unit failing at p under CW x CW with sale price s.
inline double per_unit_warranty_cost(const LifePoint& p, const WarrantyRegion& r, double s) {
  r.validate();
  if (p.t > r.t_w2 || p.u > r.u_w2) return 0.0;
  const double ft = p.t <= r.t_w1 ? 1.0 : (r.t_w2 - p.t) / (r.t_w2 - r.t_w1);
  const double fu = p.u <= r.u_w1 ? 1.0 : (r.u_w2 - p.u) / (r.u_w2 - r.u_w1);
  return s * ft * fu;
}

/// q-valued dissatisfaction profile on one scale: q1 up to x_w1, linear to q2
/// at x_w2, linear to 0 at L, and 0 beyond.
inline double dissatisfaction_profile(double x, double x_w1, double x_w2, double life, double q1,
                                      double q2) {
  if (x <= x_w1) return q1;
  if (x <= x_w2) return q1 - (q1 - q2) * (x - x_w1) / (x_w2 - x_w1);
  if (x <= life) return q2 * (life - x) / (life - x_w2);
  return 0.0;
}

inline void check_lives(const WarrantyRegion& r, const CostConfig& cfg) {
  if (!(r.t_w2 < cfg.lt) || !(r.u_w2 < cfg.lu)) {
    throw std::invalid_argument("warranty thresholds must stay below the expected lives (L_t, L_u)");
  }
}

inline double per_unit_dissatisfaction(const LifePoint& p, const WarrantyRegion& r, const CostConfig& cfg) {
  r.validate();
  check_lives(r, cfg);
  return 0.5 * cfg.s *
         (dissatisfaction_profile(p.t, r.t_w1, r.t_w2, cfg.lt, cfg.q1t, cfg.q2t) +
          dissatisfaction_profile(p.u, r.u_w1, r.u_w2, cfg.lu, cfg.q1u, cfg.q2u));
}

// --- expectation machinery --------------------------------------------------------

/// How F(t, u | x) is read inside the mass factors: the probability of the
/// rectangle [0,t] x [0,u], or 1 - R(t,u). Under 1 - R the four-corner
/// factors equal minus the rectangle probabilities, so costs can go negative.
enum class CdfReading { kRectangle, kSurvivalComplement };

/// Quadrature route: tensor Gauss-Legendre on the density, or integration by
/// parts onto the joint reliability along the cell edges.
enum class CostMethod { kTensor, kEdge };

struct CostOptions {
  std::size_t nodes = 32;
  CostMethod method = CostMethod::kTensor;
  CdfReading cdf = CdfReading::kRectangle;
  bool paper_literal_d = false;
  std::size_t threads = 1;
};

/// Weight c00 + c10 t + c01 u + c11 t u.
struct BilinearWeight {
  double c00 = 0.0;
  double c10 = 0.0;
  double c01 = 0.0;
  double c11 = 0.0;
  [[nodiscard]] double operator()(double t, double u) const { return c00 + c10 * t + c01 * u + c11 * t * u; }
};

namespace detail {

/// Nodes and weights for [a, b]; intervals starting at the origin use the
/// substitution x = b s^3 to tame the power behaviour of the marginals there.
struct AxisRule {
  std::vector<double> x;
  std::vector<double> w;
};

inline AxisRule axis_rule(double a, double b, std::size_t n) {
  AxisRule r;
  if (!(b > a)) return r;
  const auto& gl = GaussLegendre::cached(n);
  r.x.resize(n);
  r.w.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 0.5 * (gl.nodes()[i] + 1.0);
    if (a == 0.0) {
      r.x[i] = b * s * s * s;
      r.w[i] = 0.5 * gl.weights()[i] * 3.0 * b * s * s;
    } else {
      r.x[i] = a + (b - a) * s;
      r.w[i] = 0.5 * gl.weights()[i] * (b - a);
    }
  }
  return r;
}

inline double reliability_at(double t, double u, const ParamVector& psi) {
  return joint_reliability({t, u}, psi);
}

}  // namespace detail

/// Integral of w(t,u) f(t,u | psi) over the rectangle, by tensor quadrature
/// on the density.
inline double weighted_mass_tensor(const ParamVector& psi, const Rect& r, const BilinearWeight& w,
                                   std::size_t n) {
  if (r.empty()) return 0.0;
  const auto rt = detail::axis_rule(r.t_lo, r.t_hi, n);
  const auto ru = detail::axis_rule(r.u_lo, r.u_hi, n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      inner += ru.w[j] * w(rt.x[i], ru.x[j]) * joint_pdf({rt.x[i], ru.x[j]}, psi);
    }
    sum += rt.w[i] * inner;
  }
  return sum;
}

/// Area integral of R(t, u | psi) over the rectangle.
inline double reliability_area(const ParamVector& psi, const Rect& r, std::size_t n) {
  if (r.empty()) return 0.0;
  const auto rt = detail::axis_rule(r.t_lo, r.t_hi, n);
  const auto ru = detail::axis_rule(r.u_lo, r.u_hi, n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) inner += ru.w[j] * detail::reliability_at(rt.x[i], ru.x[j], psi);
    sum += rt.w[i] * inner;
  }
  return sum;
}

/// Same integral reduced by parts (f = d2R / dt du) to corner values of R,
/// edge integrals of R and, for the t u term, the area integral of R.
inline double weighted_mass_edge(const ParamVector& psi, const Rect& r, const BilinearWeight& w,
                                 std::size_t n) {
  if (r.empty()) return 0.0;
  const double a = r.t_lo, b = r.t_hi, c = r.u_lo, d = r.u_hi;
  auto R = [&](double t, double u) { return detail::reliability_at(t, u, psi); };
  const auto rt = detail::axis_rule(a, b, n);
  const auto ru = detail::axis_rule(c, d, n);
  auto along_t = [&](double u) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += rt.w[i] * R(rt.x[i], u);
    return s;
  };
  auto along_u = [&](double t) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += ru.w[j] * R(t, ru.x[j]);
    return s;
  };
  double val = w(b, d) * R(b, d) - w(a, d) * R(a, d) - w(b, c) * R(b, c) + w(a, c) * R(a, c);
  val -= (w.c10 + w.c11 * d) * along_t(d) - (w.c10 + w.c11 * c) * along_t(c);
  val -= (w.c01 + w.c11 * b) * along_u(b) - (w.c01 + w.c11 * a) * along_u(a);
  if (w.c11 != 0.0) val += w.c11 * reliability_area(psi, r, n);
  return val;
}

inline double weighted_mass(const ParamVector& psi, const Rect& r, const BilinearWeight& w,
                            const CostOptions& opt) {
  return opt.method == CostMethod::kEdge ? weighted_mass_edge(psi, r, w, opt.nodes)
                                         : weighted_mass_tensor(psi, r, w, opt.nodes);
}

/// F(t, u | psi) under the chosen reading.
inline double cdf_reading(double t, double u, const ParamVector& psi, CdfReading reading) {
  if (reading == CdfReading::kSurvivalComplement) return joint_cdf({t, u}, psi);
  return rectangle_probability({t, u}, psi);
}

/// Per-term pieces of the expected costs. Index k = 0..3 for W(1..4) and
/// 0..8 for D(1..9), in the order of the Case I-IX definitions.
struct CostBreakdown {
  double economic_benefit = 0.0;
  std::array<double, 4> w_mass{};      // predictive-CDF factors
  std::array<double, 4> w_integral{};  // W(k)
  std::array<double, 9> d_mass{};
  std::array<double, 9> d_integral{};  // D(k)
  double warranty_cost = 0.0;
  double dissatisfaction_cost = 0.0;
  double utility = 0.0;
};

namespace detail {

/// One (mass, rectangle, factor) triple of the dissatisfaction sum. The mass
/// is a signed combination of F at grid corners.
struct DTerm {
  std::array<std::pair<std::array<int, 2>, double>, 4> mass_terms;  // ((i, j), sign)
  int n_mass = 0;
  Rect rect;
  BilinearWeight weight;
};

/// Grid lines t in {0, t_w1, t_w2, L_t}, u in {0, u_w1, u_w2, L_u}; F is
/// needed at indices 1..3 on each axis.
struct CostLayout {
  std::array<double, 4> tg{};
  std::array<double, 4> ug{};
  std::array<Rect, 3> w_rect{};  // W(2..4)
  std::array<BilinearWeight, 3> w_weight{};
  std::array<DTerm, 9> d{};      // D(1) uses only its mass
};

inline Rect cell(const CostLayout& L, int i, int j) { return {L.tg[i], L.tg[i + 1], L.ug[j], L.ug[j + 1]}; }

/// Weight (x_hi - x) / (x_hi - x_lo) as an affine coefficient pair, zero for
/// a degenerate interval (whose cell has no area anyway).
inline std::pair<double, double> falling(double lo, double hi) {
  if (!(hi > lo)) return {0.0, 0.0};
  return {hi / (hi - lo), -1.0 / (hi - lo)};
}

inline CostLayout make_layout(const WarrantyRegion& r, const CostConfig& cfg, bool literal) {
  CostLayout L;
  L.tg = {0.0, r.t_w1, r.t_w2, cfg.lt};
  L.ug = {0.0, r.u_w1, r.u_w2, cfg.lu};

  const auto [at, bt] = falling(r.t_w1, r.t_w2);  // (t_w2 - t)/(t_w2 - t_w1)
  const auto [au, bu] = falling(r.u_w1, r.u_w2);
  L.w_rect = {cell(L, 1, 0), cell(L, 0, 1), cell(L, 1, 1)};
  L.w_weight[0] = {at, bt, 0.0, 0.0};
  L.w_weight[1] = {au, 0.0, bu, 0.0};
  L.w_weight[2] = {at * au, bt * au, at * bu, bt * bu};

  // Per-scale profile pieces as affine functions of x.
  const double q1t = cfg.q1t, q2t = cfg.q2t, q1u = cfg.q1u, q2u = cfg.q2u;
  // q1 - (q1 - q2)(x - x_w1)/(x_w2 - x_w1)
  auto interp = [](double q1, double q2, double lo, double hi) -> std::pair<double, double> {
    if (!(hi > lo)) return {q1, 0.0};
    const double slope = (q1 - q2) / (hi - lo);
    return {q1 + slope * lo, -slope};
  };
  // q2 (L - x)/denominator
  auto tail = [](double q2, double life, double denom) -> std::pair<double, double> {
    return {q2 * life / denom, -q2 / denom};
  };
  const auto it = interp(q1t, q2t, r.t_w1, r.t_w2);
  const auto iu = interp(q1u, q2u, r.u_w1, r.u_w2);
  const auto tt = tail(q2t, cfg.lt, cfg.lt - r.t_w2);
  const auto tu = tail(q2u, cfg.lu, cfg.lu - r.u_w2);

  using M = std::pair<std::array<int, 2>, double>;
  auto set = [&](int k, std::initializer_list<M> mass, Rect rect, BilinearWeight w) {
    auto& d = L.d[static_cast<std::size_t>(k)];
    d.n_mass = 0;
    for (const auto& m : mass) d.mass_terms[static_cast<std::size_t>(d.n_mass++)] = m;
    d.rect = rect;
    d.weight = w;
  };
  // Grid indices for F: 1 = x_w1, 2 = x_w2, 3 = L.
  const M f11{{1, 1}, 1}, f21{{2, 1}, 1}, f12{{1, 2}, 1}, f22{{2, 2}, 1};
  const M f13{{1, 3}, 1}, f31{{3, 1}, 1}, f23{{2, 3}, 1}, f32{{3, 2}, 1}, f33{{3, 3}, 1};
  auto neg = [](M m) { return M{m.first, -m.second}; };

  set(0, {f11}, cell(L, 0, 0), {q1t + q1u, 0, 0, 0});
  if (!literal) {
    // Case II: usage strip, usage interpolation. Case III: age strip, age interpolation.
    set(1, {f12, neg(f11)}, cell(L, 0, 1), {q1t + iu.first, 0, iu.second, 0});
    set(2, {f21, neg(f11)}, cell(L, 1, 0), {it.first + q1u, it.second, 0, 0});
    set(3, {f22, f11, neg(f21), neg(f12)}, cell(L, 1, 1), {it.first + iu.first, it.second, iu.second, 0});
  } else {
    // Expected-utility display: D(2) on the age strip with the usage
    // interpolation, D(3) on the usage strip with the age interpolation, and
    // D(4) interpolating through (L - x)/(L - x_w2).
    set(1, {f21, neg(f11)}, cell(L, 1, 0), {q1t + iu.first, 0, iu.second, 0});
    set(2, {f12, neg(f11)}, cell(L, 0, 1), {it.first + q1u, it.second, 0, 0});
    const double st = (q1t - q2t) / (cfg.lt - r.t_w2);
    const double su = (q1u - q2u) / (cfg.lu - r.u_w2);
    set(3, {f22, f11, neg(f21), neg(f12)}, cell(L, 1, 1),
        {q1t - st * cfg.lt + q1u - su * cfg.lu, st, su, 0});
  }
  const auto tu5 = literal ? tail(q2u, cfg.lu, cfg.lu - r.t_w2) : tu;
  set(4, {f13, neg(f12)}, cell(L, 0, 2), {q1t + tu5.first, 0, tu5.second, 0});
  set(5, {f31, neg(f21)}, cell(L, 2, 0), {tt.first + q1u, tt.second, 0, 0});
  set(6, {f23, f12, neg(f13), neg(f22)}, cell(L, 1, 2), {it.first + tu.first, it.second, tu.second, 0});
  set(7, {f32, f21, neg(f22), neg(f31)}, cell(L, 2, 1), {tt.first + iu.first, tt.second, iu.second, 0});
  std::pair<double, double> tu9 = tu;
  if (literal) {
    // Undefined (NaN) when u_w1 = u_w2.
    tu9 = r.u_w2 > r.u_w1 ? tail(q2u, cfg.lu, r.u_w2 - r.u_w1)
                          : std::pair{std::numeric_limits<double>::quiet_NaN(), 0.0};
  }
  set(8, {f33, f22, neg(f23), neg(f32)}, cell(L, 2, 2), {tt.first + tu9.first, tt.second, tu9.second, 0});
  return L;
}

/// Everything one draw contributes: F on the 3 x 3 grid and the 3 + 8
/// weighted integrals (W(2..4), D(2..9)).
struct DrawTerms {
  std::array<double, 9> f{};
  std::array<double, 11> integrals{};
};

/// R on the 4 x 4 grid and its integrals along every grid segment, shared by
/// all cells in the edge route.
struct EdgeCache {
  std::array<std::array<double, 4>, 4> r{};       // r[i][j] = R(tg[i], ug[j])
  std::array<std::array<double, 4>, 3> along_t{};  // along_t[i][j]: t in cell column i, u = ug[j]
  std::array<std::array<double, 3>, 4> along_u{};  // along_u[i][j]: t = tg[i], u in cell row j
};

inline EdgeCache edge_cache(const ParamVector& psi, const CostLayout& L, std::size_t n) {
  EdgeCache c;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) c.r[i][j] = reliability_at(L.tg[i], L.ug[j], psi);
  }
  for (int i = 0; i < 3; ++i) {
    const auto rule = axis_rule(L.tg[i], L.tg[i + 1], n);
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < rule.x.size(); ++k) s += rule.w[k] * reliability_at(rule.x[k], L.ug[j], psi);
      c.along_t[i][j] = s;
    }
  }
  for (int j = 0; j < 3; ++j) {
    const auto rule = axis_rule(L.ug[j], L.ug[j + 1], n);
    for (int i = 0; i < 4; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < rule.x.size(); ++k) s += rule.w[k] * reliability_at(L.tg[i], rule.x[k], psi);
      c.along_u[i][j] = s;
    }
  }
  return c;
}

/// Cell (i, j) integral from the cache; the t u term needs an area integral.
inline double edge_cell(const ParamVector& psi, const CostLayout& L, const EdgeCache& c, int i, int j,
                        const BilinearWeight& w, std::size_t n) {
  const double a = L.tg[i], b = L.tg[i + 1], lo = L.ug[j], hi = L.ug[j + 1];
  if (!(b > a) || !(hi > lo)) return 0.0;
  double val = w(b, hi) * c.r[i + 1][j + 1] - w(a, hi) * c.r[i][j + 1] - w(b, lo) * c.r[i + 1][j] +
               w(a, lo) * c.r[i][j];
  val -= (w.c10 + w.c11 * hi) * c.along_t[i][j + 1] - (w.c10 + w.c11 * lo) * c.along_t[i][j];
  val -= (w.c01 + w.c11 * b) * c.along_u[i + 1][j] - (w.c01 + w.c11 * a) * c.along_u[i][j];
  if (w.c11 != 0.0) {
    val += w.c11 * reliability_area(psi, {a, b, lo, hi}, n);
  }
  return val;
}

inline std::array<int, 2> cell_index(const CostLayout& L, const Rect& r) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (L.tg[i] == r.t_lo && L.tg[i + 1] == r.t_hi && L.ug[j] == r.u_lo && L.ug[j + 1] == r.u_hi) return {i, j};
    }
  }
  throw std::logic_error("rectangle is not a grid cell");
}

inline DrawTerms draw_terms(const ParamVector& psi, const CostLayout& L, const CostOptions& opt) {
  DrawTerms out;
  for (int i = 1; i <= 3; ++i) {
    for (int j = 1; j <= 3; ++j) {
      out.f[static_cast<std::size_t>((i - 1) * 3 + (j - 1))] = cdf_reading(L.tg[i], L.ug[j], psi, opt.cdf);
    }
  }
  if (opt.method == CostMethod::kEdge) {
    const EdgeCache c = edge_cache(psi, L, opt.nodes);
    auto cellv = [&](const Rect& r, const BilinearWeight& w) {
      if (r.empty()) return 0.0;
      const auto [i, j] = cell_index(L, r);
      return edge_cell(psi, L, c, i, j, w, opt.nodes);
    };
    for (std::size_t k = 0; k < 3; ++k) out.integrals[k] = cellv(L.w_rect[k], L.w_weight[k]);
    for (std::size_t k = 1; k < 9; ++k) out.integrals[2 + k] = cellv(L.d[k].rect, L.d[k].weight);
    return out;
  }
  for (std::size_t k = 0; k < 3; ++k) out.integrals[k] = weighted_mass(psi, L.w_rect[k], L.w_weight[k], opt);
  for (std::size_t k = 1; k < 9; ++k) out.integrals[2 + k] = weighted_mass(psi, L.d[k].rect, L.d[k].weight, opt);
  return out;
}

}  // namespace detail

/// Full breakdown of the expected utility for a region under the chain's
/// posterior-predictive distribution. Per-draw pieces are reduced with
/// pairwise sums in draw order, so the result does not depend on threads.
inline CostBreakdown cost_breakdown(const WarrantyRegion& r, const PosteriorChain& chain, const CostConfig& cfg,
                                    const CostOptions& opt = {}) {
  r.validate();
  cfg.validate();
  check_lives(r, cfg);
  if (chain.empty()) throw std::invalid_argument("posterior chain is empty");
  const auto layout = detail::make_layout(r, cfg, opt.paper_literal_d);
  const auto per_draw = parallel_map<detail::DrawTerms>(
      chain.size(), opt.threads, [&](std::size_t i) { return detail::draw_terms(chain.draws[i], layout, opt); });

  const double k = static_cast<double>(chain.size());
  std::vector<double> col(chain.size());
  auto average = [&](auto get) {
    for (std::size_t i = 0; i < per_draw.size(); ++i) col[i] = get(per_draw[i]);
    return pairwise_sum(col) / k;
  };
  std::array<double, 9> fbar{};
  for (std::size_t g = 0; g < 9; ++g) fbar[g] = average([g](const detail::DrawTerms& d) { return d.f[g]; });
  std::array<double, 11> ibar{};
  for (std::size_t g = 0; g < 11; ++g) ibar[g] = average([g](const detail::DrawTerms& d) { return d.integrals[g]; });
  auto F = [&](int i, int j) { return fbar[static_cast<std::size_t>((i - 1) * 3 + (j - 1))]; };

  CostBreakdown b;
  b.economic_benefit = economic_benefit(r, cfg);
  b.w_mass = {F(1, 1), F(2, 1) - F(1, 1), F(1, 2) - F(1, 1), F(2, 2) + F(1, 1) - F(2, 1) - F(1, 2)};
  b.w_integral = {F(1, 1), ibar[0], ibar[1], ibar[2]};
  for (std::size_t kk = 0; kk < 9; ++kk) {
    const auto& d = layout.d[kk];
    double mass = 0.0;
    for (int q = 0; q < d.n_mass; ++q) {
      const auto& [ij, sign] = d.mass_terms[static_cast<std::size_t>(q)];
      mass += sign * F(ij[0], ij[1]);
    }
    b.d_mass[kk] = mass;
    b.d_integral[kk] = kk == 0 ? (cfg.q1t + cfg.q1u) * F(1, 1) : ibar[2 + kk];
  }
  double w = 0.0, dsum = 0.0;
  for (std::size_t kk = 0; kk < 4; ++kk) w += b.w_mass[kk] * b.w_integral[kk];
  for (std::size_t kk = 0; kk < 9; ++kk) dsum += b.d_mass[kk] * b.d_integral[kk];
  b.warranty_cost = cfg.m * cfg.s * w;
  b.dissatisfaction_cost = cfg.m * 0.5 * cfg.s * dsum;
  b.utility = b.economic_benefit - b.warranty_cost - b.dissatisfaction_cost;
  return b;
}

inline double expected_warranty_cost(const WarrantyRegion& r, const PosteriorChain& chain, const CostConfig& cfg,
                                     const CostOptions& opt = {}) {
  return cost_breakdown(r, chain, cfg, opt).warranty_cost;
}

inline double expected_dissatisfaction_cost(const WarrantyRegion& r, const PosteriorChain& chain,
                                            const CostConfig& cfg, const CostOptions& opt = {}) {
  return cost_breakdown(r, chain, cfg, opt).dissatisfaction_cost;
}

inline double expected_utility(const WarrantyRegion& r, const PosteriorChain& chain, const CostConfig& cfg,
                               const CostOptions& opt = {}) {
  return cost_breakdown(r, chain, cfg, opt).utility;
}

}  // namespace bw
