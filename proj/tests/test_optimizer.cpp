#include <gtest/gtest.h>

#include "bayeswarranty/optimizer.hpp"
#include "test_util.hpp"

using namespace bw;

TEST(Simplex, MinimizesRosenbrock) {
  auto f = [](const std::vector<double>& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  SimplexOptions o;
  o.x_tol = 1e-10;
  o.max_iterations = 20000;
  const auto r = nelder_mead(f, {-1.2, 1.0}, o);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);
}

TEST(Simplex, RetreatsFromNonFiniteValues) {
  auto f = [](const std::vector<double>& x) {
    return x[0] < 0 ? std::nan("") : (x[0] - 1) * (x[0] - 1);
  };
  const auto r = nelder_mead(f, {0.2});
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
}

TEST(RegionMapping, RoundTripAndOrdering) {
  const RegionMap m{1.0, 0.65};
  const WarrantyRegion r{0.14, 0.93, 0.11, 0.2};
  const auto back = m.to_region(m.to_z(r));
  EXPECT_NEAR(back.t_w1, r.t_w1, 1e-12);
  EXPECT_NEAR(back.t_w2, r.t_w2, 1e-12);
  EXPECT_NEAR(back.u_w1, r.u_w1, 1e-12);
  EXPECT_NEAR(back.u_w2, r.u_w2, 1e-12);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0, 5);
  for (int i = 0; i < 1000; ++i) {
    const auto x = m.to_region({z(rng), z(rng), z(rng), z(rng)});
    ASSERT_TRUE(x.valid());
    ASSERT_LE(x.t_w2, 1.0);
    ASSERT_LE(x.u_w2, 0.65);
  }
}

namespace {

// Concave quadratic with an interior maximum.
const WarrantyRegion kStar{0.2, 0.7, 0.1, 0.3};
double stub(const WarrantyRegion& r) {
  const auto a = r.to_array();
  const auto s = kStar.to_array();
  double v = 50.0;
  for (std::size_t k = 0; k < 4; ++k) v -= (k + 1.0) * (a[k] - s[k]) * (a[k] - s[k]);
  return v;
}

OptimizerOptions quick() {
  OptimizerOptions o;
  o.n_restarts = 6;
  o.x_tol = 1e-9;
  o.max_iterations = 5000;
  return o;
}

}  // namespace

TEST(Optimizer, RecoversConcaveStubOptimum) {
  const auto res = maximize_region(stub, 1.0, 0.6, std::nullopt, quick());
  EXPECT_TRUE(res.converged);
  const auto a = res.region.to_array();
  const auto s = kStar.to_array();
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(a[k], s[k], 1e-4);
  EXPECT_NEAR(res.utility, 50.0, 1e-8);
  EXPECT_TRUE(res.boundary.empty());
}

TEST(Optimizer, BeatsRandomFeasiblePerturbations) {
  const auto res = maximize_region(stub, 1.0, 0.6, std::nullopt, quick());
  std::mt19937_64 rng(3);
  std::normal_distribution<double> eps(0.0, 0.02);
  int tried = 0;
  while (tried < 100) {
    WarrantyRegion p{res.region.t_w1 + eps(rng), res.region.t_w2 + eps(rng), res.region.u_w1 + eps(rng),
                     res.region.u_w2 + eps(rng)};
    if (!p.valid() || p.t_w2 > 1.0 || p.u_w2 > 0.6) continue;
    ++tried;
    EXPECT_GE(res.utility, stub(p));
  }
}

TEST(Optimizer, ReportsBoundaryOptimum) {
  // Maximum at t_w1 = 0 (pro-rata only on age).
  auto f = [](const WarrantyRegion& r) {
    return -r.t_w1 - (r.t_w2 - 0.5) * (r.t_w2 - 0.5) - (r.u_w1 - 0.1) * (r.u_w1 - 0.1) - (r.u_w2 - 0.3) * (r.u_w2 - 0.3);
  };
  const auto res = maximize_region(f, 1.0, 0.6, std::nullopt, quick());
  EXPECT_LT(res.region.t_w1, 1e-3);
  EXPECT_NEAR(res.region.t_w2, 0.5, 1e-3);
  ASSERT_FALSE(res.boundary.empty());
  EXPECT_EQ(res.boundary.front(), "age: x_w1 = 0 (PRW only)");
}

TEST(Optimizer, IndependentOfThreadCount) {
  auto o1 = quick();
  auto o3 = quick();
  o3.threads = 3;
  const auto a = maximize_region(stub, 1.0, 0.6, std::nullopt, o1);
  const auto b = maximize_region(stub, 1.0, 0.6, std::nullopt, o3);
  EXPECT_EQ(a.region, b.region);
  EXPECT_EQ(a.utility, b.utility);
}

TEST(Optimizer, InitIsOneOfTheStarts) {
  auto o = quick();
  o.n_restarts = 1;
  const auto res = maximize_region(stub, 1.0, 0.6, WarrantyRegion{0.19, 0.69, 0.11, 0.29}, o);
  EXPECT_NEAR(res.region.t_w2, 0.7, 1e-4);
  EXPECT_EQ(res.restarts_used, 1u);
}

TEST(Optimizer, OneDrawChainEndToEnd) {
  PosteriorChain chain;
  chain.draws.push_back({1.6, 1.0, 0.75, 0.91, 0.18});
  CostConfig cfg;
  auto o = quick();
  o.n_restarts = 2;
  o.x_tol = 1e-6;
  const auto res = optimize_region(chain, cfg, WarrantyRegion{0.14, 0.9, 0.11, 0.2}, o);
  ASSERT_TRUE(res.region.valid());
  EXPECT_LE(res.region.t_w2, cfg.lt);
  EXPECT_EQ(res.utility, expected_utility(res.region, objective_chain(chain, o), cfg, o.cost));
  EXPECT_GT(res.utility, expected_utility(WarrantyRegion{0.14, 0.9, 0.11, 0.2}, chain, cfg, o.cost));
}

TEST(Overrides, SalePriceKeepsProfit) {
  CostConfig base;
  const auto c = apply_overrides(base, {}, {{"s", 1100}});
  EXPECT_EQ(c.s, 1100);
  EXPECT_EQ(c.a1, 200);
  EXPECT_EQ(c.c, 900);
}

TEST(Overrides, QStarRecalibratesUnlessRatesGiven) {
  CostConfig base;
  const auto c = apply_overrides(base, {}, {{"q_star_t", 0.9}, {"q_star_u", 0.6}});
  EXPECT_NEAR(c.a2 / 21.9048, 1.0, 1e-3);
  EXPECT_NEAR(c.a3 / 10.3021, 1.0, 1e-3);
  const auto d = apply_overrides(base, {}, {{"q_star", 0.9}, {"a2", 3.0}});
  EXPECT_EQ(d.a2, 3.0);
  EXPECT_THROW(apply_overrides(base, {}, {{"bogus", 1}}), std::invalid_argument);
  EXPECT_THROW(apply_overrides(base, {}, {{"q2", 0.2}}), std::invalid_argument);
}

TEST(Sensitivity, FailingRowIsRecordedAndScanContinues) {
  PosteriorChain chain;
  chain.draws.push_back({1.6, 1.0, 0.75, 0.91, 0.18});
  auto o = quick();
  o.n_restarts = 1;
  o.x_tol = 1e-4;
  const auto rows = sensitivity_scan(chain, CostConfig{}, {}, {{{"q2", 0.5}}, {{"s", 900}}}, std::nullopt, o);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_FALSE(rows[0].result.has_value());
  EXPECT_TRUE(rows[1].error.empty());
  EXPECT_TRUE(rows[1].result.has_value());
}
