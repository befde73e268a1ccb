#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>

#include "bayeswarranty/model.hpp"
#include "bayeswarranty/simulate.hpp"
#include "test_util.hpp"

using namespace bw;
using boost::multiprecision::cpp_dec_float_50;

namespace {

// R written out directly in 50-digit arithmetic.
cpp_dec_float_50 reliability_hp(cpp_dec_float_50 t, cpp_dec_float_50 u, const ParamVector& p) {
  using boost::multiprecision::exp;
  using boost::multiprecision::pow;
  const cpp_dec_float_50 th = p.theta;
  const cpp_dec_float_50 s = pow(t / p.eta_t, p.lambda_t / th) + pow(u / p.eta_u, p.lambda_u / th);
  return exp(-pow(s, th));
}

// d2R/dtdu by a central difference with a 1e-15 step: truncation error is
// O(h^2) = 1e-30 and the 50-digit rounding error stays below 1e-19.
double mixed_partial_hp(double t, double u, const ParamVector& p) {
  const cpp_dec_float_50 h("1e-15");
  const cpp_dec_float_50 tt = t, uu = u;
  const cpp_dec_float_50 v = reliability_hp(tt + h, uu + h, p) - reliability_hp(tt + h, uu - h, p) -
                             reliability_hp(tt - h, uu + h, p) + reliability_hp(tt - h, uu - h, p);
  return static_cast<double>(v / (4 * h * h));
}

}  // namespace

TEST(Model, IndependenceAtThetaOneFactorizes) {
  for (auto p : bwtest::random_params(10, 11)) {
    p.theta = 1.0;
    for (double t : {0.05, 0.7, 2.3}) {
      for (double u : {0.1, 1.1, 3.7}) {
        const double expected = std::exp(-std::pow(t / p.eta_t, p.lambda_t)) * std::exp(-std::pow(u / p.eta_u, p.lambda_u));
        EXPECT_NEAR(joint_reliability({t, u}, p) / expected, 1.0, 1e-10);
        const double f = marginal_pdf(Scale::kAge, t, p) * marginal_pdf(Scale::kUsage, u, p);
        EXPECT_NEAR(joint_pdf({t, u}, p) / f, 1.0, 1e-10);
      }
    }
  }
}

TEST(Model, ReliabilityAtOriginAndAxes) {
  const ParamVector p{1.5, 1.2, 0.8, 0.9, 0.3};
  EXPECT_EQ(joint_reliability({0, 0}, p), 1.0);
  EXPECT_NEAR(joint_reliability({0.7, 0}, p), 1.0 - marginal_cdf(Scale::kAge, 0.7, p), 1e-15);
  EXPECT_NEAR(joint_reliability({0, 0.4}, p), 1.0 - marginal_cdf(Scale::kUsage, 0.4, p), 1e-15);
}

TEST(Model, PdfEqualsMixedPartialOfReliability) {
  for (const auto& p : bwtest::random_params(8, 12)) {
    for (double t : {0.2, 0.9, 1.7}) {
      for (double u : {0.3, 1.2}) {
        const double oracle = mixed_partial_hp(t, u, p);
        EXPECT_NEAR(joint_pdf({t, u}, p), oracle, 1e-10 * std::max(1.0, std::abs(oracle)));
      }
    }
  }
}

TEST(Model, PdfMatchesDoublePrecisionFiniteDifference) {
  const ParamVector p{1.694, 1.01, 0.805, 0.929, 0.183};
  const double h = 1e-4;
  for (double t : {0.3, 1.0}) {
    for (double u : {0.2, 0.6}) {
      const double fd = (joint_reliability({t + h, u + h}, p) - joint_reliability({t + h, u - h}, p) -
                         joint_reliability({t - h, u + h}, p) + joint_reliability({t - h, u - h}, p)) /
                        (4 * h * h);
      EXPECT_NEAR(joint_pdf({t, u}, p), fd, 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Model, PdfIntegratesToRectangleProbability) {
  boost::math::quadrature::tanh_sinh<double> ts;
  for (const auto& p : bwtest::random_params(4, 13, 0.3, 0.95)) {
    const double T = 1.3, U = 0.9;
    auto inner = [&](double t) {
      return ts.integrate([&](double u) { return joint_pdf({t, u}, p); }, 0.0, U, 1e-10);
    };
    const double mass = ts.integrate(inner, 0.0, T, 1e-9);
    EXPECT_NEAR(mass, rectangle_probability({T, U}, p), 1e-6);
  }
}

TEST(Model, PdfNormalizesOverQuadrant) {
  boost::math::quadrature::exp_sinh<double> es;
  for (const auto& p : bwtest::random_params(3, 14, 0.4, 0.95)) {
    auto inner = [&](double t) { return es.integrate([&](double u) { return joint_pdf({t, u}, p); }, 1e-9); };
    EXPECT_NEAR(es.integrate(inner, 1e-8), 1.0, 1e-4);
  }
}

TEST(Model, JointCdfIsSurvivalComplementNotRectangle) {
  const ParamVector p{1.0, 1.5, 0.9, 0.7, 0.2};
  const LifePoint x{0.4, 0.3};
  EXPECT_NEAR(joint_cdf(x, p), 1.0 - joint_reliability(x, p), 1e-15);
  EXPECT_LT(rectangle_probability(x, p), joint_cdf(x, p));
  EXPECT_GE(rectangle_probability(x, p), 0.0);
}

TEST(Model, RectangleProbabilityIsMonotone) {
  const ParamVector p{1.0, 1.5, 0.9, 0.7, 0.2};
  double prev = 0.0;
  for (double s = 0.05; s < 4.0; s += 0.05) {
    const double v = rectangle_probability({s, s}, p);
    EXPECT_GE(v, prev - 1e-15);
    prev = v;
  }
  EXPECT_NEAR(rectangle_probability({1e4, 1e4}, p), 1.0, 1e-12);
}

TEST(Model, MarginalQuantileInvertsCdf) {
  for (const auto& p : bwtest::random_params(5, 15)) {
    for (double q : {0.01, 0.1, 0.5, 0.9}) {
      EXPECT_NEAR(marginal_cdf(Scale::kAge, marginal_quantile(Scale::kAge, q, p), p), q, 1e-13);
      EXPECT_NEAR(marginal_cdf(Scale::kUsage, marginal_quantile(Scale::kUsage, q, p), p), q, 1e-13);
    }
  }
  EXPECT_THROW(marginal_quantile(Scale::kAge, 1.0, ParamVector{}), std::domain_error);
}

TEST(Model, InvalidInputsThrow) {
  EXPECT_THROW(joint_reliability({-1, 0}, ParamVector{}), std::domain_error);
  EXPECT_THROW(joint_reliability({1, 1}, ParamVector{1, 1, 1, 1, 1.5}), std::domain_error);
  EXPECT_THROW(joint_pdf({0, 0}, ParamVector{}), std::domain_error);
  EXPECT_THROW(joint_pdf({1, std::nan("")}, ParamVector{}), std::domain_error);
}

TEST(Model, SimulatedLifetimesFollowReliability) {
  const ParamVector p{1.694, 1.01, 0.805, 0.929, 0.183};
  std::mt19937_64 rng(99);
  const std::size_t n = 200000;
  std::vector<LifePoint> xs(n);
  for (auto& x : xs) x = sample_lifetime(p, rng);
  for (double t : {0.3, 1.0, 2.0}) {
    for (double u : {0.2, 0.5, 1.0}) {
      const double r = joint_reliability({t, u}, p);
      double hit = 0;
      for (const auto& x : xs) hit += (x.t >= t && x.u >= u);
      const double se = std::sqrt(r * (1 - r) / n);
      EXPECT_NEAR(hit / n, r, 4 * se + 1e-12) << t << "," << u;
    }
  }
}
