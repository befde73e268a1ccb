#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "bayeswarranty/data.hpp"
#include "bayeswarranty/io.hpp"
#include "bayeswarranty/simulate.hpp"
#include "test_util.hpp"

using namespace bw;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "bw_test_data";
  fs::create_directories(dir);
  return dir / name;
}

// Fully specified null: U(0,1) data against the identity CDF.
double ad_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double s = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    s += (2.0 * (i + 1) - 1) * (std::log(u[i]) + std::log1p(-u[u.size() - 1 - i]));
  }
  return -n - s / n;
}

}  // namespace

TEST(Loader, BundledDataset1) {
  const auto recs = load_dataset(bwtest::data_file("dataset1.csv"));
  ASSERT_EQ(recs.size(), 36u);
  EXPECT_EQ(std::count_if(recs.begin(), recs.end(), [](const RawRecord& r) { return r.censored_marker; }), 2);
  EXPECT_TRUE(recs[34].censored_marker && recs[35].censored_marker);
}

TEST(Loader, BundledDataset2) {
  const auto recs = load_dataset(bwtest::data_file("dataset2.csv"));
  ASSERT_EQ(recs.size(), 43u);
  EXPECT_EQ(recs.front().age, 0.01);
  EXPECT_EQ(recs.front().usage, 0.02);
  EXPECT_EQ(recs.back().age, 3.60);
  EXPECT_EQ(recs.back().usage, 6.23);
}

TEST(Loader, ColumnsByNameAndScale) {
  std::istringstream in("# note\nu,x,t\n1,9,2\n3,9,4\n");
  const auto recs = parse_dataset(in, {"t", "u", 10.0});
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].age, 20.0);
  EXPECT_EQ(recs[0].usage, 10.0);
}

TEST(Loader, ErrorsCarryLineNumbers) {
  auto fails_with = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      parse_dataset(in, {}, "f.csv");
    } catch (const DataError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  EXPECT_TRUE(fails_with("age,usage\n1,2\nx,3\n", "f.csv:3:"));
  EXPECT_TRUE(fails_with("age,usage\n1,2\n---,3\n", "f.csv:3:"));
  EXPECT_TRUE(fails_with("age,usage\n1,2,3\n", "f.csv:2:"));
  EXPECT_TRUE(fails_with("time,usage\n1,2\n", "no column 'age'"));
  EXPECT_THROW(load_dataset("/nonexistent/file.csv"), DataError);
}

TEST(Censoring, PaddingAndThresholds) {
  const auto d36 = bwtest::dataset1();
  EXPECT_EQ(d36.size(), 36u);
  EXPECT_EQ(d36.failures(), 34u);
  const auto d40 = bwtest::dataset1(40);
  EXPECT_EQ(d40.size(), 40u);
  EXPECT_EQ(d40.censored(), 6u);
  EXPECT_THROW(bwtest::dataset1(30), std::invalid_argument);
  const auto tight = apply_censoring(load_dataset(bwtest::data_file("dataset2.csv")), 2.0, 5.0);
  for (const auto& o : tight.observations) {
    if (o.failed) {
      EXPECT_LT(o.t, 2.0);
      EXPECT_LT(o.u, 5.0);
    } else {
      EXPECT_EQ(o.t, 2.0);
      EXPECT_EQ(o.u, 5.0);
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(apply_censoring(load_dataset(bwtest::data_file("dataset1.csv")), inf, inf), std::invalid_argument);
}

TEST(Censoring, Idempotent) {
  const auto d = apply_censoring(load_dataset(bwtest::data_file("dataset2.csv")), 3.0, 7.0);
  EXPECT_EQ(apply_censoring(d, 3.0, 7.0), d);
}

TEST(Serialization, DatasetRoundTrip) {
  std::mt19937_64 rng(4);
  const auto d = simulate_dataset(ParamVector{1.3, 1.1, 0.7, 0.9, 0.4}, 50, 2.0, 1.0, rng);
  write_dataset(d, scratch("d.csv").string(), scratch("d.json").string());
  EXPECT_EQ(read_dataset(scratch("d.csv").string(), scratch("d.json").string()), d);
  const auto d2 = bwtest::dataset2();
  write_dataset(d2, scratch("d2.csv").string(), scratch("d2.json").string());
  EXPECT_EQ(read_dataset(scratch("d2.csv").string(), scratch("d2.json").string()), d2);
}

TEST(Serialization, ChainRoundTripAndTraces) {
  PosteriorChain c;
  c.seed = 77;
  c.n_iter = 13;
  c.burn_in = 10;
  c.acceptance_rate = 1.0 / 3.0;
  c.draws = {{1.0 / 3.0, 2.0, 0.1, 1e-7, 0.5}, {2.5, 1.25, 3.0, 0.7, 0.999}, {1, 1, 1, 1, 0.25}};
  write_chain(c, scratch("c.csv").string(), scratch("c.json").string());
  const auto back = read_chain(scratch("c.csv").string(), scratch("c.json").string());
  EXPECT_EQ(back.draws, c.draws);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.acceptance_rate, c.acceptance_rate);
  const auto paths = write_traces(c, scratch("").string());
  ASSERT_EQ(paths.size(), 5u);
  std::ifstream in(paths[0]);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "iteration,eta_t");
  EXPECT_EQ(first.substr(0, 3), "11,");
}

TEST(Weibull, FitIsStationaryForProfileLikelihood) {
  std::mt19937_64 rng(6);
  std::weibull_distribution<double> w(1.7, 2.2);  // shape, scale
  std::vector<double> x(400);
  for (auto& v : x) v = w(rng);
  const auto fit = fit_weibull(x);
  auto ll = [&](double eta, double lam) {
    double s = 0;
    for (double v : x) s += std::log(lam / eta) + (lam - 1) * std::log(v / eta) - std::pow(v / eta, lam);
    return s;
  };
  const double base = ll(fit.eta, fit.lambda);
  for (double d : {-1e-3, 1e-3}) {
    EXPECT_LE(ll(fit.eta * (1 + d), fit.lambda), base);
    EXPECT_LE(ll(fit.eta, fit.lambda * (1 + d)), base);
  }
  EXPECT_NEAR(fit.lambda, 1.7, 0.2);
  EXPECT_NEAR(fit.eta, 2.2, 0.2);
}

TEST(AndersonDarling, SimplePValueMatchesSimulatedNull) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t reps = 20000;
  const double a2 = 1.14055;
  std::size_t exceed = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    std::vector<double> u(43);
    for (auto& v : u) v = U(rng);
    exceed += ad_uniform(u) > a2;
  }
  const double p = static_cast<double>(exceed) / reps;
  EXPECT_NEAR(anderson_darling_pvalue_simple(a2, 43), p, 3 * std::sqrt(p * (1 - p) / reps));
}

TEST(AndersonDarling, EstimatedPValueTableAnchors) {
  const double n = 43;
  const double adj = 1.0 + 0.2 / std::sqrt(n);
  EXPECT_NEAR(anderson_darling_pvalue_estimated(0.757 / adj, 43), 0.05, 1e-9);
  EXPECT_NEAR(anderson_darling_pvalue_estimated(0.474 / adj, 43), 0.25, 1e-9);
  EXPECT_GT(anderson_darling_pvalue_estimated(0.5, 43), anderson_darling_pvalue_estimated(0.7, 43));
}

TEST(Diagnostics, Dataset2MarginalsAndCorrelation) {
  const auto d = marginal_diagnostics(bwtest::dataset2());
  EXPECT_EQ(d.n, 43u);
  // Reported as scale 2.079 / 5.797 and shape 1.788 / 1.846.
  EXPECT_NEAR(d.age.eta, 2.079, 2e-3);
  EXPECT_NEAR(d.age.lambda, 1.788, 2e-3);
  EXPECT_NEAR(d.usage.eta, 5.797, 2e-3);
  EXPECT_NEAR(d.usage.lambda, 1.846, 2e-3);
  EXPECT_NEAR(d.pearson_r, 0.8539, 1e-4);
  EXPECT_NEAR(d.ad_p_age, 0.2907, 0.02);
  EXPECT_NEAR(d.ad_p_usage, 0.2226, 0.02);
  EXPECT_LT(d.ad_p_age_estimated, 0.05);
  EXPECT_EQ(d.qq_age.size(), 43u);
}

TEST(Diagnostics, PearsonAgainstDirectFormula) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 6};
  // sxy = 10, sxx = 10, syy = 14.8
  EXPECT_NEAR(pearson_correlation(x, y), 10.0 / std::sqrt(148.0), 1e-12);
}
