#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bayeswarranty/io.hpp"
#include "bayeswarranty/pipeline.hpp"
#include "test_util.hpp"

using namespace bw;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path workdir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "bw_test_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json small_config(const std::string& dataset, double t0, double u0) {
  json j;
  j["dataset"] = {{"path", bwtest::data_file(dataset)}};
  j["censoring"] = {{"t0", t0}, {"u0", u0}};
  j["mcmc"] = {{"n_iter", 1500}, {"burn_in", 500}, {"seed", 11}};
  j["costs"] = {{"lt", "derive"}, {"lu", "derive"}, {"t_w", "derive"}, {"u_w", "derive"}, {"nodes", 8}};
  j["optimizer"] = {{"restarts", 1}, {"max_draws", 20}, {"x_tol", 1e-3}};
  j["threads"] = 1;
  return j;
}

fs::path write_json_file(const fs::path& p, const json& j) {
  std::ofstream(p) << j.dump(2);
  return p;
}

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args, const fs::path& dir) {
  const auto o = dir / "stdout.txt";
  const auto e = dir / "stderr.txt";
  const std::string cmd = std::string(BWARRANTY_EXE) + " " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Config, ParsesBundledConfigs) {
  const fs::path dir = fs::path(BAYESWARRANTY_DATA_DIR).parent_path() / "configs";
  const auto c1 = load_run_config((dir / "dataset1.json").string());
  EXPECT_EQ(c1.t0, 5.0);
  EXPECT_EQ(c1.u0, 2.0);
  EXPECT_EQ(c1.prior_source, PriorSource::kExplicit);
  EXPECT_TRUE(fs::exists(c1.dataset_path));
  ASSERT_TRUE(c1.init.has_value());
  EXPECT_EQ(c1.optimizer.cost.cdf, CdfReading::kRectangle);
  const auto c2 = load_run_config((dir / "dataset2.json").string());
  EXPECT_TRUE(std::isinf(c2.t0));
  EXPECT_FALSE(c2.lt.has_value());
  EXPECT_TRUE(c2.a2.has_value());
  EXPECT_NO_THROW(load_run_config((dir / "dataset1_derived.json").string()));
  EXPECT_NO_THROW(load_run_config((dir / "dataset2_censoring.json").string()));
}

TEST(Config, RejectsBadInput) {
  const auto base = small_config("dataset1.csv", 5, 2);
  auto bad = [&](auto mutate) {
    json j = base;
    mutate(j);
    return j;
  };
  EXPECT_THROW(parse_run_config(bad([](json& j) { j["extra"] = 1; }), "."), ConfigError);
  EXPECT_THROW(parse_run_config(bad([](json& j) { j["costs"]["a2"] = 3.0; }), "."), ConfigError);
  EXPECT_THROW(parse_run_config(bad([](json& j) { j["costs"]["cdf_reading"] = "other"; }), "."), ConfigError);
  EXPECT_THROW(parse_run_config(bad([](json& j) { j["costs"]["q_star"] = 0.4; }), "."), ConfigError);
  EXPECT_THROW(parse_run_config(bad([](json& j) { j["mcmc"]["burn_in"] = 1500; }), "."), ConfigError);
  EXPECT_THROW(parse_run_config(bad([](json& j) { j["optimizer"]["init"] = {0.5, 0.2, 0.1, 0.2}; }), "."),
               ConfigError);
  EXPECT_THROW(parse_run_config(bad([](json& j) { j.erase("dataset"); }), "."), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), DataError);
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  json j = small_config("dataset1.csv", 5, 2);
  j["dataset"]["path"] = "sub/d.csv";
  j["output"] = "o";
  const auto c = parse_run_config(j, "/a/b");
  EXPECT_EQ(c.dataset_path, "/a/b/sub/d.csv");
  EXPECT_EQ(c.out_dir, "/a/b/o");
}

TEST(Config, EchoReparsesToSameSettings) {
  const fs::path dir = fs::path(BAYESWARRANTY_DATA_DIR).parent_path() / "configs";
  for (const char* name : {"dataset1.json", "dataset2.json", "dataset1_derived.json"}) {
    const auto c = load_run_config((dir / name).string());
    const auto echo = to_json(c);
    EXPECT_EQ(to_json(parse_run_config(echo, "/")), echo) << name;
  }
}

TEST(DerivedCosts, ExplicitRateBackComputesReference) {
  RunConfig c = parse_run_config(small_config("dataset2.csv", 1e9, 1e9), ".");
  c.lt = 2.0;
  c.lu = 5.0;
  c.t_w.reset();
  c.a2 = 11.41033;
  c.u_w = 0.5;
  const auto d = derive_costs(c, PosteriorChain{});
  EXPECT_EQ(d.cfg.a2, 11.41033);
  EXPECT_TRUE(d.rates_explicit_t);
  EXPECT_NEAR(calibrate_benefit_rate(d.calibration.t_w, c.q_star_t), 11.41033, 1e-9);
  EXPECT_NEAR(d.cfg.a3, calibrate_benefit_rate(0.5, 0.75), 1e-12);
  c.lu.reset();
  EXPECT_THROW(derive_costs(c, PosteriorChain{}), std::invalid_argument);
}

TEST(DerivedCosts, QuantilesFromChain) {
  PosteriorChain chain;
  chain.draws.push_back({1.6, 1.0, 0.75, 0.91, 0.18});
  RunConfig c = parse_run_config(small_config("dataset1.csv", 5, 2), ".");
  const auto d = derive_costs(c, chain);
  EXPECT_NEAR(d.cfg.lt, predictive_quantile(Scale::kAge, 0.5, chain), 1e-12);
  EXPECT_NEAR(d.calibration.u_w, predictive_quantile(Scale::kUsage, 0.1, chain), 1e-12);
  EXPECT_NEAR(d.cfg.a2, calibrate_benefit_rate(d.calibration.t_w, 0.75), 1e-12);
}

TEST(Grid, ParsesRowsAndColumns) {
  const auto g = parse_grid(json::parse(R"({"rows":[{"s":300},{"t0":2,"u0":5}]})"));
  ASSERT_EQ(g.rows.size(), 2u);
  EXPECT_EQ(g.columns, (std::vector<std::string>{"s", "t0", "u0"}));
  EXPECT_TRUE(g.censoring());
  EXPECT_EQ(g.rows[0].costs.at("s"), 300);
  EXPECT_TRUE(parse_grid(json::parse(R"({"rows":[]})")).rows.empty());
  EXPECT_THROW(parse_grid(json::parse(R"({"rows":[{"s":"x"}]})")), ConfigError);
  EXPECT_THROW(parse_grid(json::parse(R"({"cols":[]})")), ConfigError);
}

TEST(Cli, MissingConfigExitsTwoAndNamesPath) {
  const auto dir = workdir("missing");
  const auto r = cli("fit --config /nonexistent/cfg.json", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/cfg.json"), std::string::npos);
  EXPECT_EQ(cli("", dir).code, 2);
  EXPECT_EQ(cli("fit", dir).code, 2);
}

TEST(Cli, MissingDatasetExitsTwo) {
  const auto dir = workdir("nodata");
  json j = small_config("dataset1.csv", 5, 2);
  j["dataset"]["path"] = "/nonexistent/data.csv";
  const auto cfg = write_json_file(dir / "c.json", j);
  const auto r = cli("fit --config " + cfg.string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/data.csv"), std::string::npos);
}

TEST(Cli, DryRunEchoesResolvedConfig) {
  const auto dir = workdir("dry");
  const auto cfg = write_json_file(dir / "c.json", small_config("dataset1.csv", 5, 2));
  const auto r = cli("sample --config " + cfg.string() + " --seed 99 --dry-run --out " + (dir / "o").string(), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto echo = json::parse(r.out);
  EXPECT_EQ(echo["mcmc"]["seed"], 99);
  EXPECT_FALSE(fs::exists(dir / "o" / "chain.csv"));
}

TEST(Cli, SampleIsReproducibleForFixedSeed) {
  const auto dir = workdir("seed");
  const auto cfg = write_json_file(dir / "c.json", small_config("dataset1.csv", 5, 2));
  ASSERT_EQ(cli("sample --config " + cfg.string() + " --seed 5 --out " + (dir / "a").string(), dir).code, 0);
  ASSERT_EQ(cli("sample --config " + cfg.string() + " --seed 5 --out " + (dir / "b").string(), dir).code, 0);
  ASSERT_EQ(cli("sample --config " + cfg.string() + " --seed 6 --out " + (dir / "c").string(), dir).code, 0);
  const auto a = slurp(dir / "a" / "chain.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b" / "chain.csv"));
  EXPECT_NE(a, slurp(dir / "c" / "chain.csv"));
  EXPECT_TRUE(fs::exists(dir / "a" / "trace_theta.csv"));
  const auto p = json::parse(slurp(dir / "a" / "predictive.json"));
  EXPECT_GT(p["L_t"].get<double>(), p["t_w"].get<double>());
}

TEST(Cli, SingleRetainedDraw) {
  const auto dir = workdir("one");
  json j = small_config("dataset1.csv", 5, 2);
  j["mcmc"] = {{"n_iter", 501}, {"burn_in", 500}, {"seed", 3}};
  const auto cfg = write_json_file(dir / "c.json", j);
  const auto r = cli("sample --config " + cfg.string() + " --out " + (dir / "o").string(), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(dir / "o" / "chain.csv")).size(), 2u);
}

TEST(Cli, OptimizeOnStubChainReportsConsistentUtility) {
  const auto dir = workdir("opt");
  PosteriorChain stub;
  stub.draws.push_back({1.6, 1.0, 0.75, 0.91, 0.18});
  write_chain(stub, (dir / "chain.csv").string(), (dir / "chain.json").string());
  json j = small_config("dataset1.csv", 5, 2);
  j["costs"] = {{"lt", 1.02}, {"lu", 0.6547}, {"nodes", 8}};
  j["optimizer"] = {{"restarts", 2}, {"x_tol", 1e-4}};
  const auto cfg = write_json_file(dir / "c.json", j);
  const auto r = cli("optimize --config " + cfg.string() + " --chain " + (dir / "chain.csv").string() +
                         " --paper-literal-d --out " + (dir / "o").string(),
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto o = json::parse(slurp(dir / "o" / "optimize.json"));
  for (const char* v : {"default", "paper_literal"}) {
    ASSERT_TRUE(o.contains(v)) << v;
    EXPECT_EQ(o[v]["utility"].get<double>(), o[v]["recomputed_utility"].get<double>()) << v;
    const auto& reg = o[v]["region"];
    EXPECT_LE(reg["t_w1"].get<double>(), reg["t_w2"].get<double>());
    EXPECT_LE(reg["t_w2"].get<double>(), 1.02);
    EXPECT_LE(reg["u_w2"].get<double>(), 0.6547);
  }
}

TEST(Cli, EmptyGridGivesHeaderOnlyCsv) {
  const auto dir = workdir("empty");
  PosteriorChain stub;
  stub.draws.push_back({1.6, 1.0, 0.75, 0.91, 0.18});
  write_chain(stub, (dir / "chain.csv").string(), (dir / "chain.json").string());
  const auto cfg = write_json_file(dir / "c.json", small_config("dataset1.csv", 5, 2));
  const auto grid = write_json_file(dir / "g.json", json::parse(R"({"rows":[]})"));
  const auto r = cli("sensitivity --config " + cfg.string() + " --grid " + grid.string() + " --chain " +
                         (dir / "chain.csv").string() + " --out " + (dir / "o").string(),
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(dir / "o" / "sensitivity.csv"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].rfind("t_w,u_w,a2,a3", 0), 0u);
}

TEST(Cli, CensoringGridRederivesRatesPerRow) {
  const auto dir = workdir("cens");
  const auto cfg = write_json_file(dir / "c.json", small_config("dataset2.csv", 4, 10));
  const auto grid = write_json_file(dir / "g.json", json::parse(R"({"rows":[{"t0":2,"u0":5},{"t0":4,"u0":10}]})"));
  const auto r = cli("sensitivity --config " + cfg.string() + " --grid " + grid.string() + " --out " +
                         (dir / "o").string(),
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(dir / "o" / "sensitivity.csv"));
  ASSERT_EQ(rows.size(), 3u);
  auto field = [](const std::string& row, std::size_t k) {
    std::stringstream ss(row);
    std::string cell;
    for (std::size_t i = 0; i <= k; ++i) std::getline(ss, cell, ',');
    return cell;
  };
  EXPECT_EQ(field(rows[0], 4), "a2");
  EXPECT_NE(field(rows[1], 4), field(rows[2], 4));
}
