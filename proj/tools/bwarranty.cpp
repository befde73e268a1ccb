// bwarranty: fit, sample, optimize, sensitivity and diagnostics subcommands.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bayeswarranty/io.hpp"
#include "bayeswarranty/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kComputeFailure = 1;
constexpr int kUsageError = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
  bool literal_d = false;
  bool dry_run = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "run configuration (JSON)")->required();
  sub->add_option("--seed", c.seed, "MCMC seed (overrides mcmc.seed)");
  sub->add_option("--threads", c.threads, "worker cap; 0 = all cores");
  sub->add_option("--out", c.out, "output directory (overrides output)");
  sub->add_flag("--paper-literal-d", c.literal_d, "also evaluate the literal dissatisfaction terms");
  sub->add_flag("--dry-run", c.dry_run, "print the resolved configuration and exit");
}

bw::RunConfig resolve(const Common& c) {
  bw::RunConfig rc = bw::load_run_config(c.config);
  if (c.seed) rc.mcmc.seed = *c.seed;
  if (c.threads) rc.threads = *c.threads;
  if (!c.out.empty()) rc.out_dir = c.out;
  fs::create_directories(rc.out_dir);
  return rc;
}

std::string out_path(const bw::RunConfig& rc, const std::string& name) { return (fs::path(rc.out_dir) / name).string(); }

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw bw::DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

json psi_json(const bw::ParamVector& p) {
  json j;
  const auto a = p.to_array();
  for (std::size_t k = 0; k < a.size(); ++k) j[bw::ParamVector::kNames[k]] = a[k];
  return j;
}

json region_json(const bw::WarrantyRegion& r) {
  return {{"t_w1", r.t_w1}, {"t_w2", r.t_w2}, {"u_w1", r.u_w1}, {"u_w2", r.u_w2}};
}

json costs_json(const bw::DerivedCosts& d) {
  return {{"s", d.cfg.s},   {"c", d.cfg.c},   {"a1", d.cfg.a1}, {"m", d.cfg.m},     {"a2", d.cfg.a2},
          {"a3", d.cfg.a3}, {"lt", d.cfg.lt}, {"lu", d.cfg.lu}, {"q1t", d.cfg.q1t}, {"q2t", d.cfg.q2t},
          {"q1u", d.cfg.q1u}, {"q2u", d.cfg.q2u}, {"t_w", d.calibration.t_w}, {"u_w", d.calibration.u_w},
          {"q_star_t", d.calibration.q_star_t}, {"q_star_u", d.calibration.q_star_u}};
}

json breakdown_json(const bw::CostBreakdown& b) {
  return {{"economic_benefit", b.economic_benefit},
          {"warranty_cost", b.warranty_cost},
          {"dissatisfaction_cost", b.dissatisfaction_cost},
          {"utility", b.utility},
          {"w_mass", b.w_mass},
          {"w_integral", b.w_integral},
          {"d_mass", b.d_mass},
          {"d_integral", b.d_integral}};
}

void print_psi_table(const bw::MleResult& m) {
  std::printf("%-10s %-12s %-12s\n", "param", "estimate", "std_error");
  const auto a = m.psi_hat.to_array();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const std::string se = m.std_errors ? bw::sig6((*m.std_errors)[k]) : "NA";
    std::printf("%-10s %-12s %-12s\n", bw::ParamVector::kNames[k], bw::sig6(a[k]).c_str(), se.c_str());
  }
  std::printf("log-likelihood %s\n", bw::sig6(m.log_lik).c_str());
}

json fit_json(const bw::Dataset& d, const bw::MleResult& m) {
  json j;
  j["n"] = d.size();
  j["failures"] = d.failures();
  j["t0"] = std::isfinite(d.t0) ? json(d.t0) : json(nullptr);
  j["u0"] = std::isfinite(d.u0) ? json(d.u0) : json(nullptr);
  j["psi_hat"] = psi_json(m.psi_hat);
  if (m.std_errors) {
    json se;
    for (std::size_t k = 0; k < 5; ++k) se[bw::ParamVector::kNames[k]] = (*m.std_errors)[k];
    j["std_errors"] = se;
  } else {
    j["std_errors"] = nullptr;
  }
  j["log_lik"] = m.log_lik;
  j["converged"] = m.converged;
  j["iterations"] = m.iterations;
  return j;
}

int cmd_fit(const Common& c) {
  const auto rc = resolve(c);
  const auto data = bw::load_data(rc);
  const auto mle = bw::fit_mle(data);
  json j = fit_json(data, mle);
  if (data.failures() >= 8) {
    const auto dg = bw::marginal_diagnostics(data);
    j["diagnostics"] = {{"pearson_r", dg.pearson_r},
                        {"ad_p_age", dg.ad_p_age},
                        {"ad_p_usage", dg.ad_p_usage}};
  }
  write_json(out_path(rc, "fit.json"), j);
  print_psi_table(mle);
  if (!mle.converged) {
    std::fprintf(stderr, "fit: optimizer did not converge\n");
    return kComputeFailure;
  }
  return kOk;
}

json predictive_json(const bw::PosteriorChain& chain, const bw::PriorHyper& prior) {
  return {{"draws", chain.size()},
          {"acceptance_rate", chain.acceptance_rate},
          {"posterior_mean", psi_json(bw::posterior_mean(chain))},
          {"prior", {{"a", prior.a}, {"b", prior.b}}},
          {"L_t", bw::predictive_quantile(bw::Scale::kAge, 0.5, chain)},
          {"L_u", bw::predictive_quantile(bw::Scale::kUsage, 0.5, chain)},
          {"t_w", bw::predictive_quantile(bw::Scale::kAge, 0.1, chain)},
          {"u_w", bw::predictive_quantile(bw::Scale::kUsage, 0.1, chain)}};
}

void write_chain_files(const bw::RunConfig& rc, const bw::PosteriorChain& chain) {
  bw::write_chain(chain, out_path(rc, "chain.csv"), out_path(rc, "chain.json"));
  bw::write_traces(chain, rc.out_dir);
}

int cmd_sample(const Common& c) {
  const auto rc = resolve(c);
  const auto data = bw::load_data(rc);
  const auto mle = bw::fit_mle(data);
  const auto prior = bw::resolve_prior(rc, mle);
  bw::PosteriorChain chain;
  try {
    chain = bw::mh_sample(data, prior, mle.psi_hat, rc.mcmc);
  } catch (const bw::McmcError& e) {
    write_chain_files(rc, e.chain);
    std::fprintf(stderr, "sample: %s\n", e.what());
    return kComputeFailure;
  }
  write_chain_files(rc, chain);
  const json p = predictive_json(chain, prior);
  write_json(out_path(rc, "predictive.json"), p);
  std::printf("draws %zu  acceptance %s\n", chain.size(), bw::sig6(chain.acceptance_rate).c_str());
  for (const char* k : {"L_t", "L_u", "t_w", "u_w"}) std::printf("%-4s %s\n", k, bw::sig6(p[k].get<double>()).c_str());
  return kOk;
}

/// The chain from --chain (with its sidecar when present), or a fresh run.
bw::PosteriorChain obtain_chain(const bw::RunConfig& rc, const std::string& chain_path) {
  if (!chain_path.empty()) {
    const fs::path sidecar = fs::path(chain_path).replace_extension(".json");
    return bw::read_chain(chain_path, fs::exists(sidecar) ? sidecar.string() : "");
  }
  const auto data = bw::load_data(rc);
  const auto mle = bw::fit_mle(data);
  return bw::mh_sample(data, bw::resolve_prior(rc, mle), mle.psi_hat, rc.mcmc);
}

json optimize_variant(const bw::PosteriorChain& chain, const bw::DerivedCosts& costs, const bw::RunConfig& rc,
                      bool literal, bool& converged) {
  auto opt = bw::optimizer_options(rc);
  opt.cost.paper_literal_d = literal;
  const auto res = bw::optimize_region(chain, costs.cfg, rc.init, opt);
  const auto used = bw::objective_chain(chain, opt);
  const auto br = bw::cost_breakdown(res.region, used, costs.cfg, opt.cost);
  converged = converged && res.converged;
  std::printf("%-14s t_w1 %-10s t_w2 %-10s u_w1 %-10s u_w2 %-10s utility %s\n", literal ? "paper-literal" : "default",
              bw::sig6(res.region.t_w1).c_str(), bw::sig6(res.region.t_w2).c_str(), bw::sig6(res.region.u_w1).c_str(),
              bw::sig6(res.region.u_w2).c_str(), bw::sig6(res.utility).c_str());
  return {{"region", region_json(res.region)},
          {"utility", res.utility},
          {"recomputed_utility", br.utility},
          {"converged", res.converged},
          {"iterations", res.iterations},
          {"restarts", res.restarts_used},
          {"boundary", res.boundary},
          {"breakdown", breakdown_json(br)},
          {"objective_draws", used.size()},
          {"cdf_reading", bw::detail::reading_name(opt.cost.cdf)},
          {"paper_literal_d", literal}};
}

int cmd_optimize(const Common& c, const std::string& chain_path) {
  const auto rc = resolve(c);
  const auto chain = obtain_chain(rc, chain_path);
  const auto costs = bw::derive_costs(rc, chain);
  bool converged = true;
  json j;
  j["constants"] = costs_json(costs);
  j["chain_draws"] = chain.size();
  j["default"] = optimize_variant(chain, costs, rc, rc.optimizer.cost.paper_literal_d, converged);
  if (c.literal_d && !rc.optimizer.cost.paper_literal_d) {
    j["paper_literal"] = optimize_variant(chain, costs, rc, true, converged);
  }
  write_json(out_path(rc, "optimize.json"), j);
  if (!converged) {
    std::fprintf(stderr, "optimize: no restart converged; best-effort result written\n");
    return kComputeFailure;
  }
  return kOk;
}

int cmd_sensitivity(const Common& c, const std::string& grid_path, const std::string& chain_path) {
  const auto rc = resolve(c);
  const auto grid = bw::load_grid(grid_path);
  bw::PosteriorChain chain;
  bool need_chain = false;
  for (const auto& r : grid.rows) need_chain = need_chain || !(r.t0 || r.u0);
  if (need_chain) chain = obtain_chain(rc, chain_path);
  auto rcv = rc;
  if (c.literal_d) rcv.optimizer.cost.paper_literal_d = true;
  const auto rows = bw::run_scan(rcv, grid, chain);

  std::ofstream out(out_path(rc, "sensitivity.csv"));
  if (!out) throw bw::DataError("cannot write '" + out_path(rc, "sensitivity.csv") + "'");
  for (const auto& col : grid.columns) out << col << ',';
  out << "t_w,u_w,a2,a3,t_w1,t_w2,u_w1,u_w2,utility,converged,error\n";
  for (const auto& col : grid.columns) std::printf("%-10s ", col.c_str());
  std::printf("%-10s %-10s %-10s %-10s %-10s %-10s %s\n", "a2", "a3", "t_w1", "t_w2", "u_w1", "u_w2", "utility");
  for (const auto& s : rows) {
    for (const auto& col : grid.columns) {
      double v = 0.0;
      if (col == "t0") {
        v = s.varied.t0.value_or(rc.t0);
      } else if (col == "u0") {
        v = s.varied.u0.value_or(rc.u0);
      } else {
        v = s.varied.costs.count(col) ? s.varied.costs.at(col) : 0.0;
      }
      out << bw::full_precision(v) << ',';
      std::printf("%-10s ", bw::sig6(v).c_str());
    }
    if (s.result) {
      const auto& r = *s.result;
      for (double v : {s.calibration.t_w, s.calibration.u_w, s.cfg.a2, s.cfg.a3, r.region.t_w1, r.region.t_w2,
                       r.region.u_w1, r.region.u_w2, r.utility}) {
        out << bw::full_precision(v) << ',';
      }
      out << (r.converged ? 1 : 0) << ",\n";
      std::printf("%-10s %-10s %-10s %-10s %-10s %-10s %s\n", bw::sig6(s.cfg.a2).c_str(), bw::sig6(s.cfg.a3).c_str(),
                  bw::sig6(r.region.t_w1).c_str(), bw::sig6(r.region.t_w2).c_str(), bw::sig6(r.region.u_w1).c_str(),
                  bw::sig6(r.region.u_w2).c_str(), bw::sig6(r.utility).c_str());
    } else {
      std::string msg = s.error;
      for (char& ch : msg) {
        if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
      }
      out << ",,,,,,,,,0," << msg << '\n';
      std::printf("FAILED: %s\n", s.error.c_str());
    }
  }
  return kOk;
}

void write_qq(const std::string& path, const std::vector<bw::QqPoint>& pts) {
  std::ofstream out(path);
  if (!out) throw bw::DataError("cannot write '" + path + "'");
  out << "theoretical,observed\n";
  for (const auto& p : pts) out << bw::full_precision(p.theoretical) << ',' << bw::full_precision(p.observed) << '\n';
}

int cmd_diagnostics(const Common& c) {
  const auto rc = resolve(c);
  const auto data = bw::load_data(rc);
  const auto d = bw::marginal_diagnostics(data);
  const json j = {{"n", d.n},
                  {"age", {{"scale", d.age.eta}, {"shape", d.age.lambda}}},
                  {"usage", {{"scale", d.usage.eta}, {"shape", d.usage.lambda}}},
                  {"ad_statistic", {{"age", d.ad_stat_age}, {"usage", d.ad_stat_usage}}},
                  {"ad_p_value", {{"age", d.ad_p_age}, {"usage", d.ad_p_usage}}},
                  {"ad_p_value_estimated", {{"age", d.ad_p_age_estimated}, {"usage", d.ad_p_usage_estimated}}},
                  {"pearson_r", d.pearson_r}};
  write_json(out_path(rc, "diagnostics.json"), j);
  write_qq(out_path(rc, "qq_age.csv"), d.qq_age);
  write_qq(out_path(rc, "qq_usage.csv"), d.qq_usage);
  std::printf("%-6s %-10s %-10s %-10s %-10s\n", "scale", "w_scale", "w_shape", "AD", "p");
  std::printf("%-6s %-10s %-10s %-10s %-10s\n", "age", bw::sig6(d.age.eta).c_str(), bw::sig6(d.age.lambda).c_str(),
              bw::sig6(d.ad_stat_age).c_str(), bw::sig6(d.ad_p_age).c_str());
  std::printf("%-6s %-10s %-10s %-10s %-10s\n", "usage", bw::sig6(d.usage.eta).c_str(),
              bw::sig6(d.usage.lambda).c_str(), bw::sig6(d.ad_stat_usage).c_str(), bw::sig6(d.ad_p_usage).c_str());
  std::printf("pearson r %s\n", bw::sig6(d.pearson_r).c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian two-dimensional warranty design"};
  app.require_subcommand(1);
  Common common;
  std::string chain_path;
  std::string grid_path;

  auto* fit = app.add_subcommand("fit", "maximum likelihood fit");
  auto* sample = app.add_subcommand("sample", "posterior sampling and predictive summaries");
  auto* optimize = app.add_subcommand("optimize", "expected-utility optimal warranty region");
  auto* sensitivity = app.add_subcommand("sensitivity", "re-optimize over a parameter grid");
  auto* diagnostics = app.add_subcommand("diagnostics", "marginal Weibull fits and goodness of fit");
  for (auto* s : {fit, sample, optimize, sensitivity, diagnostics}) add_common(s, common);
  optimize->add_option("--chain", chain_path, "reuse a chain CSV instead of sampling");
  sensitivity->add_option("--chain", chain_path, "reuse a chain CSV instead of sampling");
  sensitivity->add_option("--grid", grid_path, "grid specification (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (common.dry_run) {
      auto rc = bw::load_run_config(common.config);
      if (common.seed) rc.mcmc.seed = *common.seed;
      if (common.threads) rc.threads = *common.threads;
      if (!common.out.empty()) rc.out_dir = common.out;
      std::cout << bw::to_json(rc).dump(2) << '\n';
      return kOk;
    }
    if (*fit) return cmd_fit(common);
    if (*sample) return cmd_sample(common);
    if (*optimize) return cmd_optimize(common, chain_path);
    if (*sensitivity) return cmd_sensitivity(common, grid_path, chain_path);
    if (*diagnostics) return cmd_diagnostics(common);
  } catch (const bw::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const bw::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kComputeFailure;
  }
  return kUsageError;
}
