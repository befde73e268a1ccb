#pragma once

// Run configuration (JSON) and the fit -> sample -> optimize pipeline the CLI
// is built on.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bayeswarranty/costs.hpp"
#include "bayeswarranty/data.hpp"
#include "bayeswarranty/inference.hpp"
#include "bayeswarranty/mcmc.hpp"
#include "bayeswarranty/optimizer.hpp"

namespace bw {

/// Bad or inconsistent configuration (a usage error, not a numerical one).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PriorSource { kElicit, kExplicit };

struct RunConfig {
  std::string dataset_path;
  CsvSchema schema;
  double t0 = std::numeric_limits<double>::infinity();
  double u0 = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> pad_to_n;

  PriorSource prior_source = PriorSource::kElicit;
  PriorHyper prior;  // used when prior_source is explicit

  McmcConfig mcmc;

  CostConfig costs;
  // nullopt means "derive from the chain": medians for the lives, 0.1
  // quantiles for the calibration points.
  std::optional<double> lt = 1.020, lu = 0.6547;
  std::optional<double> t_w = 0.2006, u_w = 0.0787;
  std::optional<double> a2, a3;  // explicit rates, exclusive with t_w / u_w
  double q_star_t = 0.75;
  double q_star_u = 0.75;
  double life_prob = 0.5;
  double calibration_prob = 0.1;

  OptimizerOptions optimizer;
  std::optional<WarrantyRegion> init;

  std::string out_dir = "out";
  std::size_t threads = 0;  // 0 = all cores
};

namespace detail {

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

inline double threshold_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) throw ConfigError("censoring thresholds must be numbers or null");
  return j.get<double>();
}

/// A number, or the string "derive" (returns nullopt).
inline std::optional<double> number_or_derive(const nlohmann::json& j, const std::string& key) {
  if (j.is_string() && j.get<std::string>() == "derive") return std::nullopt;
  if (!j.is_number()) throw ConfigError("costs." + key + " must be a number or \"derive\"");
  return j.get<double>();
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

inline std::array<double, 5> five(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 5) throw ConfigError(what + " must be an array of 5 numbers");
  std::array<double, 5> a{};
  for (std::size_t i = 0; i < 5; ++i) a[i] = j[i].get<double>();
  return a;
}

inline const char* reading_name(CdfReading r) { return r == CdfReading::kRectangle ? "rectangle" : "survival"; }
inline const char* method_name(CostMethod m) { return m == CostMethod::kEdge ? "edge" : "tensor"; }

}  // namespace detail

/// Parses a configuration object; relative paths resolve against base_dir.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    detail::reject_unknown(j, {"dataset", "censoring", "prior", "mcmc", "costs", "optimizer", "output", "threads"},
                           "config");
    const auto& ds = j.at("dataset");
    detail::reject_unknown(ds, {"path", "age_col", "usage_col", "scale_factor"}, "dataset");
    c.dataset_path = detail::resolve_path(ds.at("path").get<std::string>(), base_dir);
    c.schema.age_col = ds.value("age_col", c.schema.age_col);
    c.schema.usage_col = ds.value("usage_col", c.schema.usage_col);
    c.schema.scale_factor = ds.value("scale_factor", c.schema.scale_factor);

    if (j.contains("censoring")) {
      const auto& cj = j["censoring"];
      detail::reject_unknown(cj, {"t0", "u0", "pad_to_n"}, "censoring");
      if (cj.contains("t0")) c.t0 = detail::threshold_from_json(cj["t0"]);
      if (cj.contains("u0")) c.u0 = detail::threshold_from_json(cj["u0"]);
      if (cj.contains("pad_to_n") && !cj["pad_to_n"].is_null()) c.pad_to_n = cj["pad_to_n"].get<std::size_t>();
    }

    if (j.contains("prior")) {
      const auto& pj = j["prior"];
      detail::reject_unknown(pj, {"source", "a", "b"}, "prior");
      const std::string src = pj.value("source", "elicit");
      if (src == "elicit") {
        if (pj.contains("a") || pj.contains("b")) throw ConfigError("prior: a/b given with source \"elicit\"");
        c.prior_source = PriorSource::kElicit;
      } else if (src == "explicit") {
        c.prior_source = PriorSource::kExplicit;
        c.prior.a = detail::five(pj.at("a"), "prior.a");
        c.prior.b = detail::five(pj.at("b"), "prior.b");
        c.prior.validate();
      } else {
        throw ConfigError("prior.source must be \"elicit\" or \"explicit\"");
      }
    }

    if (j.contains("mcmc")) {
      const auto& mj = j["mcmc"];
      detail::reject_unknown(mj, {"n_iter", "burn_in", "seed", "proposal_scale", "min_acceptance", "max_acceptance",
                                  "min_guard_draws"},
                             "mcmc");
      c.mcmc.n_iter = mj.value("n_iter", c.mcmc.n_iter);
      c.mcmc.burn_in = mj.value("burn_in", c.mcmc.burn_in);
      c.mcmc.seed = mj.value("seed", c.mcmc.seed);
      c.mcmc.proposal_scale = mj.value("proposal_scale", c.mcmc.proposal_scale);
      c.mcmc.min_acceptance = mj.value("min_acceptance", c.mcmc.min_acceptance);
      c.mcmc.max_acceptance = mj.value("max_acceptance", c.mcmc.max_acceptance);
      c.mcmc.min_guard_draws = mj.value("min_guard_draws", c.mcmc.min_guard_draws);
    }

    if (j.contains("costs")) {
      const auto& k = j["costs"];
      detail::reject_unknown(k,
                             {"s", "c", "m", "q1t", "q2t", "q1u", "q2u", "lt", "lu", "t_w", "u_w", "a2", "a3",
                              "q_star", "q_star_t", "q_star_u", "cdf_reading", "paper_literal_d", "method", "nodes"},
                             "costs");
      auto& cc = c.costs;
      cc.s = k.value("s", cc.s);
      cc.c = k.value("c", cc.c);
      cc.a1 = cc.s - cc.c;
      cc.m = k.value("m", cc.m);
      cc.q1t = k.value("q1t", cc.q1t);
      cc.q2t = k.value("q2t", cc.q2t);
      cc.q1u = k.value("q1u", cc.q1u);
      cc.q2u = k.value("q2u", cc.q2u);
      if (k.contains("lt")) c.lt = detail::number_or_derive(k["lt"], "lt");
      if (k.contains("lu")) c.lu = detail::number_or_derive(k["lu"], "lu");
      if (k.contains("t_w") && k.contains("a2")) throw ConfigError("costs: give either t_w or a2, not both");
      if (k.contains("u_w") && k.contains("a3")) throw ConfigError("costs: give either u_w or a3, not both");
      if (k.contains("t_w")) c.t_w = detail::number_or_derive(k["t_w"], "t_w");
      if (k.contains("u_w")) c.u_w = detail::number_or_derive(k["u_w"], "u_w");
      if (k.contains("a2")) {
        c.a2 = k["a2"].get<double>();
        c.t_w.reset();
      }
      if (k.contains("a3")) {
        c.a3 = k["a3"].get<double>();
        c.u_w.reset();
      }
      if (k.contains("q_star") && (k.contains("q_star_t") || k.contains("q_star_u"))) {
        throw ConfigError("costs: q_star conflicts with q_star_t / q_star_u");
      }
      c.q_star_t = c.q_star_u = k.value("q_star", c.q_star_t);
      c.q_star_t = k.value("q_star_t", c.q_star_t);
      c.q_star_u = k.value("q_star_u", c.q_star_u);
      const std::string reading = k.value("cdf_reading", "rectangle");
      if (reading == "rectangle") {
        c.optimizer.cost.cdf = CdfReading::kRectangle;
      } else if (reading == "survival") {
        c.optimizer.cost.cdf = CdfReading::kSurvivalComplement;
      } else {
        throw ConfigError("costs.cdf_reading must be \"rectangle\" or \"survival\"");
      }
      c.optimizer.cost.paper_literal_d = k.value("paper_literal_d", false);
      const std::string method = k.value("method", "edge");
      if (method == "edge") {
        c.optimizer.cost.method = CostMethod::kEdge;
      } else if (method == "tensor") {
        c.optimizer.cost.method = CostMethod::kTensor;
      } else {
        throw ConfigError("costs.method must be \"edge\" or \"tensor\"");
      }
      c.optimizer.cost.nodes = k.value("nodes", c.optimizer.cost.nodes);
    }

    if (j.contains("optimizer")) {
      const auto& oj = j["optimizer"];
      detail::reject_unknown(oj, {"restarts", "seed", "max_draws", "x_tol", "max_iterations", "init"}, "optimizer");
      auto& o = c.optimizer;
      o.n_restarts = oj.value("restarts", o.n_restarts);
      o.seed = oj.value("seed", o.seed);
      o.max_draws = oj.value("max_draws", o.max_draws);
      o.x_tol = oj.value("x_tol", o.x_tol);
      o.max_iterations = oj.value("max_iterations", o.max_iterations);
      if (oj.contains("init") && !oj["init"].is_null()) {
        const auto& a = oj["init"];
        if (!a.is_array() || a.size() != 4) throw ConfigError("optimizer.init must be [t_w1, t_w2, u_w1, u_w2]");
        c.init = WarrantyRegion{a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>()};
        if (!c.init->valid()) throw ConfigError("optimizer.init is not an ordered region");
      }
    }

    if (j.contains("output")) c.out_dir = detail::resolve_path(j["output"].get<std::string>(), base_dir);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!(c.schema.scale_factor > 0)) throw ConfigError("dataset.scale_factor must be positive");
  if (!(c.q_star_t > 0.5 && c.q_star_t < 1) || !(c.q_star_u > 0.5 && c.q_star_u < 1)) {
    throw ConfigError("q_star must lie in (0.5, 1)");
  }
  if (c.mcmc.burn_in >= c.mcmc.n_iter) throw ConfigError("mcmc.burn_in must be smaller than mcmc.n_iter");
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_run_config(j, std::filesystem::path(path).parent_path());
}

/// The resolved configuration, as echoed by --dry-run.
inline nlohmann::json to_json(const RunConfig& c) {
  auto opt_num = [](const std::optional<double>& v) -> nlohmann::json {
    if (v) return *v;
    return "derive";
  };
  auto threshold = [](double x) -> nlohmann::json {
    if (std::isfinite(x)) return x;
    return nullptr;
  };
  nlohmann::json j;
  j["dataset"] = {{"path", c.dataset_path},
                  {"age_col", c.schema.age_col},
                  {"usage_col", c.schema.usage_col},
                  {"scale_factor", c.schema.scale_factor}};
  j["censoring"] = {{"t0", threshold(c.t0)}, {"u0", threshold(c.u0)}};
  j["censoring"]["pad_to_n"] = c.pad_to_n ? nlohmann::json(*c.pad_to_n) : nlohmann::json(nullptr);
  if (c.prior_source == PriorSource::kExplicit) {
    j["prior"] = {{"source", "explicit"}, {"a", c.prior.a}, {"b", c.prior.b}};
  } else {
    j["prior"] = {{"source", "elicit"}};
  }
  j["mcmc"] = {{"n_iter", c.mcmc.n_iter},
               {"burn_in", c.mcmc.burn_in},
               {"seed", c.mcmc.seed},
               {"proposal_scale", c.mcmc.proposal_scale},
               {"min_acceptance", c.mcmc.min_acceptance},
               {"max_acceptance", c.mcmc.max_acceptance},
               {"min_guard_draws", c.mcmc.min_guard_draws}};
  nlohmann::json k = {{"s", c.costs.s},
                      {"c", c.costs.c},
                      {"m", c.costs.m},
                      {"q1t", c.costs.q1t},
                      {"q2t", c.costs.q2t},
                      {"q1u", c.costs.q1u},
                      {"q2u", c.costs.q2u},
                      {"lt", opt_num(c.lt)},
                      {"lu", opt_num(c.lu)},
                      {"q_star_t", c.q_star_t},
                      {"q_star_u", c.q_star_u},
                      {"cdf_reading", detail::reading_name(c.optimizer.cost.cdf)},
                      {"paper_literal_d", c.optimizer.cost.paper_literal_d},
                      {"method", detail::method_name(c.optimizer.cost.method)},
                      {"nodes", c.optimizer.cost.nodes}};
  if (c.a2) {
    k["a2"] = *c.a2;
  } else {
    k["t_w"] = opt_num(c.t_w);
  }
  if (c.a3) {
    k["a3"] = *c.a3;
  } else {
    k["u_w"] = opt_num(c.u_w);
  }
  j["costs"] = k;
  j["optimizer"] = {{"restarts", c.optimizer.n_restarts},
                    {"seed", c.optimizer.seed},
                    {"max_draws", c.optimizer.max_draws},
                    {"x_tol", c.optimizer.x_tol},
                    {"max_iterations", c.optimizer.max_iterations}};
  j["optimizer"]["init"] = c.init ? nlohmann::json(c.init->to_array()) : nlohmann::json(nullptr);
  j["output"] = c.out_dir;
  j["threads"] = c.threads;
  return j;
}

// --- stages --------------------------------------------------------------------------

inline Dataset load_data(const RunConfig& c) {
  const auto records = load_dataset(c.dataset_path, c.schema);
  try {
    return apply_censoring(records, c.t0, c.u0, c.pad_to_n);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(c.dataset_path + ": " + e.what());
  }
}

/// Explicit hyperparameters, or method-of-moments on (psi_hat, SE^2).
inline PriorHyper resolve_prior(const RunConfig& c, const MleResult& mle) {
  if (c.prior_source == PriorSource::kExplicit) return c.prior;
  if (!mle.std_errors) throw std::runtime_error("prior elicitation needs standard errors; the Hessian is singular");
  std::array<double, 5> var{};
  for (std::size_t j = 0; j < 5; ++j) var[j] = (*mle.std_errors)[j] * (*mle.std_errors)[j];
  return elicit_hyperparams(mle.psi_hat, var);
}

/// Cost constants after resolving every "derive" entry against the chain.
struct DerivedCosts {
  CostConfig cfg;
  BenefitCalibration calibration;
  bool rates_explicit_t = false;
  bool rates_explicit_u = false;
};

inline DerivedCosts derive_costs(const RunConfig& c, const PosteriorChain& chain) {
  DerivedCosts d;
  d.cfg = c.costs;
  auto need_chain = [&] {
    if (chain.empty()) throw std::invalid_argument("deriving cost constants needs a non-empty chain");
  };
  if (c.lt) {
    d.cfg.lt = *c.lt;
  } else {
    need_chain();
    d.cfg.lt = predictive_quantile(Scale::kAge, c.life_prob, chain);
  }
  if (c.lu) {
    d.cfg.lu = *c.lu;
  } else {
    need_chain();
    d.cfg.lu = predictive_quantile(Scale::kUsage, c.life_prob, chain);
  }
  d.calibration.q_star_t = c.q_star_t;
  d.calibration.q_star_u = c.q_star_u;
  if (c.a2) {
    d.cfg.a2 = *c.a2;
    d.rates_explicit_t = true;
    d.calibration.t_w = 2.0 * logit(c.q_star_t) / *c.a2;
  } else {
    if (c.t_w) {
      d.calibration.t_w = *c.t_w;
    } else {
      need_chain();
      d.calibration.t_w = predictive_quantile(Scale::kAge, c.calibration_prob, chain);
    }
    d.cfg.a2 = calibrate_benefit_rate(d.calibration.t_w, c.q_star_t);
  }
  if (c.a3) {
    d.cfg.a3 = *c.a3;
    d.rates_explicit_u = true;
    d.calibration.u_w = 2.0 * logit(c.q_star_u) / *c.a3;
  } else {
    if (c.u_w) {
      d.calibration.u_w = *c.u_w;
    } else {
      need_chain();
      d.calibration.u_w = predictive_quantile(Scale::kUsage, c.calibration_prob, chain);
    }
    d.cfg.a3 = calibrate_benefit_rate(d.calibration.u_w, c.q_star_u);
  }
  d.cfg.validate();
  return d;
}

inline OptimizerOptions optimizer_options(const RunConfig& c) {
  OptimizerOptions o = c.optimizer;
  o.threads = resolve_threads(c.threads);
  return o;
}

/// Everything one pipeline pass produces.
struct PipelineRun {
  Dataset data;
  MleResult mle;
  PriorHyper prior;
  PosteriorChain chain;
  DerivedCosts costs;
  std::optional<OptimResult> optimum;
  std::optional<CostBreakdown> breakdown;  // at the optimum, on the objective's chain
};

/// fit -> prior -> sample; optimize when requested.
inline PipelineRun run_pipeline(const RunConfig& c, bool optimize) {
  PipelineRun r;
  r.data = load_data(c);
  r.mle = fit_mle(r.data);
  r.prior = resolve_prior(c, r.mle);
  r.chain = mh_sample(r.data, r.prior, r.mle.psi_hat, c.mcmc);
  r.costs = derive_costs(c, r.chain);
  if (optimize) {
    const OptimizerOptions o = optimizer_options(c);
    r.optimum = optimize_region(r.chain, r.costs.cfg, c.init, o);
    r.breakdown = cost_breakdown(r.optimum->region, objective_chain(r.chain, o), r.costs.cfg, o.cost);
  }
  return r;
}

// --- sensitivity grids ---------------------------------------------------------------

/// One row of a grid: cost overrides, or new censoring thresholds (t0, u0)
/// which trigger a full refit.
struct GridRow {
  Overrides costs;
  std::optional<double> t0, u0;
};

struct GridSpec {
  std::vector<GridRow> rows;
  std::vector<std::string> columns;  // varied keys in first-seen order
  [[nodiscard]] bool censoring() const {
    for (const auto& r : rows) {
      if (r.t0 || r.u0) return true;
    }
    return false;
  }
};

inline GridSpec parse_grid(const nlohmann::json& j) {
  GridSpec g;
  try {
    detail::reject_unknown(j, {"rows"}, "grid");
    for (const auto& row : j.at("rows")) {
      if (!row.is_object()) throw ConfigError("grid rows must be objects");
      GridRow r;
      for (const auto& [k, v] : row.items()) {
        if (!v.is_number()) throw ConfigError("grid value for '" + k + "' must be a number");
        if (std::find(g.columns.begin(), g.columns.end(), k) == g.columns.end()) g.columns.push_back(k);
        if (k == "t0") {
          r.t0 = v.get<double>();
        } else if (k == "u0") {
          r.u0 = v.get<double>();
        } else {
          r.costs[k] = v.get<double>();
        }
      }
      g.rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  return g;
}

inline GridSpec load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_grid(j);
}

struct ScanRow {
  GridRow varied;
  CostConfig cfg;
  BenefitCalibration calibration;
  std::optional<OptimResult> result;
  std::string error;
};

/// Cost-only rows reuse `chain`; censoring rows rerun fit, prior, sampling
/// and the derived constants before optimizing. Failing rows keep their error.
inline std::vector<ScanRow> run_scan(const RunConfig& c, const GridSpec& grid, const PosteriorChain& chain) {
  std::vector<ScanRow> out;
  const OptimizerOptions o = optimizer_options(c);
  std::optional<DerivedCosts> base;
  for (const auto& row : grid.rows) {
    ScanRow s;
    s.varied = row;
    try {
      if (row.t0 || row.u0) {
        RunConfig rc = c;
        if (row.t0) rc.t0 = *row.t0;
        if (row.u0) rc.u0 = *row.u0;
        const PipelineRun pr = run_pipeline(rc, false);
        s.calibration = pr.costs.calibration;
        s.cfg = apply_overrides(pr.costs.cfg, pr.costs.calibration, row.costs);
        s.result = optimize_region(pr.chain, s.cfg, c.init, o);
      } else {
        if (!base) base = derive_costs(c, chain);
        s.calibration = base->calibration;
        s.cfg = apply_overrides(base->cfg, base->calibration, row.costs);
        s.result = optimize_region(chain, s.cfg, c.init, o);
      }
    } catch (const std::exception& e) {
      s.error = e.what();
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace bw
