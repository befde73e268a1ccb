#pragma once

// Dataset ingestion, censoring, serialization and marginal goodness-of-fit
// summaries.

#include <boost/math/distributions/weibull.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bayeswarranty/inference.hpp"

namespace bw {

struct RawRecord {
  double age = std::numeric_limits<double>::quiet_NaN();
  double usage = std::numeric_limits<double>::quiet_NaN();
  bool censored_marker = false;
};

struct CsvSchema {
  std::string age_col = "age";
  std::string usage_col = "usage";
  double scale_factor = 1.0;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (pos != s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Parses CSV text: '#' lines are comments, the first other line is the
/// header, "---" cells mark a censored unit. Errors carry 1-based line numbers.
inline std::vector<RawRecord> parse_dataset(std::istream& in, const CsvSchema& schema = {},
                                            const std::string& source = "<input>") {
  std::vector<RawRecord> out;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::pair<std::size_t, std::size_t>> cols;
  std::size_t width = 0;
  auto fail = [&](const std::string& msg) {
    throw DataError(source + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = detail::split_csv(t);
    if (!cols) {
      std::optional<std::size_t> a, u;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == schema.age_col) a = i;
        if (cells[i] == schema.usage_col) u = i;
      }
      if (!a) fail("header has no column '" + schema.age_col + "'");
      if (!u) fail("header has no column '" + schema.usage_col + "'");
      cols = std::make_pair(*a, *u);
      width = cells.size();
      continue;
    }
    if (cells.size() != width) {
      fail("expected " + std::to_string(width) + " fields, found " + std::to_string(cells.size()));
    }
    const std::string& ca = cells[cols->first];
    const std::string& cu = cells[cols->second];
    RawRecord r;
    if (ca == "---" || cu == "---") {
      if (ca != cu) fail("censored marker '---' must fill both the age and usage cells");
      r.censored_marker = true;
    } else {
      const auto va = detail::parse_number(ca);
      const auto vu = detail::parse_number(cu);
      if (!va) fail("non-numeric age '" + ca + "'");
      if (!vu) fail("non-numeric usage '" + cu + "'");
      if (*va < 0 || *vu < 0) fail("negative age or usage");
      r.age = *va * schema.scale_factor;
      r.usage = *vu * schema.scale_factor;
    }
    out.push_back(r);
  }
  return out;
}

inline std::vector<RawRecord> load_dataset(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  return parse_dataset(in, schema, path);
}

/// Records with age >= t0 or usage >= u0 and all marker rows become censored
/// units stored at (t0, u0); pad_to_n appends censored units up to n.
inline Dataset apply_censoring(const std::vector<RawRecord>& records, double t0, double u0,
                               std::optional<std::size_t> pad_to_n = std::nullopt) {
  if (!(t0 > 0) || !(u0 > 0)) throw std::invalid_argument("censoring thresholds must be positive");
  if (pad_to_n && *pad_to_n < records.size()) {
    throw std::invalid_argument("pad_to_n (" + std::to_string(*pad_to_n) + ") is below the record count (" +
                                std::to_string(records.size()) + ")");
  }
  Dataset d;
  d.t0 = t0;
  d.u0 = u0;
  for (const auto& r : records) {
    if (r.censored_marker || r.age >= t0 || r.usage >= u0) {
      d.observations.push_back({t0, u0, false});
    } else {
      d.observations.push_back({r.age, r.usage, true});
    }
  }
  if (pad_to_n) {
    while (d.observations.size() < *pad_to_n) d.observations.push_back({t0, u0, false});
  }
  const bool any_censored = d.censored() > 0;
  if (any_censored && (!std::isfinite(t0) || !std::isfinite(u0))) {
    throw std::invalid_argument("censored units need finite thresholds");
  }
  return d;
}

/// Inverse of apply_censoring for a dataset: censored units become markers.
inline std::vector<RawRecord> to_records(const Dataset& d) {
  std::vector<RawRecord> out;
  out.reserve(d.size());
  for (const auto& o : d.observations) {
    RawRecord r;
    if (o.failed) {
      r.age = o.t;
      r.usage = o.u;
    } else {
      r.censored_marker = true;
    }
    out.push_back(r);
  }
  return out;
}

inline Dataset apply_censoring(const Dataset& d, double t0, double u0) { return apply_censoring(to_records(d), t0, u0); }

// --- serialization -------------------------------------------------------------------

/// CSV columns t,u,failed at full precision plus a JSON sidecar {t0,u0,n,d}.
inline void write_dataset(const Dataset& d, const std::string& csv_path, const std::string& json_path) {
  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot write '" + csv_path + "'");
  out << "t,u,failed\n";
  for (const auto& o : d.observations) {
    out << detail::format_double(o.t) << ',' << detail::format_double(o.u) << ',' << (o.failed ? 1 : 0) << '\n';
  }
  nlohmann::json j;
  auto num = [](double x) -> nlohmann::json {
    if (std::isfinite(x)) return x;
    return nullptr;
  };
  j["t0"] = num(d.t0);
  j["u0"] = num(d.u0);
  j["n"] = d.size();
  j["d"] = d.failures();
  std::ofstream js(json_path);
  if (!js) throw DataError("cannot write '" + json_path + "'");
  js << j.dump(2) << '\n';
}

inline Dataset read_dataset(const std::string& csv_path, const std::string& json_path) {
  std::ifstream js(json_path);
  if (!js) throw DataError("cannot open '" + json_path + "'");
  nlohmann::json j;
  try {
    js >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(json_path + ": " + e.what());
  }
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
  };
  Dataset d;
  d.t0 = num(j.at("t0"));
  d.u0 = num(j.at("u0"));
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open '" + csv_path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) continue;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    const auto t = cells.size() == 3 ? detail::parse_number(cells[0]) : std::nullopt;
    const auto u = cells.size() == 3 ? detail::parse_number(cells[1]) : std::nullopt;
    if (!t || !u || (cells[2] != "0" && cells[2] != "1")) {
      throw DataError(csv_path + ":" + std::to_string(lineno) + ": malformed row");
    }
    d.observations.push_back({*t, *u, cells[2] == "1"});
  }
  if (j.at("n").get<std::size_t>() != d.size() || j.at("d").get<std::size_t>() != d.failures()) {
    throw DataError(json_path + ": counts do not match " + csv_path);
  }
  return d;
}

// --- marginal diagnostics ---------------------------------------------------------------

struct WeibullFit {
  double eta = 0.0;     // scale
  double lambda = 0.0;  // shape
};

/// Complete-sample Weibull maximum likelihood.
inline WeibullFit fit_weibull(const std::vector<double>& x) {
  if (x.size() < 2) throw std::invalid_argument("Weibull fit needs at least two observations");
  double mean_log = 0.0;
  for (double v : x) {
    if (!(v > 0)) throw std::invalid_argument("Weibull fit needs positive observations");
    mean_log += std::log(v);
  }
  mean_log /= static_cast<double>(x.size());
  const double xmax = *std::max_element(x.begin(), x.end());
  // Profile score in the shape k, scaled by xmax to keep the powers bounded.
  auto score = [&](double k) {
    double s0 = 0.0, s1 = 0.0;
    for (double v : x) {
      const double p = std::pow(v / xmax, k);
      s0 += p;
      s1 += p * std::log(v);
    }
    return s1 / s0 - 1.0 / k - mean_log;
  };
  double lo = 1e-3, hi = 1.0;
  while (score(hi) < 0) {
    hi *= 2.0;
    if (hi > 1e4) throw std::runtime_error("Weibull shape root not bracketed");
  }
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(score, lo, hi, tol, iters);
  const double k = 0.5 * (a + b);
  double mean_pow = 0.0;
  for (double v : x) mean_pow += std::pow(v / xmax, k);
  mean_pow /= static_cast<double>(x.size());
  return {xmax * std::pow(mean_pow, 1.0 / k), k};
}

/// Anderson-Darling statistic A^2 of the sample against the given Weibull.
inline double anderson_darling_statistic(std::vector<double> x, const WeibullFit& w) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const boost::math::weibull_distribution<double> dist(w.lambda, w.eta);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lz = std::log(boost::math::cdf(dist, x[i]));
    const double lz1 = std::log(boost::math::cdf(boost::math::complement(dist, x[n - 1 - i])));
    s += (2.0 * static_cast<double>(i) + 1.0) * (lz + lz1);
  }
  return -static_cast<double>(n) - s / static_cast<double>(n);
}

/// P(A^2 > a) for a fully specified null distribution (Marsaglia and
/// Marsaglia 2004: asymptotic series plus the finite-n correction).
inline double anderson_darling_pvalue_simple(double a2, std::size_t n) {
  if (!(a2 > 0)) return 1.0;
  double cdf = 0.0;
  if (a2 < 2.0) {
    cdf = std::exp(-1.2337141 / a2) / std::sqrt(a2) *
          (2.00012 + (.247105 - (.0649821 - (.0347962 - (.011672 - .00168691 * a2) * a2) * a2) * a2) * a2);
  } else {
    cdf = std::exp(-std::exp(1.0776 - (2.30695 - (.43424 - (.082433 - (.008056 - .0003146 * a2) * a2) * a2) * a2) * a2));
  }
  const double nn = static_cast<double>(n);
  double corr = 0.0;
  if (cdf > 0.8) {
    corr = (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * cdf) * cdf) * cdf) * cdf) * cdf) / nn;
  } else {
    const double c = .01265 + .1757 / nn;
    if (cdf < c) {
      double t = cdf / c;
      t = std::sqrt(t) * (1.0 - t) * (49.0 * t - 102.0);
      corr = t * (.0037 / (nn * nn * nn) + .00078 / (nn * nn) + .00006 / nn);
    } else {
      double t = (cdf - c) / (.8 - c);
      t = -.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
      corr = t * (.04213 / nn + .01365 / (nn * nn));
    }
  }
  return std::clamp(1.0 - (cdf + corr), 0.0, 1.0);
}

/// Significance level for the Weibull test with both parameters estimated:
/// A* = A^2 (1 + 0.2 / sqrt(n)) against the extreme-value table, log-linear
/// interpolation between levels, clamped to the table range [0.01, 0.25].
inline double anderson_darling_pvalue_estimated(double a2, std::size_t n) {
  static constexpr std::array<double, 5> kCrit = {0.474, 0.637, 0.757, 0.877, 1.038};
  static constexpr std::array<double, 5> kLevel = {0.25, 0.10, 0.05, 0.025, 0.01};
  const double a = a2 * (1.0 + 0.2 / std::sqrt(static_cast<double>(n)));
  if (a <= kCrit.front()) return kLevel.front();
  if (a >= kCrit.back()) return kLevel.back();
  std::size_t i = 1;
  while (a > kCrit[i]) ++i;
  const double f = (a - kCrit[i - 1]) / (kCrit[i] - kCrit[i - 1]);
  return std::exp(std::log(kLevel[i - 1]) + f * (std::log(kLevel[i]) - std::log(kLevel[i - 1])));
}

inline double pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("correlation needs paired samples");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

struct QqPoint {
  double theoretical = 0.0;
  double observed = 0.0;
};

struct FitDiagnostics {
  std::size_t n = 0;
  WeibullFit age;
  WeibullFit usage;
  double ad_stat_age = 0.0;
  double ad_stat_usage = 0.0;
  double ad_p_age = 0.0;  // null distribution taken as fully specified
  double ad_p_usage = 0.0;
  double ad_p_age_estimated = 0.0;  // both parameters estimated (table based)
  double ad_p_usage_estimated = 0.0;
  double pearson_r = 0.0;
  std::vector<QqPoint> qq_age;
  std::vector<QqPoint> qq_usage;
};

inline std::vector<QqPoint> qq_points(std::vector<double> x, const WeibullFit& w) {
  std::sort(x.begin(), x.end());
  std::vector<QqPoint> out;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = (static_cast<double>(i) + 0.5) / n;
    out.push_back({w.eta * std::pow(-std::log1p(-p), 1.0 / w.lambda), x[i]});
  }
  return out;
}

/// Marginal Weibull fits, Anderson-Darling tests and Pearson correlation on
/// the failure records.
inline FitDiagnostics marginal_diagnostics(const Dataset& data) {
  std::vector<double> t, u;
  for (const auto& o : data.observations) {
    if (!o.failed) continue;
    t.push_back(o.t);
    u.push_back(o.u);
  }
  if (t.size() < 8) throw std::invalid_argument("marginal diagnostics need at least 8 failures");
  FitDiagnostics d;
  d.n = t.size();
  d.age = fit_weibull(t);
  d.usage = fit_weibull(u);
  d.ad_stat_age = anderson_darling_statistic(t, d.age);
  d.ad_stat_usage = anderson_darling_statistic(u, d.usage);
  d.ad_p_age = anderson_darling_pvalue_simple(d.ad_stat_age, d.n);
  d.ad_p_usage = anderson_darling_pvalue_simple(d.ad_stat_usage, d.n);
  d.ad_p_age_estimated = anderson_darling_pvalue_estimated(d.ad_stat_age, d.n);
  d.ad_p_usage_estimated = anderson_darling_pvalue_estimated(d.ad_stat_usage, d.n);
  d.pearson_r = pearson_correlation(t, u);
  d.qq_age = qq_points(t, d.age);
  d.qq_usage = qq_points(u, d.usage);
  return d;
}

}  // namespace bw
