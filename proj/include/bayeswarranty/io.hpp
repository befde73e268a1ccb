#pragma once

// Chain serialization and small output helpers shared by the CLI.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bayeswarranty/data.hpp"
#include "bayeswarranty/mcmc.hpp"

namespace bw {

inline constexpr const char* kChainHeader = "eta_t,lambda_t,eta_u,lambda_u,theta";

/// Shortest text that reads back to the same double.
inline std::string full_precision(double x) { return detail::format_double(x); }

/// Fixed significant digits for human-readable tables.
inline std::string sig6(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline void write_chain(const PosteriorChain& chain, const std::string& csv_path, const std::string& json_path) {
  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot write '" + csv_path + "'");
  out << kChainHeader << '\n';
  for (const auto& d : chain.draws) {
    const auto a = d.to_array();
    for (std::size_t j = 0; j < a.size(); ++j) out << (j ? "," : "") << full_precision(a[j]);
    out << '\n';
  }
  nlohmann::json j;
  j["seed"] = chain.seed;
  j["n_iter"] = chain.n_iter;
  j["burn_in"] = chain.burn_in;
  j["draws"] = chain.size();
  j["acceptance_rate"] = chain.acceptance_rate;
  std::ofstream js(json_path);
  if (!js) throw DataError("cannot write '" + json_path + "'");
  js << j.dump(2) << '\n';
}

inline PosteriorChain read_chain(const std::string& csv_path, const std::string& json_path = "") {
  PosteriorChain chain;
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open chain file '" + csv_path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (lineno == 1) {
      if (t != kChainHeader) throw DataError(csv_path + ":1: expected header '" + std::string(kChainHeader) + "'");
      continue;
    }
    if (t.empty()) continue;
    const auto cells = detail::split_csv(t);
    if (cells.size() != 5) throw DataError(csv_path + ":" + std::to_string(lineno) + ": expected 5 fields");
    std::array<double, 5> a{};
    for (std::size_t j = 0; j < 5; ++j) {
      const auto v = detail::parse_number(cells[j]);
      if (!v) throw DataError(csv_path + ":" + std::to_string(lineno) + ": non-numeric field '" + cells[j] + "'");
      a[j] = *v;
    }
    const ParamVector psi = ParamVector::from_array(a);
    if (!psi.valid()) throw DataError(csv_path + ":" + std::to_string(lineno) + ": invalid parameter vector");
    chain.draws.push_back(psi);
  }
  if (!json_path.empty()) {
    std::ifstream js(json_path);
    if (!js) throw DataError("cannot open '" + json_path + "'");
    try {
      nlohmann::json j;
      js >> j;
      chain.seed = j.at("seed").get<std::uint64_t>();
      chain.n_iter = j.at("n_iter").get<std::size_t>();
      chain.burn_in = j.at("burn_in").get<std::size_t>();
      chain.acceptance_rate = j.at("acceptance_rate").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(json_path + ": " + e.what());
    }
  }
  return chain;
}

/// One CSV per parameter with columns iteration,value (post burn-in
/// iterations numbered from burn_in + 1).
inline std::vector<std::string> write_traces(const PosteriorChain& chain, const std::string& dir) {
  std::vector<std::string> paths;
  for (std::size_t j = 0; j < ParamVector::kSize; ++j) {
    const std::string path = dir + "/trace_" + ParamVector::kNames[j] + ".csv";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "iteration," << ParamVector::kNames[j] << '\n';
    for (std::size_t i = 0; i < chain.size(); ++i) {
      out << chain.burn_in + i + 1 << ',' << full_precision(chain.draws[i][j]) << '\n';
    }
    paths.push_back(path);
  }
  return paths;
}

}  // namespace bw
