#pragma once

// JSON configuration parsing for the CLI (schema in docs/config.md)
// and the CSV/JSON artifact writers that are not module-local.

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "blochlap/lap.hpp"
#include "json.hpp"

namespace blochlap {

/// Invalid configuration: CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  int dimension = 1;
  MediumSpec medium;
  SourceSpec source;
  double lambda = 0.0;
  Vec direction;
  LapConfig lap;
  std::vector<Vec> eval_points;
  std::vector<double> epsilon_ladder;
  int damped_N = 64;
};

namespace io_detail {

using nlohmann::json;

inline MultiIndex parse_index(const json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError("index must be an array of length dimension");
  return make_index(j[0].get<int>(), dim > 1 ? j[1].get<int>() : 0);
}

inline Cplx parse_complex(const json& j) {
  if (j.is_number()) return Cplx(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2) return Cplx(j[0].get<double>(), j[1].get<double>());
  throw ConfigError("complex value must be a number or [re, im]");
}

inline CMat parse_matrix(const json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError("matrix must have dimension rows");
  CMat m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != dim)
      throw ConfigError("matrix must have dimension columns");
    for (int c = 0; c < dim; ++c) m(r, c) = parse_complex(j[r][c]);
  }
  return m;
}

}  // namespace io_detail

inline MediumSpec parse_medium(const nlohmann::json& j) {
  MediumSpec m;
  m.dim = j.value("dimension", 1);
  if (m.dim != 1 && m.dim != 2) throw ConfigError("medium dimension must be 1 or 2");
  if (j.contains("A_constant")) {
    m.A_coeffs[make_index(0, 0)] = io_detail::parse_matrix(j.at("A_constant"), m.dim);
  } else if (j.contains("A")) {
    for (const auto& e : j.at("A"))
      m.A_coeffs[io_detail::parse_index(e.at("index"), m.dim)] =
          io_detail::parse_matrix(e.at("matrix"), m.dim);
  } else {
    m.A_coeffs[make_index(0, 0)] = CMat::Identity(m.dim, m.dim);
  }
  if (j.contains("V"))
    for (const auto& e : j.at("V"))
      m.V_coeffs[io_detail::parse_index(e.at("index"), m.dim)] =
          io_detail::parse_complex(e.at("value"));
  m.c0 = j.value("c0", 0.0);
  try {
    m.validate();
  } catch (const MediumError& e) {
    throw ConfigError(std::string("medium: ") + e.what());
  }
  return m;
}

inline SourceSpec parse_source(const nlohmann::json& j, int dim) {
  SourceSpec s;
  s.dim = dim;
  const std::string kind = j.value("kind", "delta");
  if (kind == "delta") {
    s.kind = SourceSpec::Kind::delta_at_origin;
  } else if (kind == "fourier_table") {
    s.kind = SourceSpec::Kind::fourier_table;
    if (!j.contains("coefficients")) throw ConfigError("fourier_table source needs coefficients");
    for (const auto& e : j.at("coefficients"))
      s.fourier_table[io_detail::parse_index(e.at("index"), dim)] =
          io_detail::parse_complex(e.at("value"));
  } else {
    throw ConfigError("source kind must be 'delta' or 'fourier_table'");
  }
  return s;
}

inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.dimension = j.value("dimension", 0);
  if (cfg.dimension != 1 && cfg.dimension != 2) throw ConfigError("dimension must be 1 or 2");

  nlohmann::json jm = j.value("medium", nlohmann::json::object());
  if (!jm.contains("dimension")) jm["dimension"] = cfg.dimension;
  if (jm.at("dimension").get<int>() != cfg.dimension)
    throw ConfigError("medium dimension disagrees with the run dimension");
  cfg.medium = parse_medium(jm);
  cfg.source = parse_source(j.value("source", nlohmann::json{{"kind", "delta"}}), cfg.dimension);

  cfg.lambda = j.value("lambda", 0.0);
  cfg.direction = Vec::Zero(cfg.dimension);
  cfg.direction[0] = 1.0;
  if (j.contains("direction")) {
    const auto& d = j.at("direction");
    if (!d.is_array() || static_cast<int>(d.size()) != cfg.dimension)
      throw ConfigError("direction must be an array of length dimension");
    for (int i = 0; i < cfg.dimension; ++i) cfg.direction[i] = d[i].get<double>();
    if (cfg.direction.norm() == 0.0) throw ConfigError("direction must be nonzero");
  }

  cfg.lap.J_max = j.value("J_max", 16);
  cfg.lap.grid_N = j.value("grid_N", 32);
  cfg.lap.num_bands = j.value("num_bands", 6);
  cfg.lap.J_max_bands = j.value("J_max_bands", 0);
  if (cfg.lap.J_max < 1) throw ConfigError("J_max must be >= 1");
  if (cfg.lap.grid_N < 2) throw ConfigError("grid_N must be >= 2");
  if (cfg.lap.num_bands < 1) throw ConfigError("num_bands must be >= 1");
  if (j.contains("contour")) {
    const auto& c = j.at("contour");
    cfg.lap.sigma1 = c.value("sigma1", cfg.lap.sigma1);
    cfg.lap.sigma2 = c.value("sigma2", cfg.lap.sigma2);
    cfg.lap.halo = c.value("halo", cfg.lap.halo);
    cfg.lap.slices = c.value("slices", cfg.lap.slices);
    cfg.lap.nodes_per_slice = c.value("nodes_per_slice", cfg.lap.nodes_per_slice);
    if (!(cfg.lap.sigma1 > 0.0) || !(cfg.lap.sigma2 > 0.0))
      throw ConfigError("contour heights must be positive");
    if (cfg.lap.slices < 1 || cfg.lap.nodes_per_slice < 8)
      throw ConfigError("contour needs >= 1 slice and >= 8 nodes per slice");
  }

  if (j.contains("eval_points")) {
    for (const auto& p : j.at("eval_points")) {
      if (!p.is_array() || static_cast<int>(p.size()) != cfg.dimension)
        throw ConfigError("eval point has the wrong dimension");
      Vec x(cfg.dimension);
      for (int i = 0; i < cfg.dimension; ++i) x[i] = p[i].get<double>();
      cfg.eval_points.push_back(x);
    }
  }
  if (j.contains("epsilon_ladder")) {
    for (const auto& e : j.at("epsilon_ladder")) cfg.epsilon_ladder.push_back(e.get<double>());
    for (size_t i = 0; i + 1 < cfg.epsilon_ladder.size(); ++i)
      if (!(cfg.epsilon_ladder[i] > cfg.epsilon_ladder[i + 1]))
        throw ConfigError("epsilon_ladder must be strictly decreasing");
    for (double e : cfg.epsilon_ladder)
      if (!(e > 0.0)) throw ConfigError("epsilon_ladder entries must be positive");
  }
  cfg.damped_N = j.value("damped_N", 64);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return parse_config(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config schema violation: ") + e.what());
  }
}

namespace io_detail {

inline void put_g17(std::ostream& os, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace io_detail

/// convergence.csv: epsilon,max_abs_error
inline void write_convergence_csv(const std::vector<std::pair<double, double>>& rows,
                                  std::ostream& os) {
  os << "epsilon,max_abs_error\n";
  for (const auto& [eps, err] : rows) {
    io_detail::put_g17(os, eps);
    os << ',';
    io_detail::put_g17(os, err);
    os << '\n';
  }
}

inline nlohmann::json diagnostics_json(const LapSolution& sol) {
  nlohmann::json j;
  j["regular_bands"] = sol.diag.J;
  j["min_grad_norm"] = sol.diag.min_grad_norm;
  j["slice_count"] = sol.diag.slice_count;
  j["node_count"] = sol.diag.node_count;
  j["pole_count"] = sol.diag.pole_count;
  j["captured_count"] = sol.diag.captured_count;
  j["branch_node_count"] = sol.diag.branch_node_count;
  j["contour_retries"] = sol.diag.contour_retries;
  j["worst_margin"] = sol.diag.worst_margin;
  j["sigma2_used"] = sol.diag.sigma2_used;
  double cmax = 0.0;
  for (const auto& r : sol.results) cmax = std::max(cmax, std::abs(r.complex_ext));
  j["max_complex_extension"] = cmax;
  return j;
}

inline nlohmann::json error_json(int code, const std::string& message) {
  return nlohmann::json{{"error", message}, {"code", code}};
}

}  // namespace blochlap
