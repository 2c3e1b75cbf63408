// Copyright 2026 The gproj Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gproj/bounds.hpp"
#include "gproj/matrix.hpp"
#include "gproj/sources.hpp"

namespace gproj {

/// Configuration problems map to exit code 64.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const Json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_required(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key))
    throw ConfigError("missing key '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' in " + where + " has the wrong type");
  }
}

template <typename T>
T get_or(const Json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Declarative source description; `make(n)` instantiates it at a grid
/// dimension. Kinds with an intrinsic dimension (point, empirical) require
/// the grid dimension to match.
struct SourceSpec {
  std::string kind;             // iid | sphere | orthogonal-support | point | empirical
  Marginal marginal;            // iid
  double gamma = 1.0;           // sphere / orthogonal-support
  std::size_t d = 1;            // orthogonal-support
  std::vector<double> weights;  // orthogonal-support; empty = uniform
  std::vector<double> point;    // point
  std::string data_path;        // empirical
  bool with_replacement = false;

  [[nodiscard]] SourcePtr make(std::size_t n) const;
};

inline Marginal parse_marginal(const Json& j) {
  detail::reject_unknown_keys(j, {"name", "sigma", "p", "value", "half_width", "dof"},
                              "source.marginal");
  const std::string name = detail::get_required<std::string>(j, "name", "marginal");
  if (name == "gaussian") return Marginal::gaussian(detail::get_or(j, "sigma", 1.0));
  if (name == "rademacher") return Marginal::rademacher();
  if (name == "sparse")
    return Marginal::sparse(detail::get_required<double>(j, "p", "marginal"),
                            detail::get_required<double>(j, "value", "marginal"));
  if (name == "uniform")
    return Marginal::uniform(detail::get_required<double>(j, "half_width", "marginal"));
  if (name == "student-t")
    return Marginal::student_t(detail::get_required<double>(j, "dof", "marginal"));
  throw ConfigError("unknown marginal '" + name + "'");
}

inline Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    std::istringstream ss(line);
    std::vector<double> row;
    double v = 0.0;
    while (ss >> v) row.push_back(v);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("dataset file '" + path + "' has no rows");
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols())
      throw ConfigError("dataset file '" + path + "' has ragged rows");
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

inline SourceSpec parse_source_spec(const Json& j) {
  detail::reject_unknown_keys(j,
                              {"kind", "marginal", "gamma", "d", "weights", "point",
                               "data_path", "with_replacement"},
                              "source");
  SourceSpec spec;
  spec.kind = detail::get_required<std::string>(j, "kind", "source");
  if (spec.kind == "iid") {
    if (!j.contains("marginal")) throw ConfigError("iid source needs 'marginal'");
    spec.marginal = parse_marginal(j.at("marginal"));
  } else if (spec.kind == "sphere") {
    spec.gamma = detail::get_or(j, "gamma", 1.0);
  } else if (spec.kind == "orthogonal-support") {
    spec.gamma = detail::get_or(j, "gamma", 1.0);
    spec.d = detail::get_required<std::size_t>(j, "d", "source");
    if (j.contains("weights") && j.at("weights").is_array())
      spec.weights = j.at("weights").get<std::vector<double>>();
  } else if (spec.kind == "point") {
    spec.point = detail::get_required<std::vector<double>>(j, "point", "source");
  } else if (spec.kind == "empirical") {
    spec.data_path = detail::get_required<std::string>(j, "data_path", "source");
    spec.with_replacement = detail::get_or(j, "with_replacement", false);
  } else {
    throw ConfigError("unknown source kind '" + spec.kind + "'");
  }
  return spec;
}

inline SourcePtr SourceSpec::make(std::size_t n) const {
  try {
    if (kind == "iid") return make_iid(n, marginal);
    if (kind == "sphere") return make_sphere(n, gamma);
    if (kind == "orthogonal-support") {
      if (weights.empty()) return make_orthogonal_support_uniform(n, d, gamma);
      return make_orthogonal_support(n, d, weights, gamma);
    }
    if (kind == "point") {
      if (point.size() != n)
        throw ConfigError("point source has dimension " +
                          std::to_string(point.size()) + " but the grid asks for n=" +
                          std::to_string(n));
      return make_point(point);
    }
    if (kind == "empirical") {
      Matrix data = load_matrix_csv(data_path);
      if (data.cols() != n)
        throw ConfigError("empirical dataset has dimension " +
                          std::to_string(data.cols()) + " but the grid asks for n=" +
                          std::to_string(n));
      return make_empirical(std::move(data), with_replacement);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("source construction failed: ") + e.what());
  }
  throw ConfigError("unknown source kind '" + kind + "'");
}

struct GridSpec {
  std::vector<std::size_t> n;
  std::vector<std::size_t> k;
  std::vector<double> t;
  std::vector<double> epsilon;
};

struct Budgets {
  std::size_t reps = 8;
  std::size_t n_outer = 512;
  std::size_t m_inner = 2048;
  std::size_t m_samples = 20000;
  std::size_t n_samples = 100000;
  std::size_t n_pairs = 100000;
  std::size_t var_reps = 96;        // replicates for the density-variance grid
  std::size_t var_grid_nodes = 401;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t root_seed = 1;
  SourceSpec source;
  GridSpec grid;
  Budgets budgets;
  std::vector<std::string> checks;
  std::string output_dir = "out";
  double runtime_ceiling_sec = 3600.0;
  BoundConstants constants;
  bool sweep_estimates = true;
};

/// Applies "--override key=value" pairs as dotted paths into the raw JSON
/// document (e.g. constants.thm2_c=0.001, budgets.reps=4, root_seed=7).
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key=value: '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  Json* node = &doc;
  std::size_t start = 0;
  std::vector<std::string> parts;
  while (true) {
    const auto dot = path.find('.', start);
    parts.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  // Parse the value as JSON when possible (numbers, booleans, arrays),
  // falling back to a plain string.
  Json parsed = Json::parse(value, nullptr, false);
  (*node)[parts.back()] = parsed.is_discarded() ? Json(value) : parsed;
}

inline ExperimentConfig parse_config(const Json& doc) {
  detail::reject_unknown_keys(doc,
                              {"schema_version", "root_seed", "source", "grid",
                               "budgets", "checks", "output_dir",
                               "runtime_ceiling_sec", "constants", "sweep_estimates"},
                              "config");
  ExperimentConfig cfg;
  cfg.schema_version = detail::get_required<int>(doc, "schema_version", "config");
  if (cfg.schema_version != 1)
    throw ConfigError("unsupported schema_version " +
                      std::to_string(cfg.schema_version));
  cfg.root_seed = detail::get_required<std::uint64_t>(doc, "root_seed", "config");
  if (!doc.contains("source")) throw ConfigError("missing key 'source' in config");
  cfg.source = parse_source_spec(doc.at("source"));

  if (!doc.contains("grid")) throw ConfigError("missing key 'grid' in config");
  const Json& g = doc.at("grid");
  detail::reject_unknown_keys(g, {"n", "k", "t", "epsilon"}, "grid");
  cfg.grid.n = detail::get_required<std::vector<std::size_t>>(g, "n", "grid");
  cfg.grid.k = detail::get_required<std::vector<std::size_t>>(g, "k", "grid");
  cfg.grid.t = detail::get_required<std::vector<double>>(g, "t", "grid");
  cfg.grid.epsilon = detail::get_or(g, "epsilon", std::vector<double>{1.0});
  if (cfg.grid.n.empty() || cfg.grid.k.empty() || cfg.grid.t.empty() ||
      cfg.grid.epsilon.empty())
    throw ConfigError("grid axes must be non-empty");
  for (double t : cfg.grid.t)
    if (!(t > 0.0)) throw ConfigError("grid.t entries must be positive");
  for (double e : cfg.grid.epsilon)
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("grid.epsilon entries in (0, 1]");

  if (doc.contains("budgets")) {
    const Json& b = doc.at("budgets");
    detail::reject_unknown_keys(b,
                                {"reps", "n_outer", "m_inner", "m_samples",
                                 "n_samples", "n_pairs", "var_reps",
                                 "var_grid_nodes"},
                                "budgets");
    cfg.budgets.reps = detail::get_or<std::size_t>(b, "reps", cfg.budgets.reps);
    cfg.budgets.n_outer = detail::get_or<std::size_t>(b, "n_outer", cfg.budgets.n_outer);
    cfg.budgets.m_inner = detail::get_or<std::size_t>(b, "m_inner", cfg.budgets.m_inner);
    cfg.budgets.m_samples =
        detail::get_or<std::size_t>(b, "m_samples", cfg.budgets.m_samples);
    cfg.budgets.n_samples =
        detail::get_or<std::size_t>(b, "n_samples", cfg.budgets.n_samples);
    cfg.budgets.n_pairs = detail::get_or<std::size_t>(b, "n_pairs", cfg.budgets.n_pairs);
    cfg.budgets.var_reps =
        detail::get_or<std::size_t>(b, "var_reps", cfg.budgets.var_reps);
    cfg.budgets.var_grid_nodes =
        detail::get_or<std::size_t>(b, "var_grid_nodes", cfg.budgets.var_grid_nodes);
    for (std::size_t v : {cfg.budgets.reps, cfg.budgets.n_outer, cfg.budgets.m_inner,
                          cfg.budgets.m_samples, cfg.budgets.n_samples,
                          cfg.budgets.n_pairs, cfg.budgets.var_reps,
                          cfg.budgets.var_grid_nodes})
      if (v == 0) throw ConfigError("budgets must be positive");
    if (cfg.budgets.reps < 2) throw ConfigError("budgets.reps must be >= 2");
  }

  cfg.checks = detail::get_or(doc, "checks", std::vector<std::string>{});
  cfg.output_dir = detail::get_or<std::string>(doc, "output_dir", cfg.output_dir);
  cfg.runtime_ceiling_sec =
      detail::get_or(doc, "runtime_ceiling_sec", cfg.runtime_ceiling_sec);
  cfg.sweep_estimates = detail::get_or(doc, "sweep_estimates", cfg.sweep_estimates);

  if (doc.contains("constants")) {
    const Json& c = doc.at("constants");
    detail::reject_unknown_keys(c, {"thm1_c", "thm2_c", "thm5_c", "cor1_c_prime"},
                                "constants");
    cfg.constants.thm1_c = detail::get_or(c, "thm1_c", cfg.constants.thm1_c);
    cfg.constants.thm2_c = detail::get_or(c, "thm2_c", cfg.constants.thm2_c);
    cfg.constants.thm5_c = detail::get_or(c, "thm5_c", cfg.constants.thm5_c);
    cfg.constants.cor1_c_prime =
        detail::get_or(c, "cor1_c_prime", cfg.constants.cor1_c_prime);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc);
}

}  // namespace gproj
