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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gproj/config.hpp"
#include "gproj/harness.hpp"

namespace gproj {

// Report writers. Every number is formatted with a fixed "%.17g" so a rerun
// with the same seed produces byte-identical files regardless of the job
// count.

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace report_detail {

/// Union of parameter names across rows, sorted, so the CSV header is stable.
inline std::vector<std::string> param_columns(const std::vector<VerificationRow>& rows) {
  std::set<std::string> names;
  for (const auto& row : rows)
    for (const auto& [k, _] : row.params) names.insert(k);
  return {names.begin(), names.end()};
}

}  // namespace report_detail

inline std::string verification_csv(const std::vector<VerificationRow>& rows) {
  const std::vector<std::string> params = report_detail::param_columns(rows);
  std::ostringstream out;
  out << "check";
  for (const auto& p : params) out << ',' << p;
  out << ",lhs,lhs_se,rhs,rhs_log,se,margin,verdict,seed_path\n";
  for (const auto& row : rows) {
    out << row.check;
    for (const auto& p : params) {
      const auto it = row.params.find(p);
      out << ',' << (it == row.params.end() ? "" : format_double(it->second));
    }
    out << ',' << format_double(row.lhs) << ',' << format_double(row.lhs_se) << ','
        << format_double(row.rhs) << ',' << format_double(row.rhs_log) << ','
        << format_double(row.se) << ',' << format_double(row.margin) << ','
        << to_string(row.verdict) << ',' << row.seed_path << '\n';
  }
  return out.str();
}

inline Json verification_json(const std::vector<VerificationRow>& rows,
                              int exit_code) {
  Json doc;
  doc["exit_code"] = exit_code;
  Json arr = Json::array();
  for (const auto& row : rows) {
    Json r;
    r["check"] = row.check;
    Json params;
    for (const auto& [k, v] : row.params)
      params[k] = std::isfinite(v) ? Json(v) : Json(format_double(v));
    r["params"] = params;
    r["lhs"] = row.lhs;
    r["lhs_se"] = row.lhs_se;
    r["rhs"] = std::isfinite(row.rhs) ? Json(row.rhs) : Json(format_double(row.rhs));
    r["rhs_log"] = std::isfinite(row.rhs_log) ? Json(row.rhs_log)
                                              : Json(format_double(row.rhs_log));
    r["se"] = row.se;
    r["margin"] =
        std::isfinite(row.margin) ? Json(row.margin) : Json(format_double(row.margin));
    r["verdict"] = to_string(row.verdict);
    r["seed_path"] = row.seed_path;
    arr.push_back(std::move(r));
  }
  doc["rows"] = std::move(arr);
  return doc;
}

inline std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  for (std::size_t c = 0; c < sweep.columns.size(); ++c) {
    if (c) out << ',';
    out << sweep.columns[c];
  }
  out << '\n';
  for (const auto& row : sweep.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_double(row[c]);
    }
    out << '\n';
  }
  return out.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file '" + path + "'");
  out << content;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    std::string available;
    for (const auto& c : columns) {
      if (!available.empty()) available += ", ";
      available += c;
    }
    throw std::invalid_argument("unknown column '" + name +
                                "'; available columns: " + available);
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file '" + path + "'");
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (first) {
      table.columns = std::move(fields);
      first = false;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  if (table.columns.empty()) throw std::runtime_error("CSV file has no header");
  return table;
}

/// Emits an (x, y, y_err) series from a sweep table. If the y column has
/// non-finite entries and a companion "<y>_log" column exists, that column
/// is used instead (log-scale fallback for overflowing bounds). y_err picks
/// "<y>_se" automatically when present and no explicit column is given.
inline std::string plotdata_series(const CsvTable& table, const std::string& x_col,
                                   const std::string& y_col,
                                   const std::string& yerr_col = "") {
  const std::size_t xi = table.column_index(x_col);
  std::size_t yi = table.column_index(y_col);
  std::string y_name = y_col;

  const auto is_finite_str = [](const std::string& s) {
    if (s == "nan" || s == "inf" || s == "-inf" || s.empty()) return false;
    return std::isfinite(std::strtod(s.c_str(), nullptr));
  };
  bool y_overflows = false;
  for (const auto& row : table.rows)
    if (row.size() > yi && (row[yi] == "inf" || row[yi] == "-inf")) y_overflows = true;
  if (y_overflows) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      if (table.columns[i] == y_col + "_log") {
        yi = i;
        y_name = y_col + "_log";
        break;
      }
    }
  }

  std::size_t ei = static_cast<std::size_t>(-1);
  std::string e_name;
  if (!yerr_col.empty()) {
    ei = table.column_index(yerr_col);
    e_name = yerr_col;
  } else {
    for (std::size_t i = 0; i < table.columns.size(); ++i)
      if (table.columns[i] == y_col + "_se") {
        ei = i;
        e_name = table.columns[i];
      }
  }

  std::ostringstream out;
  out << x_col << ',' << y_name;
  if (ei != static_cast<std::size_t>(-1)) out << ',' << e_name;
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() <= std::max(xi, yi)) continue;
    if (!is_finite_str(row[yi])) continue;
    out << row[xi] << ',' << row[yi];
    if (ei != static_cast<std::size_t>(-1))
      out << ',' << (row.size() > ei ? row[ei] : "");
    out << '\n';
  }
  return out.str();
}

}  // namespace gproj
