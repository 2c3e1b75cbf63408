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

#include <cmath>

#include "catch2/catch_amalgamated.hpp"
#include "gproj/config.hpp"
#include "gproj/harness.hpp"
#include "gproj/report_io.hpp"

using namespace gproj;

namespace {

Json base_config() {
  Json doc;
  doc["schema_version"] = 1;
  doc["root_seed"] = 101;
  doc["source"] = {{"kind", "orthogonal-support"}, {"d", 10}, {"gamma", 1.0}};
  doc["grid"] = {{"n", {32}}, {"k", {1}}, {"t", {1.0}}, {"epsilon", {1.0}}};
  doc["budgets"] = {{"reps", 6},      {"n_outer", 256},  {"m_inner", 1024},
                    {"m_samples", 4000}, {"n_samples", 20000}, {"n_pairs", 20000},
                    {"var_reps", 24},  {"var_grid_nodes", 401}};
  doc["checks"] = {"moments_mc_vs_closed", "lemma6_m_k1"};
  doc["runtime_ceiling_sec"] = 600.0;
  return doc;
}

}  // namespace

TEST_CASE("config parser rejects unknown keys everywhere", "[harness]") {
  Json doc = base_config();
  doc["surprise"] = 1;
  REQUIRE_THROWS_AS(parse_config(doc), ConfigError);

  Json doc2 = base_config();
  doc2["budgets"]["repz"] = 4;
  REQUIRE_THROWS_AS(parse_config(doc2), ConfigError);

  Json doc3 = base_config();
  doc3["source"]["flavor"] = "spicy";
  REQUIRE_THROWS_AS(parse_config(doc3), ConfigError);
}

TEST_CASE("config parser enforces required structure", "[harness]") {
  Json doc = base_config();
  doc.erase("grid");
  REQUIRE_THROWS_AS(parse_config(doc), ConfigError);

  Json doc2 = base_config();
  doc2["grid"]["n"] = Json::array();
  REQUIRE_THROWS_AS(parse_config(doc2), ConfigError);

  Json doc3 = base_config();
  doc3["schema_version"] = 2;
  REQUIRE_THROWS_AS(parse_config(doc3), ConfigError);

  Json doc4 = base_config();
  doc4["grid"]["epsilon"] = {1.5};
  REQUIRE_THROWS_AS(parse_config(doc4), ConfigError);

  Json doc5 = base_config();
  doc5["grid"]["t"] = {0.0};
  REQUIRE_THROWS_AS(parse_config(doc5), ConfigError);
}

TEST_CASE("overrides rewrite dotted paths before parsing", "[harness]") {
  Json doc = base_config();
  apply_override(doc, "constants.thm2_c=0.001");
  apply_override(doc, "root_seed=77");
  apply_override(doc, "budgets.reps=4");
  const ExperimentConfig cfg = parse_config(doc);
  REQUIRE(cfg.constants.thm2_c == 0.001);
  REQUIRE(cfg.root_seed == 77);
  REQUIRE(cfg.budgets.reps == 4);
  REQUIRE_THROWS_AS(apply_override(doc, "no-equals-sign"), ConfigError);
}

TEST_CASE("unknown check names are config errors", "[harness]") {
  Json doc = base_config();
  doc["checks"] = {"thm9_hypothetical"};
  const ExperimentConfig cfg = parse_config(doc);
  REQUIRE_THROWS_AS(run_verify(cfg, 1), ConfigError);
}

TEST_CASE("grid expansion is ordered and complete", "[harness]") {
  GridSpec grid;
  grid.n = {16, 32};
  grid.k = {1, 2};
  grid.t = {0.5};
  grid.epsilon = {0.5, 1.0};
  const auto pts = expand_grid(grid);
  REQUIRE(pts.size() == 8);
  REQUIRE(pts[0].n == 16);
  REQUIRE(pts[7].n == 32);
  REQUIRE(pts[7].k == 2);
  REQUIRE(pts[7].epsilon == 1.0);
}

TEST_CASE("runtime ceiling rejects infeasible budgets", "[harness]") {
  Json doc = base_config();
  doc["budgets"]["reps"] = 100000;
  doc["budgets"]["n_outer"] = 100000;
  doc["budgets"]["m_inner"] = 100000;
  doc["checks"] = {"edkl_identity"};
  doc["runtime_ceiling_sec"] = 1.0;
  const ExperimentConfig cfg = parse_config(doc);
  REQUIRE_THROWS_AS(run_verify(cfg, 1), ConfigError);
}

TEST_CASE("verify emits rows and clean verdicts on a small config", "[harness]") {
  const ExperimentConfig cfg = parse_config(base_config());
  const VerifyResult res = run_verify(cfg, 1);
  REQUIRE(res.rows.size() == 3);  // two moment rows + lemma6
  for (const auto& row : res.rows) REQUIRE(row.verdict != Verdict::kViolated);
  REQUIRE((res.exit_code == 0 || res.exit_code == 2));
}

TEST_CASE("verify output is identical across job counts", "[harness]") {
  Json doc = base_config();
  doc["checks"] = {"moments_mc_vs_closed", "lemma6_m_k1", "edkl_identity",
                   "cs_gap_identity"};
  doc["grid"]["t"] = {0.5, 1.0};
  const ExperimentConfig cfg = parse_config(doc);
  const VerifyResult serial = run_verify(cfg, 1);
  const VerifyResult parallel = run_verify(cfg, 4);
  REQUIRE(verification_csv(serial.rows) == verification_csv(parallel.rows));
}

TEST_CASE("corrupting the theorem constant flips the verdict and exit code",
          "[harness]") {
  Json doc = base_config();
  doc["checks"] = {"thm2_kl"};
  doc["budgets"]["reps"] = 8;
  doc["budgets"]["n_outer"] = 512;
  doc["budgets"]["m_inner"] = 1024;
  const VerifyResult healthy = run_verify(parse_config(doc), 2);
  REQUIRE(healthy.exit_code == 0);

  apply_override(doc, "constants.thm2_c=0.001");
  const VerifyResult corrupted = run_verify(parse_config(doc), 2);
  REQUIRE(corrupted.exit_code == 1);
  bool any_violated = false;
  for (const auto& row : corrupted.rows)
    any_violated |= row.verdict == Verdict::kViolated;
  REQUIRE(any_violated);
}

TEST_CASE("sweep produces one row per grid point with stable columns", "[harness]") {
  Json doc = base_config();
  doc["sweep_estimates"] = false;
  doc["grid"]["t"] = {0.5, 1.0};

  const ExperimentConfig cfg = parse_config(doc);
  const SweepResult sweep = run_sweep(cfg, 1);
  REQUIRE(sweep.rows.size() == 2);
  for (const auto& row : sweep.rows) REQUIRE(row.size() == sweep.columns.size());

  // Single grid point -> single row.
  Json doc2 = base_config();
  doc2["sweep_estimates"] = false;
  const SweepResult single = run_sweep(parse_config(doc2), 1);
  REQUIRE(single.rows.size() == 1);
}

TEST_CASE("sweep includes estimates when enabled", "[harness]") {
  Json doc = base_config();
  doc["budgets"]["reps"] = 4;
  doc["budgets"]["n_outer"] = 64;
  doc["budgets"]["m_inner"] = 256;
  doc["budgets"]["m_samples"] = 2000;
  doc["budgets"]["var_reps"] = 8;
  const SweepResult sweep = run_sweep(parse_config(doc), 2);
  const auto idx = [&](const std::string& name) {
    for (std::size_t i = 0; i < sweep.columns.size(); ++i)
      if (sweep.columns[i] == name) return i;
    FAIL("missing column " << name);
    return std::size_t{0};
  };
  REQUIRE(std::isfinite(sweep.rows[0][idx("expected_kl")]));
  REQUIRE(std::isfinite(sweep.rows[0][idx("expected_w2")]));
  REQUIRE(std::isfinite(sweep.rows[0][idx("var_integral")]));
  REQUIRE(sweep.rows[0][idx("capacity")] > 0.0);
}

TEST_CASE("plotdata extracts series and handles overflow columns", "[harness]") {
  CsvTable table;
  table.columns = {"n", "bound", "bound_log", "bound_se"};
  table.rows = {{"16", "2.5", "0.91", "0.1"},
                {"32", "inf", "800", "0.1"},
                {"64", "1.5", "0.4", "0.2"}};

  SECTION("plain series picks the se column automatically") {
    CsvTable finite = table;
    finite.rows[1][1] = "3.5";
    const std::string out = plotdata_series(finite, "n", "bound");
    REQUIRE(out == "n,bound,bound_se\n16,2.5,0.1\n32,3.5,0.1\n64,1.5,0.2\n");
  }

  SECTION("overflowing linear column falls back to the log column") {
    const std::string out = plotdata_series(table, "n", "bound");
    REQUIRE(out.find("bound_log") != std::string::npos);
    REQUIRE(out.find("800") != std::string::npos);
  }

  SECTION("unknown columns name the alternatives") {
    REQUIRE_THROWS_WITH(plotdata_series(table, "n", "nope"),
                        Catch::Matchers::ContainsSubstring("available columns"));
  }
}

TEST_CASE("verification csv round-trips through the reader", "[harness]") {
  const ExperimentConfig cfg = parse_config(base_config());
  const VerifyResult res = run_verify(cfg, 1);
  const std::string csv = verification_csv(res.rows);
  write_text_file("/tmp/gproj_test_report.csv", csv);
  const CsvTable table = read_csv("/tmp/gproj_test_report.csv");
  REQUIRE(table.rows.size() == res.rows.size());
  REQUIRE(table.columns.front() == "check");
}

TEST_CASE("format_double is stable for special values", "[harness]") {
  REQUIRE(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  REQUIRE(format_double(std::numeric_limits<double>::infinity()) == "inf");
  REQUIRE(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  REQUIRE(format_double(0.1) == format_double(0.1));
}

TEST_CASE("source spec factory covers all kinds", "[harness]") {
  SourceSpec iid;
  iid.kind = "iid";
  iid.marginal = Marginal::rademacher();
  REQUIRE(iid.make(8)->constant_magnitude());

  SourceSpec sphere;
  sphere.kind = "sphere";
  sphere.gamma = 2.0;
  REQUIRE(sphere.make(8)->gamma() == 2.0);

  SourceSpec point;
  point.kind = "point";
  point.point = {1.0, 1.0};
  REQUIRE(point.make(2)->kind() == SourceKind::kDeterministicPoint);
  REQUIRE_THROWS_AS(point.make(3), ConfigError);
}
