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

// Batch CLI for the Gaussian-projection verification toolkit.
//
//   gproj verify --config cfg.json [--seed S] [--override k=v] [--out DIR] [--jobs J]
//   gproj sweep  --config cfg.json ...
//   gproj stats | moments | bounds | estimate --config cfg.json ...
//   gproj plotdata --in sweep.csv --x n --y expected_w2 [--yerr col] --out-file f.csv
//
// Exit codes: 0 all checks hold, 2 marginal rows only, 1 violation,
// 64 config error, 70 internal error.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gproj/config.hpp"
#include "gproj/harness.hpp"
#include "gproj/report_io.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  long long seed = -1;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", args.config_path, "experiment config JSON");
  if (needs_config) opt->required();
  cmd->add_option("--override", args.overrides,
                  "dotted-path config override, e.g. constants.thm2_c=0.001");
  cmd->add_option("--seed", args.seed, "override root_seed");
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--jobs", args.jobs, "worker threads (default: GPROJ_JOBS or cores)");
}

gproj::ExperimentConfig load(const CommonArgs& args) {
  std::vector<std::string> overrides = args.overrides;
  if (args.seed >= 0)
    overrides.push_back("root_seed=" + std::to_string(args.seed));
  gproj::ExperimentConfig cfg = gproj::load_config(args.config_path, overrides);
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  return cfg;
}

int effective_jobs(const CommonArgs& args) {
  return args.jobs > 0 ? args.jobs : gproj::default_jobs();
}

int cmd_verify(const CommonArgs& args) {
  gproj::ExperimentConfig cfg = load(args);
  const gproj::VerifyResult result = gproj::run_verify(cfg, effective_jobs(args));
  gproj::write_text_file(cfg.output_dir + "/report.csv",
                         gproj::verification_csv(result.rows));
  gproj::write_text_file(
      cfg.output_dir + "/report.json",
      gproj::verification_json(result.rows, result.exit_code).dump(2) + "\n");
  std::size_t holds = 0, marginal = 0, violated = 0;
  for (const auto& row : result.rows) {
    switch (row.verdict) {
      case gproj::Verdict::kHolds: ++holds; break;
      case gproj::Verdict::kHoldsMarginal: ++marginal; break;
      case gproj::Verdict::kViolated: ++violated; break;
    }
    std::printf("%-22s %-40s lhs=%.6g rhs=%.6g margin=%.3g  %s\n", row.check.c_str(),
                row.seed_path.c_str(), row.lhs, row.rhs, row.margin,
                gproj::to_string(row.verdict));
  }
  std::printf("verify: %zu holds, %zu holds-marginal, %zu violated -> %s/report.csv\n",
              holds, marginal, violated, cfg.output_dir.c_str());
  return result.exit_code;
}

int cmd_sweep(const CommonArgs& args) {
  gproj::ExperimentConfig cfg = load(args);
  const gproj::SweepResult sweep = gproj::run_sweep(cfg, effective_jobs(args));
  gproj::write_text_file(cfg.output_dir + "/sweep.csv", gproj::sweep_csv(sweep));
  std::printf("sweep: %zu rows x %zu columns -> %s/sweep.csv\n", sweep.rows.size(),
              sweep.columns.size(), cfg.output_dir.c_str());
  return 0;
}

int cmd_stats(const CommonArgs& args) {
  gproj::ExperimentConfig cfg = load(args);
  std::ostringstream out;
  out << "n,gamma,gamma_exact,alpha,alpha_se,alpha_exact,beta1,beta1_se,"
         "beta1_exact,beta2,beta2_se,beta2_exact\n";
  gproj::Rng root(cfg.root_seed);
  for (std::size_t i = 0; i < cfg.grid.n.size(); ++i) {
    const std::size_t n = cfg.grid.n[i];
    const gproj::SourcePtr src = cfg.source.make(n);
    gproj::Rng rng = root.derive(i);
    const gproj::DistributionStats s =
        gproj::compute_stats(*src, cfg.budgets.n_samples, cfg.budgets.n_pairs, rng);
    out << n << ',' << gproj::format_double(s.gamma) << ',' << s.gamma_exact << ','
        << gproj::format_double(s.alpha.value) << ','
        << gproj::format_double(s.alpha.se) << ',' << s.alpha_exact << ','
        << gproj::format_double(s.beta1.value) << ','
        << gproj::format_double(s.beta1.se) << ',' << s.beta1_exact << ','
        << gproj::format_double(s.beta2.value) << ','
        << gproj::format_double(s.beta2.se) << ',' << s.beta2_exact_flag << '\n';
  }
  gproj::write_text_file(cfg.output_dir + "/stats.csv", out.str());
  std::fputs(out.str().c_str(), stdout);
  return 0;
}

int cmd_moments(const CommonArgs& args) {
  gproj::ExperimentConfig cfg = load(args);
  std::ostringstream out;
  out << "n,k,t,p,mc,mc_se,closed\n";
  gproj::Rng root(cfg.root_seed);
  const auto points = gproj::expand_grid(cfg.grid);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    const gproj::SourcePtr src = cfg.source.make(pt.n);
    gproj::Rng rng = root.derive(i);
    const gproj::PairBatch batch =
        gproj::sample_pair_batch(*src, cfg.budgets.n_pairs, rng);
    const double dk = static_cast<double>(pt.k);
    for (const double p : {dk - 1.0, dk + 1.0}) {
      const gproj::MomentEstimate mc = gproj::m_p_mc(batch, dk, p, pt.t);
      const auto closed = gproj::harness_detail::closed_m_p(*src, dk, p, pt.t);
      out << pt.n << ',' << pt.k << ',' << gproj::format_double(pt.t) << ','
          << gproj::format_double(p) << ','
          << gproj::format_double(mc.estimate.value) << ','
          << gproj::format_double(mc.estimate.se) << ','
          << (closed ? gproj::format_double(*closed) : "nan") << '\n';
    }
  }
  gproj::write_text_file(cfg.output_dir + "/moments.csv", out.str());
  std::fputs(out.str().c_str(), stdout);
  return 0;
}

int cmd_bounds(const CommonArgs& args) {
  gproj::ExperimentConfig cfg = load(args);
  cfg.sweep_estimates = false;
  const gproj::SweepResult sweep = gproj::run_sweep(cfg, effective_jobs(args));
  gproj::write_text_file(cfg.output_dir + "/bounds.csv", gproj::sweep_csv(sweep));
  std::printf("bounds: %zu rows -> %s/bounds.csv\n", sweep.rows.size(),
              cfg.output_dir.c_str());
  return 0;
}

int cmd_estimate(const CommonArgs& args, const std::string& quantities) {
  gproj::ExperimentConfig cfg = load(args);
  gproj::NeedSet needs;
  std::stringstream ss(quantities);
  std::string q;
  while (std::getline(ss, q, ',')) {
    if (q == "expected_kl") needs.expected_kl = true;
    else if (q == "marginal_kl") needs.marginal_kl = true;
    else if (q == "mi_y_theta") { needs.expected_kl = needs.marginal_kl = needs.mi_direct = true; }
    else if (q == "mi_x_y") needs.mi_x_y = true;
    else if (q == "expected_w2") needs.expected_w2 = true;
    else if (q == "var_density_integral") needs.var_integral = true;
    else throw gproj::ConfigError("unknown quantity '" + q + "'");
  }
  const auto points = gproj::expand_grid(cfg.grid);
  gproj::Rng root(cfg.root_seed);
  gproj::Rng measure_root = root.derive(1);
  std::vector<gproj::PointMeasurements> ms(points.size());
  gproj::harness_detail::enforce_runtime_ceiling(cfg, needs, points.size());
  gproj::harness_detail::parallel_for_units(
      points.size(), effective_jobs(args), [&](std::size_t i) {
        ms[i] = gproj::measure_point(cfg, points[i], needs, measure_root.derive(i));
      });
  std::ostringstream out;
  out << "n,k,t,quantity,value,se,reps,m_inner,method,seed_path\n";
  for (const auto& m : ms) {
    const auto emit = [&](const std::optional<gproj::EstimateReport>& rep) {
      if (!rep) return;
      out << m.pt.n << ',' << m.pt.k << ',' << gproj::format_double(m.pt.t) << ','
          << gproj::to_string(rep->quantity) << ','
          << gproj::format_double(rep->value) << ',' << gproj::format_double(rep->se)
          << ',' << rep->reps_outer << ',' << rep->samples_inner << ',' << rep->method
          << ',' << rep->seed_path << '\n';
    };
    emit(m.ekl);
    emit(m.mkl);
    emit(m.mi_dir);
    emit(m.mixy);
    emit(m.w2);
    emit(m.var_int);
  }
  gproj::write_text_file(cfg.output_dir + "/estimates.csv", out.str());
  std::fputs(out.str().c_str(), stdout);
  return 0;
}

int cmd_plotdata(const std::string& in_path, const std::string& x_col,
                 const std::string& y_col, const std::string& yerr_col,
                 const std::string& out_file) {
  const gproj::CsvTable table = gproj::read_csv(in_path);
  const std::string series = gproj::plotdata_series(table, x_col, y_col, yerr_col);
  gproj::write_text_file(out_file, series);
  std::printf("plotdata: wrote %s\n", out_file.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical verification toolkit for Gaussian random projections"};
  app.require_subcommand(1);

  CommonArgs verify_args, sweep_args, stats_args, moments_args, bounds_args,
      estimate_args;
  std::string quantities =
      "expected_kl,marginal_kl,mi_y_theta,mi_x_y,expected_w2,var_density_integral";
  std::string plot_in, plot_x, plot_y, plot_yerr, plot_out = "plotdata.csv";

  auto* verify = app.add_subcommand("verify", "run inequality/identity checks");
  add_common(verify, verify_args);
  auto* sweep = app.add_subcommand("sweep", "long-format parameter sweep");
  add_common(sweep, sweep_args);
  auto* stats = app.add_subcommand("stats", "distribution functionals per grid n");
  add_common(stats, stats_args);
  auto* moments = app.add_subcommand("moments", "moment functionals per grid point");
  add_common(moments, moments_args);
  auto* bounds = app.add_subcommand("bounds", "bound values per grid point");
  add_common(bounds, bounds_args);
  auto* estimate = app.add_subcommand("estimate", "Monte Carlo estimates");
  add_common(estimate, estimate_args);
  estimate->add_option("--quantity", quantities, "comma-separated quantities");
  auto* plotdata = app.add_subcommand("plotdata", "extract (x, y, y_err) series");
  plotdata->add_option("--in", plot_in, "sweep/bounds CSV")->required();
  plotdata->add_option("--x", plot_x, "x column")->required();
  plotdata->add_option("--y", plot_y, "y column")->required();
  plotdata->add_option("--yerr", plot_yerr, "error column (default <y>_se)");
  plotdata->add_option("--out-file", plot_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) return cmd_verify(verify_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args);
    if (stats->parsed()) return cmd_stats(stats_args);
    if (moments->parsed()) return cmd_moments(moments_args);
    if (bounds->parsed()) return cmd_bounds(bounds_args);
    if (estimate->parsed()) return cmd_estimate(estimate_args, quantities);
    if (plotdata->parsed())
      return cmd_plotdata(plot_in, plot_x, plot_y, plot_yerr, plot_out);
  } catch (const gproj::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 64;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 70;
  }
  return 0;
}
