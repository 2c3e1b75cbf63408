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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "gproj/bounds.hpp"
#include "gproj/config.hpp"
#include "gproj/estimators.hpp"
#include "gproj/moments.hpp"
#include "gproj/stats.hpp"
#include "gproj/transport.hpp"

namespace gproj {

// The verification harness wires sources -> stats -> moments -> bounds ->
// estimators into reproducible checks. Execution happens in two phases:
//   1. per-grid-point measurements (parallel work units, each seeded from
//      (root_seed, point index) so results do not depend on the job count);
//   2. serial evaluation of the registered checks against the measurements.

enum class Verdict { kHolds, kHoldsMarginal, kViolated };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kHolds: return "holds";
    case Verdict::kHoldsMarginal: return "holds-marginal";
    case Verdict::kViolated: return "violated";
  }
  return "?";
}

struct VerificationRow {
  std::string check;
  std::map<std::string, double> params;
  double lhs = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  double rhs_log = 0.0;
  double se = 0.0;      // combined SE used for the margin
  double margin = 0.0;  // (rhs - lhs)/se; +/-inf when se == 0
  Verdict verdict = Verdict::kHolds;
  std::string seed_path;
};

struct VerifyResult {
  std::vector<VerificationRow> rows;
  int exit_code = 0;
};

struct SweepResult {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

namespace harness_detail {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

/// One-sided dominance verdict: statistical flutter within 3 sigma is
/// "holds-marginal"; anything beyond is a real violation.
inline Verdict dominance_verdict(double margin) {
  if (margin >= 0.0) return Verdict::kHolds;
  if (margin >= -3.0) return Verdict::kHoldsMarginal;
  return Verdict::kViolated;
}

/// Two-sided identity verdict on the signed z-score margin.
inline Verdict identity_verdict(double margin) {
  const double z = std::abs(margin);
  if (z <= 3.0) return Verdict::kHolds;
  if (z <= 4.0) return Verdict::kHoldsMarginal;
  return Verdict::kViolated;
}

inline VerificationRow dominance_row(std::string check,
                                     std::map<std::string, double> params, double lhs,
                                     double lhs_se, double rhs, double rhs_se,
                                     double rhs_log, const std::string& seed_path) {
  VerificationRow row;
  row.check = std::move(check);
  row.params = std::move(params);
  row.lhs = lhs;
  row.lhs_se = lhs_se;
  row.rhs = rhs;
  row.rhs_log = rhs_log;
  row.se = combined_se(lhs_se, rhs_se);
  if (row.se > 0.0)
    row.margin = (rhs - lhs) / row.se;
  else
    row.margin = lhs <= rhs ? kInf : -kInf;
  row.verdict = dominance_verdict(row.margin);
  row.seed_path = seed_path;
  return row;
}

inline VerificationRow identity_row(std::string check,
                                    std::map<std::string, double> params, double lhs,
                                    double lhs_se, double rhs, double rhs_se,
                                    const std::string& seed_path) {
  VerificationRow row;
  row.check = std::move(check);
  row.params = std::move(params);
  row.lhs = lhs;
  row.lhs_se = lhs_se;
  row.rhs = rhs;
  row.rhs_log = rhs > 0.0 ? std::log(rhs) : -kInf;
  row.se = combined_se(lhs_se, rhs_se);
  row.margin = row.se > 0.0 ? (rhs - lhs) / row.se : (lhs == rhs ? 0.0 : kInf);
  row.verdict = identity_verdict(row.margin);
  row.seed_path = seed_path;
  return row;
}

}  // namespace harness_detail

struct GridPoint {
  std::size_t n = 0;
  std::size_t k = 1;
  double t = 1.0;
  double epsilon = 1.0;

  [[nodiscard]] std::map<std::string, double> as_params() const {
    return {{"n", static_cast<double>(n)},
            {"k", static_cast<double>(k)},
            {"t", t},
            {"epsilon", epsilon}};
  }
};

inline std::vector<GridPoint> expand_grid(const GridSpec& grid) {
  std::vector<GridPoint> pts;
  for (std::size_t n : grid.n)
    for (std::size_t k : grid.k)
      for (double t : grid.t)
        for (double eps : grid.epsilon) pts.push_back({n, k, t, eps});
  return pts;
}

/// Which measurements a check consumes.
struct NeedSet {
  bool stats = false;
  bool moments = false;
  bool expected_kl = false;
  bool marginal_kl = false;
  bool mi_direct = false;
  bool mi_x_y = false;
  bool expected_w2 = false;
  bool var_integral = false;
  bool w2_transfer = false;

  NeedSet& operator|=(const NeedSet& o) {
    stats |= o.stats;
    moments |= o.moments;
    expected_kl |= o.expected_kl;
    marginal_kl |= o.marginal_kl;
    mi_direct |= o.mi_direct;
    mi_x_y |= o.mi_x_y;
    expected_w2 |= o.expected_w2;
    var_integral |= o.var_integral;
    w2_transfer |= o.w2_transfer;
    return *this;
  }
};

struct TransferSample {
  double w2 = 0.0;
  double w2_se = 0.0;
  double kl = 0.0;
  double kl_se = 0.0;
};

/// Everything measured at one grid point.
struct PointMeasurements {
  GridPoint pt;
  SourcePtr source;
  DistributionStats stats;
  std::optional<MomentEstimate> m_km1_mc, m_kp1_mc;
  std::optional<double> m_km1_closed, m_kp1_closed;
  std::optional<EstimateReport> ekl, mkl, mi_dir, mixy, w2, var_int;
  std::vector<TransferSample> transfer;
  std::string seed_path;
};

namespace harness_detail {

inline std::optional<double> closed_m_p(const VectorSource& source, double k, double p,
                                        double t) {
  if (p < 0.0) return std::nullopt;
  if (source.kind() == SourceKind::kOrthogonalSupport ||
      source.kind() == SourceKind::kDeterministicPoint)
    return m_p_orthogonal(*source.collision_lambda(), source.gamma(), t, k, p)
        .estimate.value;
  if (source.kind() == SourceKind::kSphereUniform)
    return m_p_sphere(source.dim(), source.gamma(), t, k, p).estimate.value;
  return std::nullopt;
}

}  // namespace harness_detail

inline PointMeasurements measure_point(const ExperimentConfig& cfg, const GridPoint& pt,
                                       const NeedSet& needs, Rng rng) {
  PointMeasurements m;
  m.pt = pt;
  m.source = cfg.source.make(pt.n);
  m.seed_path = rng.path_string();
  const Budgets& b = cfg.budgets;
  const VectorSource& src = *m.source;
  const double dk = static_cast<double>(pt.k);

  if (needs.stats) {
    Rng r = rng.derive(0);
    m.stats = compute_stats(src, b.n_samples, b.n_pairs, r);
  }
  if (needs.moments) {
    Rng r = rng.derive(1);
    const PairBatch batch = sample_pair_batch(src, b.n_pairs, r);
    if (pt.k >= 1) {
      m.m_km1_mc = m_p_mc(batch, dk, dk - 1.0, pt.t);
      m.m_kp1_mc = m_p_mc(batch, dk, dk + 1.0, pt.t);
      m.m_km1_closed = harness_detail::closed_m_p(src, dk, dk - 1.0, pt.t);
      m.m_kp1_closed = harness_detail::closed_m_p(src, dk, dk + 1.0, pt.t);
    }
  }
  if (needs.expected_kl) {
    Rng r = rng.derive(2);
    m.ekl = expected_kl(src, pt.t, pt.k, b.reps, b.n_outer, b.m_inner, r);
  }
  if (needs.marginal_kl) {
    Rng r = rng.derive(3);
    m.mkl = marginal_kl(src, pt.t, pt.k, b.reps, b.n_outer, b.m_inner, r);
  }
  if (needs.mi_direct) {
    Rng r = rng.derive(4);
    m.mi_dir = mi_y_theta(src, pt.t, pt.k, b.reps, b.n_outer, b.m_inner, r,
                          MiRoute::kDirect);
  }
  if (needs.mi_x_y) {
    Rng r = rng.derive(5);
    m.mixy = mi_x_y(src, pt.t, pt.k, b.reps, b.n_outer, b.m_inner, r);
  }
  if (needs.expected_w2 && pt.k <= 4) {
    Rng r = rng.derive(6);
    ExpectedW2Options opts;
    opts.method = pt.k == 1 ? W2Method::kExactAssignment : W2Method::kEntropicDebiased;
    std::size_t m_samples = b.m_samples;
    if (pt.k >= 2) {
      m_samples = std::min<std::size_t>(m_samples, 1024);
      opts.method = W2Method::kExactAssignment;
    }
    m.w2 = expected_w2(src, pt.k, b.reps, m_samples, r, opts);
  }
  if (needs.var_integral && pt.k == 1) {
    Rng r = rng.derive(7);
    VarDensityOptions opts;
    opts.grid_nodes = b.var_grid_nodes;
    m.var_int = var_density_integral(src, pt.t, b.var_reps, b.m_inner, r, opts);
  }
  if (needs.w2_transfer && pt.k == 1) {
    Rng r = rng.derive(8);
    const std::size_t draws = 3;
    const std::size_t clouds = 4;
    const double sqrt_gamma = std::sqrt(src.gamma());
    std::vector<double> x(src.dim());
    for (std::size_t d = 0; d < draws; ++d) {
      Rng dr = r.derive(d);
      Rng theta_rng = dr.derive(0);
      Matrix theta(1, src.dim());
      {
        const double scale = 1.0 / std::sqrt(static_cast<double>(src.dim()));
        for (double& v : theta.data()) v = scale * theta_rng.gaussian();
      }
      std::vector<double> w2_vals(clouds);
      Rng cloud_rng = dr.derive(1);
      for (std::size_t c = 0; c < clouds; ++c) {
        std::vector<double> za(b.m_samples), zb(b.m_samples);
        for (std::size_t i = 0; i < b.m_samples; ++i) {
          src.sample_into(cloud_rng, x);
          za[i] = dot(theta.row(0), x);
          zb[i] = sqrt_gamma * cloud_rng.gaussian();
        }
        w2_vals[c] = w2_empirical_1d(za, zb);
      }
      Rng kl_rng = dr.derive(2);
      const KlConditionalResult kl =
          kl_conditional(theta, src, pt.t, b.n_outer, b.m_inner, kl_rng);
      const MeanSe w2_ms = mean_from_replicates(w2_vals);
      m.transfer.push_back({w2_ms.value, w2_ms.se, std::max(0.0, kl.estimate.value),
                            kl.estimate.se});
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Check registry
// ---------------------------------------------------------------------------

using PointCheckFn = std::function<void(const ExperimentConfig&,
                                        const PointMeasurements&,
                                        std::vector<VerificationRow>&)>;

struct CheckDef {
  std::string name;
  NeedSet needs;
  bool global = false;       // evaluated once, not per grid point
  bool cross_grid = false;   // consumes all points at once
  PointCheckFn per_point;
  std::function<void(const ExperimentConfig&, Rng,
                     std::vector<VerificationRow>&)> global_fn;
  std::function<void(const ExperimentConfig&,
                     const std::vector<PointMeasurements>&,
                     std::vector<VerificationRow>&)> cross_fn;
};

namespace harness_detail {

/// Propagated SE of a bound that consumes Monte Carlo functional estimates:
/// forward-difference bump of each input by its SE.
inline double bound_se_from_stats(
    const DistributionStats& s,
    const std::function<double(double, double, double)>& f_ab1b2) {
  const double base = f_ab1b2(s.alpha.value, s.beta1.value, s.beta2.value);
  double acc = 0.0;
  const auto bump = [&](double da, double db1, double db2) {
    const double v = f_ab1b2(s.alpha.value + da, s.beta1.value + db1,
                             s.beta2.value + db2);
    if (std::isfinite(v) && std::isfinite(base)) acc += (v - base) * (v - base);
  };
  if (s.alpha.se > 0.0) bump(s.alpha.se, 0.0, 0.0);
  if (s.beta1.se > 0.0) bump(0.0, s.beta1.se, 0.0);
  if (s.beta2.se > 0.0) bump(0.0, 0.0, s.beta2.se);
  return std::sqrt(acc);
}

inline double mi_from_measurements_se(const PointMeasurements& m) {
  return combined_se(m.ekl->se, m.mkl->se);
}

inline double mi_from_measurements(const PointMeasurements& m) {
  return m.ekl->value - m.mkl->value;
}

/// Max violation of the g_{k,p} upper bound over a dense parameter grid;
/// negative values mean the bound dominates everywhere.
inline double gkp_max_violation(std::size_t* points_out = nullptr) {
  const std::vector<double> gammas = {0.25, 0.5, 1.0, 2.0, 4.0};
  const std::vector<double> ts = {0.1, 0.25, 1.0, 4.0, 16.0};
  double worst = -kInf;
  std::size_t count = 0;
  for (int k = 1; k <= 6; ++k) {
    for (const double p : {static_cast<double>(k) - 1.0, static_cast<double>(k) + 1.0}) {
      for (double gamma : gammas) {
        for (double t : ts) {
          for (int i = 0; i <= 40; ++i) {
            const double r = gamma * (-1.0 + 2.0 * static_cast<double>(i) / 40.0);
            const double lhs = g_kp(r / (t + gamma), k, p);
            const double rhs = g_kp_upper(r, t, gamma, k, p);
            worst = std::max(worst, lhs - rhs);
            ++count;
          }
        }
      }
    }
  }
  if (points_out) *points_out = count;
  return worst;
}

inline void check_gkp(const ExperimentConfig&, Rng rng,
                      std::vector<VerificationRow>& out) {
  std::size_t points = 0;
  const double worst = gkp_max_violation(&points);
  out.push_back(dominance_row("gkp_inequality",
                              {{"grid_points", static_cast<double>(points)}}, worst,
                              0.0, 0.0, 0.0, -kInf, rng.path_string()));
}

inline void check_logdev(const ExperimentConfig& cfg, Rng rng,
                         std::vector<VerificationRow>& out) {
  const std::size_t n = std::max<std::size_t>(cfg.budgets.n_samples, 1000);
  struct Law {
    const char* name;
    double mu;
    std::function<double(Rng&)> draw;
  };
  const std::vector<Law> laws = {
      {"exp1", 1.0, [](Rng& r) { return r.exponential(); }},
      {"lognormal01", std::exp(0.5), [](Rng& r) { return std::exp(r.gaussian()); }},
      {"uniform02", 1.0, [](Rng& r) { return r.uniform(0.0, 2.0); }},
  };
  for (std::size_t li = 0; li < laws.size(); ++li) {
    Rng law_rng = rng.derive(li);
    std::vector<double> samples(n);
    for (double& s : samples) s = laws[li].draw(law_rng);
    const double mu = laws[li].mu;
    // E = [0, mu): the set on which the integrand is positive, so the
    // strongest instance of the inequality.
    const LogDevCheck res =
        check_log_dev(samples, mu, [mu](double x) { return x < mu; });
    out.push_back(dominance_row("logdev_inequality",
                                {{"law", static_cast<double>(li)}, {"mu", mu}},
                                res.lhs.value, res.lhs.se, res.rhs.value, res.rhs.se,
                                std::log(std::max(res.rhs.value, 1e-300)),
                                law_rng.path_string()));
  }
}

inline void check_moments_mc_vs_closed(const ExperimentConfig&,
                                       const PointMeasurements& m,
                                       std::vector<VerificationRow>& out) {
  if (!m.m_km1_closed || !m.m_kp1_closed) return;
  const struct {
    double p_offset;
    const MomentEstimate* mc;
    double closed;
  } rows[] = {{-1.0, &*m.m_km1_mc, *m.m_km1_closed},
              {+1.0, &*m.m_kp1_mc, *m.m_kp1_closed}};
  for (const auto& r : rows) {
    auto params = m.pt.as_params();
    params["p"] = static_cast<double>(m.pt.k) + r.p_offset;
    out.push_back(identity_row("moments_mc_vs_closed", params, r.mc->estimate.value,
                               r.mc->estimate.se, r.closed, 0.0, m.seed_path));
  }
}

inline void check_thm1(const ExperimentConfig& cfg, const PointMeasurements& m,
                       std::vector<VerificationRow>& out) {
  if (!m.w2) return;
  const double dk = static_cast<double>(m.pt.k);
  const auto bound = [&](double a, double b1, double b2) {
    return thm1_w2_bound(a, b1, b2, m.stats.gamma, dk, cfg.constants.thm1_c);
  };
  const double rhs = bound(m.stats.alpha.value, m.stats.beta1.value,
                           m.stats.beta2.value);
  const double rhs_se = bound_se_from_stats(m.stats, bound);
  const double lhs = m.w2->extras.count("debiased") ? m.w2->extras.at("debiased")
                                                    : m.w2->value;
  out.push_back(dominance_row("thm1_w2", m.pt.as_params(), lhs, m.w2->se, rhs, rhs_se,
                              std::log(std::max(rhs, 1e-300)), m.seed_path));
}

inline void check_thm2(const ExperimentConfig& cfg, const PointMeasurements& m,
                       std::vector<VerificationRow>& out) {
  if (!m.ekl) return;
  const double dk = static_cast<double>(m.pt.k);
  const auto run_eps = [&](double eps, bool optimized) {
    const auto bound = [&](double a, double b1, double b2) {
      return thm2_kl_bound(a, b1, b2, m.stats.gamma, m.pt.t, eps, dk,
                           cfg.constants.thm2_c)
          .value;
    };
    const LogValue rhs =
        thm2_kl_bound(m.stats.alpha.value, m.stats.beta1.value, m.stats.beta2.value,
                      m.stats.gamma, m.pt.t, eps, dk, cfg.constants.thm2_c);
    const double rhs_se = bound_se_from_stats(m.stats, bound);
    auto params = m.pt.as_params();
    params["epsilon"] = eps;
    params["optimized_eps"] = optimized ? 1.0 : 0.0;
    out.push_back(dominance_row("thm2_kl", params, m.ekl->value, m.ekl->se, rhs.value,
                                rhs_se, rhs.log_value, m.seed_path));
  };
  run_eps(m.pt.epsilon, false);
  const auto [eps_star, opt_value] = thm2_optimize_epsilon(
      m.stats.alpha.value, m.stats.beta1.value, m.stats.beta2.value, m.stats.gamma,
      m.pt.t, dk, cfg.constants.thm2_c);
  (void)opt_value;
  run_eps(eps_star, true);
}

inline void check_thm3(const ExperimentConfig&, const PointMeasurements& m,
                       std::vector<VerificationRow>& out) {
  if (m.pt.k != 1 || !m.ekl) return;
  const auto bound = [&](double a, double b1, double /*b2*/) {
    return thm3_kl_k1_bound(a, b1, m.pt.t);
  };
  const double rhs =
      bound(m.stats.alpha.value, m.stats.beta1.value, m.stats.beta2.value);
  out.push_back(dominance_row("thm3_kl_k1", m.pt.as_params(), m.ekl->value, m.ekl->se,
                              rhs, bound_se_from_stats(m.stats, bound),
                              std::log(std::max(rhs, 1e-300)), m.seed_path));
}

inline void check_thm4(const ExperimentConfig&, const PointMeasurements& m,
                       std::vector<VerificationRow>& out) {
  if (!m.source->constant_magnitude() || !m.ekl) return;
  const double dk = static_cast<double>(m.pt.k);
  const double mean_sq = m.source->mean_sq_norm_over_n().value_or(0.0);
  const auto bound = [&](double /*a*/, double /*b1*/, double b2) {
    return thm4_kl_sphere_bound(mean_sq, b2, m.stats.gamma, m.pt.t, dk).value;
  };
  const LogValue rhs = thm4_kl_sphere_bound(mean_sq, m.stats.beta2.value,
                                            m.stats.gamma, m.pt.t, dk);
  out.push_back(dominance_row("thm4_kl_sphere", m.pt.as_params(), m.ekl->value,
                              m.ekl->se, rhs.value,
                              bound_se_from_stats(m.stats, bound), rhs.log_value,
                              m.seed_path));
}

inline void check_thm5(const ExperimentConfig& cfg, const PointMeasurements& m,
                       std::vector<VerificationRow>& out) {
  if (!m.source->constant_magnitude() || !m.w2) return;
  const double dk = static_cast<double>(m.pt.k);
  const double mean_sq = m.source->mean_sq_norm_over_n().value_or(0.0);
  const auto bound = [&](double /*a*/, double /*b1*/, double b2) {
    return thm5_w2_sphere_bound(mean_sq, b2, m.stats.gamma, dk, cfg.constants.thm5_c)
        .value;
  };
  const Thm5Result rhs = thm5_w2_sphere_bound(mean_sq, m.stats.beta2.value,
                                              m.stats.gamma, dk, cfg.constants.thm5_c);
  const double lhs = m.w2->extras.count("debiased") ? m.w2->extras.at("debiased")
                                                    : m.w2->value;
  auto params = m.pt.as_params();
  params["t_star"] = rhs.t_star;
  out.push_back(dominance_row("thm5_w2_sphere", params, lhs, m.w2->se, rhs.value,
                              bound_se_from_stats(m.stats, bound),
                              std::log(std::max(rhs.value, 1e-300)), m.seed_path));
}

inline void check_dpy_alpha(const ExperimentConfig&, const PointMeasurements& m,
                            std::vector<VerificationRow>& out) {
  if (!m.mkl) return;
  const double dk = static_cast<double>(m.pt.k);
  const auto bound = [&](double a, double /*b1*/, double /*b2*/) {
    return kl_marginal_bound(a, m.stats.gamma, m.pt.t, dk);
  };
  const double rhs =
      bound(m.stats.alpha.value, m.stats.beta1.value, m.stats.beta2.value);
  out.push_back(dominance_row("dpy_alpha", m.pt.as_params(), m.mkl->value, m.mkl->se,
                              rhs, bound_se_from_stats(m.stats, bound),
                              std::log(std::max(rhs, 1e-300)), m.seed_path));
}

inline void check_edkl_identity(const ExperimentConfig&, const PointMeasurements& m,
                                std::vector<VerificationRow>& out) {
  if (!m.ekl || !m.mkl || !m.mi_dir) return;
  const double rhs = m.mkl->value + m.mi_dir->value;
  const double rhs_se = combined_se(m.mkl->se, m.mi_dir->se);
  out.push_back(identity_row("edkl_identity", m.pt.as_params(), m.ekl->value,
                             m.ekl->se, rhs, rhs_se, m.seed_path));
}

inline void check_cs_gap(const ExperimentConfig&, const PointMeasurements& m,
                         std::vector<VerificationRow>& out) {
  if (!m.ekl || !m.mixy) return;
  const double dk = static_cast<double>(m.pt.k);
  const double capacity = dk * awgn_capacity(m.source->gamma() / m.pt.t);
  const double lhs = m.ekl->value + m.mixy->value;
  out.push_back(identity_row("cs_gap_identity", m.pt.as_params(), lhs,
                             combined_se(m.ekl->se, m.mixy->se), capacity, 0.0,
                             m.seed_path));
}

inline void check_lemma2(const ExperimentConfig&, const PointMeasurements& m,
                         std::vector<VerificationRow>& out) {
  if (m.pt.k != 1 || !m.var_int || !m.ekl || !m.mkl) return;
  const double rhs = kappa() * m.var_int->value;
  out.push_back(dominance_row("lemma2_mi_var", m.pt.as_params(),
                              mi_from_measurements(m), mi_from_measurements_se(m),
                              rhs, kappa() * m.var_int->se,
                              std::log(std::max(rhs, 1e-300)), m.seed_path));
}

inline void check_lemma3(const ExperimentConfig&, const PointMeasurements& m,
                         std::vector<VerificationRow>& out) {
  if (m.pt.k != 1 || !m.var_int || !m.m_km1_mc || !m.m_kp1_mc) return;
  const double m0 = m.m_km1_mc->estimate.value;
  const double m2 = m.m_kp1_mc->estimate.value;
  const BigM big = big_m(m0, m2);
  const double rhs = mi_bound_from_m(big.value, 1.0);
  double rhs_se = 0.0;
  if (m0 > 0.0 && m2 > 0.0 && rhs > 0.0) {
    const double rel0 = m.m_km1_mc->estimate.se / m0;
    const double rel2 = m.m_kp1_mc->estimate.se / m2;
    rhs_se = 0.25 * rhs * std::sqrt(rel0 * rel0 + rel2 * rel2);
  }
  out.push_back(dominance_row("lemma3_chain", m.pt.as_params(),
                              kappa() * m.var_int->value, kappa() * m.var_int->se,
                              rhs, rhs_se, std::log(std::max(rhs, 1e-300)),
                              m.seed_path));
}

inline void check_lemma4(const ExperimentConfig&, const PointMeasurements& m,
                         std::vector<VerificationRow>& out) {
  if (!m.ekl || !m.mkl || (!m.m_km1_closed && !m.m_km1_mc)) return;
  const double dk = static_cast<double>(m.pt.k);
  double m_km1 = 0.0, m_kp1 = 0.0, rhs_se = 0.0;
  if (m.m_km1_closed && m.m_kp1_closed) {
    m_km1 = *m.m_km1_closed;
    m_kp1 = *m.m_kp1_closed;
  } else {
    m_km1 = m.m_km1_mc->estimate.value;
    m_kp1 = m.m_kp1_mc->estimate.value;
  }
  const BigM big = big_m(m_km1, m_kp1);
  const double rhs = mi_bound_from_m(big.value, dk);
  if (!m.m_km1_closed && m_km1 > 0.0 && m_kp1 > 0.0 && rhs > 0.0) {
    const double rel0 = m.m_km1_mc->estimate.se / m_km1;
    const double rel2 = m.m_kp1_mc->estimate.se / m_kp1;
    rhs_se = 0.25 * rhs * std::sqrt(rel0 * rel0 + rel2 * rel2);
  }
  out.push_back(dominance_row("lemma4_mi", m.pt.as_params(), mi_from_measurements(m),
                              mi_from_measurements_se(m), rhs, rhs_se,
                              std::log(std::max(rhs, 1e-300)), m.seed_path));
}

inline void check_lemma6(const ExperimentConfig&, const PointMeasurements& m,
                         std::vector<VerificationRow>& out) {
  if (m.pt.k != 1 || !m.m_km1_mc || !m.m_kp1_mc) return;
  const BigM big = big_m(m.m_km1_mc->estimate.value, m.m_kp1_mc->estimate.value);
  const double rhs = m_bound_k1(m.stats.beta1.value, m.pt.t);
  double lhs_se = 0.0;
  if (big.value > 0.0) {
    const double m0 = std::max(m.m_km1_mc->estimate.value, 1e-300);
    const double m2 = std::max(m.m_kp1_mc->estimate.value, 1e-300);
    lhs_se = 0.5 * big.value *
             std::sqrt(std::pow(m.m_km1_mc->estimate.se / m0, 2) +
                       std::pow(m.m_kp1_mc->estimate.se / m2, 2));
  }
  out.push_back(dominance_row("lemma6_m_k1", m.pt.as_params(), big.value, lhs_se, rhs,
                              m.stats.beta1.se / m.pt.t,
                              std::log(std::max(rhs, 1e-300)), m.seed_path));
}

inline void check_lemma7(const ExperimentConfig&, const PointMeasurements& m,
                         std::vector<VerificationRow>& out) {
  if (!m.source->constant_magnitude() || !m.m_km1_mc || !m.m_kp1_mc) return;
  const double dk = static_cast<double>(m.pt.k);
  const double mean_sq = m.source->mean_sq_norm_over_n().value_or(0.0);
  const BigM big = big_m(m.m_km1_mc->estimate.value, m.m_kp1_mc->estimate.value);
  const LogValue rhs = m_bound_const_magnitude(mean_sq, m.stats.gamma,
                                               m.stats.beta2.value, m.pt.t, dk);
  double lhs_se = 0.0;
  if (big.value > 0.0) {
    const double m0 = std::max(m.m_km1_mc->estimate.value, 1e-300);
    const double m2 = std::max(m.m_kp1_mc->estimate.value, 1e-300);
    lhs_se = 0.5 * big.value *
             std::sqrt(std::pow(m.m_km1_mc->estimate.se / m0, 2) +
                       std::pow(m.m_kp1_mc->estimate.se / m2, 2));
  }
  const auto bound = [&](double /*a*/, double /*b1*/, double b2) {
    return m_bound_const_magnitude(mean_sq, m.stats.gamma, b2, m.pt.t, dk).value;
  };
  out.push_back(dominance_row("lemma7_m_bounded", m.pt.as_params(), big.value, lhs_se,
                              rhs.value, bound_se_from_stats(m.stats, bound),
                              rhs.log_value, m.seed_path));
}

inline void check_w2_transfer(const ExperimentConfig&, const PointMeasurements& m,
                              std::vector<VerificationRow>& out) {
  if (m.pt.k != 1 || m.transfer.empty()) return;
  for (std::size_t i = 0; i < m.transfer.size(); ++i) {
    const TransferSample& s = m.transfer[i];
    const double rhs = w2_from_kl(s.kl, m.pt.t, m.source->gamma(), 1.0);
    auto params = m.pt.as_params();
    params["draw"] = static_cast<double>(i);
    out.push_back(dominance_row("w2_kl_transfer", params, s.w2, s.w2_se, rhs,
                                4.0 * (m.pt.t + m.source->gamma()) * s.kl_se,
                                std::log(std::max(rhs, 1e-300)), m.seed_path));
  }
}

inline void check_cor1_trend(const ExperimentConfig& cfg,
                             const std::vector<PointMeasurements>& all,
                             std::vector<VerificationRow>& out) {
  // Group points sharing (k, t, epsilon) and order by n.
  std::map<std::tuple<std::size_t, double, double>, std::vector<const PointMeasurements*>>
      groups;
  for (const auto& m : all) {
    if (!m.w2) continue;
    groups[{m.pt.k, m.pt.t, m.pt.epsilon}].push_back(&m);
  }
  for (auto& [key, pts] : groups) {
    std::sort(pts.begin(), pts.end(),
              [](const PointMeasurements* a, const PointMeasurements* b) {
                return a->pt.n < b->pt.n;
              });
    // Dominance of the corollary rate at every n.
    for (const PointMeasurements* m : pts) {
      const double gamma = m->source->gamma();
      const double lhs = (m->w2->extras.count("debiased") ? m->w2->extras.at("debiased")
                                                          : m->w2->value) /
                         gamma;
      const double rhs =
          cor1_w2_bound(static_cast<double>(m->pt.n), static_cast<double>(m->pt.k),
                        cfg.constants.cor1_c_prime);
      out.push_back(dominance_row("cor1_dominance", m->pt.as_params(), lhs,
                                  m->w2->se / gamma, rhs, 0.0, std::log(rhs),
                                  m->seed_path));
    }
    // Strict decrease along n with a 2 sigma gap (raw values; the empirical
    // OT bias is common to both sides of each gap).
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const PointMeasurements* lo = pts[i];
      const PointMeasurements* hi = pts[i + 1];
      const double v_lo = lo->w2->value / lo->source->gamma();
      const double v_hi = hi->w2->value / hi->source->gamma();
      const double se =
          combined_se(lo->w2->se / lo->source->gamma(), hi->w2->se / hi->source->gamma());
      VerificationRow row;
      row.check = "cor1_trend";
      row.params = lo->pt.as_params();
      row.params["n_lo"] = static_cast<double>(lo->pt.n);
      row.params["n_hi"] = static_cast<double>(hi->pt.n);
      row.params.erase("n");
      row.lhs = v_hi;
      row.lhs_se = hi->w2->se / hi->source->gamma();
      row.rhs = v_lo;
      row.rhs_log = std::log(std::max(v_lo, 1e-300));
      row.se = se;
      row.margin = se > 0.0 ? (v_lo - v_hi) / se : (v_hi < v_lo ? kInf : -kInf);
      // Required gap: > 2 sigma. Below that but still decreasing is marginal.
      row.verdict = row.margin >= 2.0
                        ? Verdict::kHolds
                        : (row.margin >= 0.0 ? Verdict::kHoldsMarginal
                                             : Verdict::kViolated);
      row.seed_path = lo->seed_path;
      out.push_back(row);
    }
  }
}

inline const std::vector<CheckDef>& check_registry() {
  static const std::vector<CheckDef> defs = [] {
    std::vector<CheckDef> v;
    const auto add_point = [&](const char* name, NeedSet needs, PointCheckFn fn) {
      CheckDef d;
      d.name = name;
      d.needs = needs;
      d.per_point = std::move(fn);
      v.push_back(std::move(d));
    };
    NeedSet ns;

    CheckDef gkp;
    gkp.name = "gkp_inequality";
    gkp.global = true;
    gkp.global_fn = check_gkp;
    v.push_back(gkp);

    CheckDef logdev;
    logdev.name = "logdev_inequality";
    logdev.global = true;
    logdev.global_fn = check_logdev;
    v.push_back(logdev);

    ns = {};
    ns.moments = true;
    add_point("moments_mc_vs_closed", ns, check_moments_mc_vs_closed);

    ns = {};
    ns.stats = true;
    ns.expected_w2 = true;
    add_point("thm1_w2", ns, check_thm1);

    ns = {};
    ns.stats = true;
    ns.expected_kl = true;
    add_point("thm2_kl", ns, check_thm2);
    add_point("thm3_kl_k1", ns, check_thm3);
    add_point("thm4_kl_sphere", ns, check_thm4);

    ns = {};
    ns.stats = true;
    ns.expected_w2 = true;
    add_point("thm5_w2_sphere", ns, check_thm5);

    ns = {};
    ns.stats = true;
    ns.marginal_kl = true;
    add_point("dpy_alpha", ns, check_dpy_alpha);

    ns = {};
    ns.expected_kl = true;
    ns.marginal_kl = true;
    ns.mi_direct = true;
    add_point("edkl_identity", ns, check_edkl_identity);

    ns = {};
    ns.expected_kl = true;
    ns.mi_x_y = true;
    add_point("cs_gap_identity", ns, check_cs_gap);

    ns = {};
    ns.expected_kl = true;
    ns.marginal_kl = true;
    ns.var_integral = true;
    add_point("lemma2_mi_var", ns, check_lemma2);

    ns = {};
    ns.moments = true;
    ns.var_integral = true;
    add_point("lemma3_chain", ns, check_lemma3);

    ns = {};
    ns.expected_kl = true;
    ns.marginal_kl = true;
    ns.moments = true;
    add_point("lemma4_mi", ns, check_lemma4);

    ns = {};
    ns.stats = true;
    ns.moments = true;
    add_point("lemma6_m_k1", ns, check_lemma6);
    add_point("lemma7_m_bounded", ns, check_lemma7);

    ns = {};
    ns.w2_transfer = true;
    add_point("w2_kl_transfer", ns, check_w2_transfer);

    CheckDef cor1;
    cor1.name = "cor1_trend";
    cor1.cross_grid = true;
    cor1.needs.stats = true;
    cor1.needs.expected_w2 = true;
    cor1.cross_fn = check_cor1_trend;
    v.push_back(cor1);

    return v;
  }();
  return defs;
}

inline const CheckDef& find_check(const std::string& name) {
  for (const CheckDef& d : check_registry())
    if (d.name == name) return d;
  throw ConfigError("unknown check '" + name + "'");
}

/// Coarse work model in floating-point-operation units, used to refuse
/// configs whose budgets cannot finish under the runtime ceiling.
inline double estimate_cost_flops(const ExperimentConfig& cfg, const NeedSet& needs,
                                  std::size_t n_points) {
  const Budgets& b = cfg.budgets;
  double per_point = 0.0;
  double n_max = 1.0, k_max = 1.0;
  for (std::size_t n : cfg.grid.n) n_max = std::max(n_max, static_cast<double>(n));
  for (std::size_t k : cfg.grid.k) k_max = std::max(k_max, static_cast<double>(k));
  const double dn = n_max, dk = k_max;
  const double kernel_cost = 24.0;  // exp + distance, roughly
  if (needs.stats)
    per_point += static_cast<double>(b.n_samples) * dn +
                 3.0 * static_cast<double>(b.n_pairs) * dn;
  if (needs.moments) per_point += 2.5 * static_cast<double>(b.n_pairs) * dn;
  const double nested = static_cast<double>(b.reps) *
                        (static_cast<double>(b.m_inner) * dn * dk +
                         static_cast<double>(b.n_outer) *
                             static_cast<double>(b.m_inner) * dk * kernel_cost);
  if (needs.expected_kl) per_point += nested;
  if (needs.marginal_kl) per_point += 2.0 * nested;
  if (needs.mi_direct) per_point += 2.0 * nested;
  if (needs.mi_x_y) per_point += nested;
  if (needs.expected_w2)
    per_point += static_cast<double>(b.reps) * 1.5 *
                 (static_cast<double>(b.m_samples) * (dn + 60.0));
  if (needs.var_integral)
    per_point += static_cast<double>(b.var_reps) *
                 (static_cast<double>(b.var_grid_nodes) *
                      static_cast<double>(b.m_inner) * kernel_cost +
                  static_cast<double>(b.m_inner) * dn);
  if (needs.w2_transfer)
    per_point += 12.0 * static_cast<double>(b.m_samples) * (dn + 60.0) + nested;
  return per_point * static_cast<double>(n_points);
}

inline void enforce_runtime_ceiling(const ExperimentConfig& cfg, const NeedSet& needs,
                                    std::size_t n_points) {
  const double flops = estimate_cost_flops(cfg, needs, n_points);
  const double throughput = 2.0e8;  // conservative single-core flop/s
  const double seconds = flops / throughput;
  if (seconds > cfg.runtime_ceiling_sec)
    throw ConfigError("estimated runtime " + std::to_string(seconds) +
                      "s exceeds the configured ceiling of " +
                      std::to_string(cfg.runtime_ceiling_sec) + "s");
}

/// Runs fn(i) for i in [0, count) on `jobs` threads. Output must be written
/// to pre-sized slots so the result is independent of scheduling.
inline void parallel_for_units(std::size_t count, int jobs,
                               const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const int workers =
      std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace harness_detail

inline int default_jobs() {
  if (const char* env = std::getenv("GPROJ_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs every configured check over the grid. Exit code: 0 all hold,
/// 2 marginal rows only, 1 at least one violation (64 is reserved for
/// config errors and raised via ConfigError before this returns).
inline VerifyResult run_verify(const ExperimentConfig& cfg, int jobs = 1) {
  using namespace harness_detail;
  if (cfg.checks.empty()) throw ConfigError("verify: no checks configured");

  NeedSet needs;
  std::vector<const CheckDef*> defs;
  for (const std::string& name : cfg.checks) {
    const CheckDef& d = find_check(name);
    needs |= d.needs;
    defs.push_back(&d);
  }
  const std::vector<GridPoint> points = expand_grid(cfg.grid);
  enforce_runtime_ceiling(cfg, needs, points.size());

  Rng root(cfg.root_seed);
  Rng measure_root = root.derive(1);
  std::vector<PointMeasurements> measurements(points.size());
  parallel_for_units(points.size(), jobs, [&](std::size_t i) {
    measurements[i] = measure_point(cfg, points[i], needs, measure_root.derive(i));
  });

  VerifyResult result;
  Rng global_root = root.derive(2);
  for (std::size_t ci = 0; ci < defs.size(); ++ci) {
    const CheckDef& d = *defs[ci];
    if (d.global) {
      d.global_fn(cfg, global_root.derive(ci), result.rows);
    } else if (d.cross_grid) {
      d.cross_fn(cfg, measurements, result.rows);
    } else {
      for (const PointMeasurements& m : measurements) d.per_point(cfg, m, result.rows);
    }
  }

  bool any_marginal = false;
  for (const VerificationRow& row : result.rows) {
    if (row.verdict == Verdict::kViolated) {
      result.exit_code = 1;
      return result;
    }
    any_marginal |= row.verdict == Verdict::kHoldsMarginal;
  }
  result.exit_code = any_marginal ? 2 : 0;
  return result;
}

/// Long-format sweep: one row per grid point with the functionals, every
/// bound, and (optionally) every estimate.
inline SweepResult run_sweep(const ExperimentConfig& cfg, int jobs = 1) {
  using namespace harness_detail;
  NeedSet needs;
  needs.stats = true;
  needs.moments = true;
  if (cfg.sweep_estimates) {
    needs.expected_kl = true;
    needs.marginal_kl = true;
    needs.mi_direct = true;
    needs.mi_x_y = true;
    needs.expected_w2 = true;
    needs.var_integral = true;
  }
  const std::vector<GridPoint> points = expand_grid(cfg.grid);
  enforce_runtime_ceiling(cfg, needs, points.size());

  Rng root(cfg.root_seed);
  Rng measure_root = root.derive(1);
  std::vector<PointMeasurements> ms(points.size());
  parallel_for_units(points.size(), jobs, [&](std::size_t i) {
    ms[i] = measure_point(cfg, points[i], needs, measure_root.derive(i));
  });

  SweepResult out;
  out.columns = {
      "n", "k", "t", "epsilon", "gamma",
      "alpha", "alpha_se", "beta1", "beta1_se", "beta2", "beta2_se",
      "m_km1", "m_km1_se", "m_kp1", "m_kp1_se", "big_m",
      "thm1_bound", "thm2_bound", "thm2_bound_log", "thm2_opt_eps",
      "thm2_opt_bound", "thm3_bound", "thm4_bound", "thm4_bound_log",
      "thm5_bound", "thm5_t_star", "cor1_bound", "kl_marginal_bound",
      "lemma4_mi_bound", "lemma6_bound", "lemma7_bound", "lemma7_bound_log",
      "capacity",
      "expected_kl", "expected_kl_se", "marginal_kl", "marginal_kl_se",
      "mi_y_theta", "mi_y_theta_se", "mi_x_y", "mi_x_y_se",
      "expected_w2", "expected_w2_se", "expected_w2_debiased",
      "var_integral", "var_integral_se",
  };
  for (const PointMeasurements& m : ms) {
    const double dk = static_cast<double>(m.pt.k);
    const DistributionStats& s = m.stats;
    std::vector<double> row;
    row.reserve(out.columns.size());
    const auto push = [&](double v) { row.push_back(v); };
    push(static_cast<double>(m.pt.n));
    push(dk);
    push(m.pt.t);
    push(m.pt.epsilon);
    push(s.gamma);
    push(s.alpha.value);
    push(s.alpha.se);
    push(s.beta1.value);
    push(s.beta1.se);
    push(s.beta2.value);
    push(s.beta2.se);
    push(m.m_km1_mc ? m.m_km1_mc->estimate.value : kNan);
    push(m.m_km1_mc ? m.m_km1_mc->estimate.se : kNan);
    push(m.m_kp1_mc ? m.m_kp1_mc->estimate.value : kNan);
    push(m.m_kp1_mc ? m.m_kp1_mc->estimate.se : kNan);
    const BigM big = m.m_km1_mc
                         ? big_m(m.m_km1_mc->estimate.value, m.m_kp1_mc->estimate.value)
                         : BigM{kNan, false};
    push(big.value);
    push(thm1_w2_bound(s.alpha.value, s.beta1.value, s.beta2.value, s.gamma, dk,
                       cfg.constants.thm1_c));
    const LogValue thm2 = thm2_kl_bound(s.alpha.value, s.beta1.value, s.beta2.value,
                                        s.gamma, m.pt.t, m.pt.epsilon, dk,
                                        cfg.constants.thm2_c);
    push(thm2.value);
    push(thm2.log_value);
    const auto [eps_star, opt_bound] =
        thm2_optimize_epsilon(s.alpha.value, s.beta1.value, s.beta2.value, s.gamma,
                              m.pt.t, dk, cfg.constants.thm2_c);
    push(eps_star);
    push(opt_bound);
    push(m.pt.k == 1 ? thm3_kl_k1_bound(s.alpha.value, s.beta1.value, m.pt.t) : kNan);
    if (m.source->constant_magnitude()) {
      const double mean_sq = m.source->mean_sq_norm_over_n().value_or(0.0);
      const LogValue thm4 =
          thm4_kl_sphere_bound(mean_sq, s.beta2.value, s.gamma, m.pt.t, dk);
      push(thm4.value);
      push(thm4.log_value);
      const Thm5Result thm5 = thm5_w2_sphere_bound(mean_sq, s.beta2.value, s.gamma, dk,
                                                   cfg.constants.thm5_c);
      push(thm5.value);
      push(thm5.t_star);
    } else {
      push(kNan);
      push(kNan);
      push(kNan);
      push(kNan);
    }
    push(cor1_w2_bound(static_cast<double>(m.pt.n), dk, cfg.constants.cor1_c_prime));
    push(kl_marginal_bound(s.alpha.value, s.gamma, m.pt.t, dk));
    push(std::isfinite(big.value) ? mi_bound_from_m(big.value, dk) : kNan);
    push(m.pt.k == 1 ? m_bound_k1(s.beta1.value, m.pt.t) : kNan);
    if (m.source->constant_magnitude()) {
      const LogValue l7 = m_bound_const_magnitude(
          m.source->mean_sq_norm_over_n().value_or(0.0), s.gamma, s.beta2.value,
          m.pt.t, dk);
      push(l7.value);
      push(l7.log_value);
    } else {
      push(kNan);
      push(kNan);
    }
    push(dk * awgn_capacity(s.gamma / m.pt.t));
    push(m.ekl ? m.ekl->value : kNan);
    push(m.ekl ? m.ekl->se : kNan);
    push(m.mkl ? m.mkl->value : kNan);
    push(m.mkl ? m.mkl->se : kNan);
    push(m.mi_dir ? m.mi_dir->value : kNan);
    push(m.mi_dir ? m.mi_dir->se : kNan);
    push(m.mixy ? m.mixy->value : kNan);
    push(m.mixy ? m.mixy->se : kNan);
    push(m.w2 ? m.w2->value : kNan);
    push(m.w2 ? m.w2->se : kNan);
    push(m.w2 && m.w2->extras.count("debiased") ? m.w2->extras.at("debiased") : kNan);
    push(m.var_int ? m.var_int->value : kNan);
    push(m.var_int ? m.var_int->se : kNan);
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace gproj
