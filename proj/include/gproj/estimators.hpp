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
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gproj/matrix.hpp"
#include "gproj/mc.hpp"
#include "gproj/quadrature.hpp"
#include "gproj/rng.hpp"
#include "gproj/sources.hpp"
#include "gproj/transport.hpp"

namespace gproj {

// Direct Monte Carlo estimators for the quantities the analytic bounds
// control: conditional and marginal relative entropies, the mutual
// informations I(Y;Theta) and I(X;Y|Theta), the expected squared
// Wasserstein distance of the projections, and the density-variance
// integral behind the mutual-information bound.
//
// All conditional densities are kernel mixtures p(y) = mean_m phi_t(y - z_m)
// evaluated through log-sum-exp. Outer evaluation points are always drawn
// independently of the inner mixture samples. The plug-in log density makes
// the KL estimators downward-biased (Jensen); the Richardson option
// quantifies that bias by re-evaluating on half the inner sample.

enum class EstimateQuantity {
  kExpectedW2,
  kExpectedKl,
  kMarginalKl,
  kMiYTheta,
  kMiXY,
  kVarDensityIntegral,
};

inline const char* to_string(EstimateQuantity q) {
  switch (q) {
    case EstimateQuantity::kExpectedW2: return "expected_w2";
    case EstimateQuantity::kExpectedKl: return "expected_kl";
    case EstimateQuantity::kMarginalKl: return "marginal_kl";
    case EstimateQuantity::kMiYTheta: return "mi_y_theta";
    case EstimateQuantity::kMiXY: return "mi_x_y";
    case EstimateQuantity::kVarDensityIntegral: return "var_density_integral";
  }
  return "?";
}

struct EstimateReport {
  EstimateQuantity quantity = EstimateQuantity::kExpectedKl;
  double value = 0.0;
  double se = 0.0;
  std::size_t reps_outer = 0;
  std::size_t samples_inner = 0;
  std::string method;
  std::string seed_path;
  std::map<std::string, double> extras;
};

/// Isotropic Gaussian reference law (G_Z has variance gamma, G_Y gamma + t).
struct GaussianReference {
  std::size_t k = 1;
  double variance = 1.0;

  GaussianReference(std::size_t k_in, double variance_in)
      : k(k_in), variance(variance_in) {
    if (!(variance > 0.0))
      throw std::invalid_argument("gaussian reference: variance > 0");
  }

  [[nodiscard]] double log_density(std::span<const double> y) const {
    return -0.5 * static_cast<double>(k) *
               std::log(2.0 * std::numbers::pi * variance) -
           0.5 * squared_norm(y) / variance;
  }
};

struct DensityEstimate {
  double value = 0.0;      // exp(log_value); 0 when it underflows
  double se = 0.0;         // Monte Carlo SE of the kernel average
  double log_value = 0.0;  // always valid
  bool log_only = false;   // true when `value` underflowed to zero
};

namespace detail {

/// log of mean_m phi_t(y - z_m) over the rows of z_samples.
inline double log_kernel_mixture(const Matrix& z_samples, double t,
                                 std::span<const double> y, std::size_t use_rows,
                                 std::vector<double>& scratch) {
  const std::size_t m = use_rows;
  const std::size_t k = z_samples.cols();
  scratch.resize(m);
  const double inv_2t = 0.5 / t;
  for (std::size_t j = 0; j < m; ++j)
    scratch[j] = -inv_2t * squared_distance(y, z_samples.row(j));
  const double lse = log_sum_exp(std::span<const double>(scratch.data(), m));
  return lse - std::log(static_cast<double>(m)) -
         0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi * t);
}

}  // namespace detail

/// Kernel estimate of the conditional density p_{Y|theta}(y) from projected
/// samples z_m = theta x_m (rows of z_samples).
inline DensityEstimate conditional_density_y(const Matrix& z_samples, double t,
                                             std::span<const double> y) {
  if (!(t > 0.0)) throw std::invalid_argument("conditional_density_y: t > 0");
  if (y.size() != z_samples.cols())
    throw std::invalid_argument("conditional_density_y: dimension mismatch");
  const std::size_t m = z_samples.rows();
  std::vector<double> expo;
  DensityEstimate out;
  out.log_value = detail::log_kernel_mixture(z_samples, t, y, m, expo);
  out.value = std::exp(out.log_value);
  out.log_only = out.value == 0.0;
  // SE of the kernel mean, computed on exponent-shifted values for stability.
  double emax = -std::numeric_limits<double>::infinity();
  for (double e : expo) emax = std::max(emax, e);
  double s = 0.0, s2 = 0.0;
  for (double e : expo) {
    const double w = std::exp(e - emax);
    s += w;
    s2 += w * w;
  }
  const double mean_w = s / static_cast<double>(m);
  const double var_w =
      m > 1 ? (s2 - static_cast<double>(m) * mean_w * mean_w) /
                  static_cast<double>(m - 1)
            : 0.0;
  const double log_norm = -0.5 * static_cast<double>(z_samples.cols()) *
                          std::log(2.0 * std::numbers::pi * t);
  out.se = std::exp(log_norm + emax) *
           std::sqrt(std::max(0.0, var_w) / static_cast<double>(m));
  return out;
}

/// Convenience overload taking ambient samples and projecting them.
inline DensityEstimate conditional_density_y(const Matrix& theta, double t,
                                             const Matrix& x_samples,
                                             std::span<const double> y) {
  Matrix z(x_samples.rows(), theta.rows());
  for (std::size_t i = 0; i < x_samples.rows(); ++i)
    matvec(theta, x_samples.row(i), z.row(i));
  return conditional_density_y(z, t, y);
}

struct KlConditionalOptions {
  bool richardson = false;  // also evaluate on half the inner sample
};

struct KlConditionalResult {
  MeanSe estimate;
  /// value(m_inner) - value(m_inner/2); roughly the remaining Jensen bias.
  std::optional<double> bias_probe;
};

/// Nested Monte Carlo estimate of D(P_{Y|theta} || G_Y) for one
/// realization theta. Outer points are fresh draws from P_{Y|theta},
/// independent of the inner mixture sample.
inline KlConditionalResult kl_conditional(const Matrix& theta,
                                          const VectorSource& source, double t,
                                          std::size_t n_outer, std::size_t m_inner,
                                          Rng& rng,
                                          const KlConditionalOptions& opts = {}) {
  if (!(t > 0.0)) throw std::invalid_argument("kl_conditional: t > 0");
  if (theta.cols() != source.dim())
    throw std::invalid_argument("kl_conditional: theta/source dimension mismatch");
  const std::size_t k = theta.rows();
  Rng inner_rng = rng.derive(0);
  Rng outer_rng = rng.derive(1);

  Matrix z_inner(m_inner, k);
  std::vector<double> x(source.dim());
  for (std::size_t j = 0; j < m_inner; ++j) {
    source.sample_into(inner_rng, x);
    matvec(theta, x, z_inner.row(j));
  }

  const GaussianReference g_y(k, source.gamma() + t);
  const double sqrt_t = std::sqrt(t);
  std::vector<double> vals(n_outer), vals_half(opts.richardson ? n_outer : 0);
  std::vector<double> y(k), scratch;
  for (std::size_t i = 0; i < n_outer; ++i) {
    source.sample_into(outer_rng, x);
    matvec(theta, x, y);
    for (double& c : y) c += sqrt_t * outer_rng.gaussian();
    const double log_ref = g_y.log_density(y);
    vals[i] = detail::log_kernel_mixture(z_inner, t, y, m_inner, scratch) - log_ref;
    if (opts.richardson)
      vals_half[i] =
          detail::log_kernel_mixture(z_inner, t, y, m_inner / 2, scratch) - log_ref;
  }
  KlConditionalResult out;
  out.estimate = batch_mean_se(vals);
  if (opts.richardson)
    out.bias_probe = out.estimate.value - sample_mean(vals_half);
  return out;
}

namespace detail {

inline Matrix draw_theta_matrix(std::size_t k, std::size_t n, Rng& rng) {
  Matrix theta(k, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& v : theta.data()) v = scale * rng.gaussian();
  return theta;
}

/// Draw y ~ P_Y marginally: fresh theta, fresh x, fresh noise.
inline void draw_marginal_y(const VectorSource& source, double t, std::size_t k,
                            Rng& rng, std::vector<double>& x, std::span<double> y) {
  const std::size_t n = source.dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  source.sample_into(rng, x);
  const double sqrt_t = std::sqrt(t);
  for (std::size_t c = 0; c < k; ++c) {
    double dot_cx = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot_cx += scale * rng.gaussian() * x[j];
    y[c] = dot_cx + sqrt_t * rng.gaussian();
  }
}

inline EstimateReport report_from_replicates(EstimateQuantity quantity,
                                             std::span<const double> reps,
                                             std::size_t m_inner,
                                             const std::string& method,
                                             const Rng& rng) {
  const MeanSe ms = mean_from_replicates(reps);
  EstimateReport out;
  out.quantity = quantity;
  out.value = ms.value;
  out.se = ms.se;
  out.reps_outer = reps.size();
  out.samples_inner = m_inner;
  out.method = method;
  out.seed_path = rng.path_string();
  return out;
}

}  // namespace detail

/// E over Theta of D(P_{Y|Theta} || G_Y); the SE comes from the replicate
/// spread, which includes the inner Monte Carlo noise.
inline EstimateReport expected_kl(const VectorSource& source, double t, std::size_t k,
                                  std::size_t reps, std::size_t n_outer,
                                  std::size_t m_inner, Rng& rng,
                                  const KlConditionalOptions& opts = {}) {
  if (reps < 2) throw std::invalid_argument("expected_kl: reps >= 2");
  std::vector<double> values(reps);
  double probe_sum = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rep_rng = rng.derive(r);
    Rng theta_rng = rep_rng.derive(0);
    const Matrix theta = detail::draw_theta_matrix(k, source.dim(), theta_rng);
    Rng kl_rng = rep_rng.derive(1);
    const KlConditionalResult res =
        kl_conditional(theta, source, t, n_outer, m_inner, kl_rng, opts);
    values[r] = res.estimate.value;
    if (res.bias_probe) probe_sum += *res.bias_probe;
  }
  EstimateReport out = detail::report_from_replicates(
      EstimateQuantity::kExpectedKl, values, m_inner, "nested-mc", rng);
  if (opts.richardson)
    out.extras["bias_probe"] = probe_sum / static_cast<double>(reps);
  return out;
}

/// D(P_Y || G_Y) by the same nested scheme with an unconditional mixture:
/// the inner atoms are fresh (theta, x) pairs.
inline EstimateReport marginal_kl(const VectorSource& source, double t, std::size_t k,
                                  std::size_t reps, std::size_t n_outer,
                                  std::size_t m_inner, Rng& rng) {
  if (reps < 2) throw std::invalid_argument("marginal_kl: reps >= 2");
  const GaussianReference g_y(k, source.gamma() + t);
  std::vector<double> values(reps);
  std::vector<double> x(source.dim()), y(k), scratch;
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rep_rng = rng.derive(r);
    Rng inner_rng = rep_rng.derive(0);
    Rng outer_rng = rep_rng.derive(1);
    // Mixture atoms are noiseless projections theta_j x_j with fresh
    // (theta, x) per atom.
    Matrix w_inner(m_inner, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(source.dim()));
    for (std::size_t j = 0; j < m_inner; ++j) {
      source.sample_into(inner_rng, x);
      for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        for (std::size_t d = 0; d < source.dim(); ++d)
          s += scale * inner_rng.gaussian() * x[d];
        w_inner(j, c) = s;
      }
    }
    std::vector<double> vals(n_outer);
    for (std::size_t i = 0; i < n_outer; ++i) {
      detail::draw_marginal_y(source, t, k, outer_rng, x, y);
      vals[i] = detail::log_kernel_mixture(w_inner, t, y, m_inner, scratch) -
                g_y.log_density(y);
    }
    values[r] = sample_mean(vals);
  }
  return detail::report_from_replicates(EstimateQuantity::kMarginalKl, values,
                                        m_inner, "nested-mc", rng);
}

enum class MiRoute { kIdentity, kDirect };

/// I(Y; Theta), either as expected_kl - marginal_kl (identity route) or
/// directly as E log(p_{Y|Theta}/p_Y) with two inner mixtures.
inline EstimateReport mi_y_theta(const VectorSource& source, double t, std::size_t k,
                                 std::size_t reps, std::size_t n_outer,
                                 std::size_t m_inner, Rng& rng,
                                 MiRoute route = MiRoute::kIdentity) {
  if (route == MiRoute::kIdentity) {
    Rng rng_a = rng.derive(0);
    Rng rng_b = rng.derive(1);
    const EstimateReport ekl = expected_kl(source, t, k, reps, n_outer, m_inner, rng_a);
    const EstimateReport mkl = marginal_kl(source, t, k, reps, n_outer, m_inner, rng_b);
    EstimateReport out;
    out.quantity = EstimateQuantity::kMiYTheta;
    out.value = ekl.value - mkl.value;
    out.se = combined_se(ekl.se, mkl.se);
    out.reps_outer = reps;
    out.samples_inner = m_inner;
    out.method = "identity";
    out.seed_path = rng.path_string();
    out.extras["expected_kl"] = ekl.value;
    out.extras["marginal_kl"] = mkl.value;
    if (out.value < -3.0 * out.se) out.extras["negative_flagged"] = 1.0;
    return out;
  }

  // Direct route: per replicate, a conditional mixture for p_{Y|theta} and
  // an unconditional mixture for p_Y, evaluated at y ~ P_{Y|theta}.
  if (reps < 2) throw std::invalid_argument("mi_y_theta: reps >= 2");
  std::vector<double> values(reps);
  std::vector<double> x(source.dim()), y(k), scratch;
  const double sqrt_t = std::sqrt(t);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rep_rng = rng.derive(r);
    Rng theta_rng = rep_rng.derive(0);
    const Matrix theta = detail::draw_theta_matrix(k, source.dim(), theta_rng);
    Rng cond_rng = rep_rng.derive(1);
    Matrix z_inner(m_inner, k);
    for (std::size_t j = 0; j < m_inner; ++j) {
      source.sample_into(cond_rng, x);
      matvec(theta, x, z_inner.row(j));
    }
    Rng marg_rng = rep_rng.derive(2);
    Matrix w_inner(m_inner, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(source.dim()));
    for (std::size_t j = 0; j < m_inner; ++j) {
      source.sample_into(marg_rng, x);
      for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        for (std::size_t d = 0; d < source.dim(); ++d)
          s += scale * marg_rng.gaussian() * x[d];
        w_inner(j, c) = s;
      }
    }
    Rng outer_rng = rep_rng.derive(3);
    std::vector<double> vals(n_outer);
    for (std::size_t i = 0; i < n_outer; ++i) {
      source.sample_into(outer_rng, x);
      matvec(theta, x, y);
      for (double& c : y) c += sqrt_t * outer_rng.gaussian();
      vals[i] = detail::log_kernel_mixture(z_inner, t, y, m_inner, scratch) -
                detail::log_kernel_mixture(w_inner, t, y, m_inner, scratch);
    }
    values[r] = sample_mean(vals);
  }
  EstimateReport out = detail::report_from_replicates(
      EstimateQuantity::kMiYTheta, values, m_inner, "direct", rng);
  if (out.value < -3.0 * out.se) out.extras["negative_flagged"] = 1.0;
  return out;
}

/// I(X; Y | Theta) = E log(phi_t(y - theta x) / p_{Y|theta}(y)) over
/// (theta, x, y) with an inner mixture for the denominator.
inline EstimateReport mi_x_y(const VectorSource& source, double t, std::size_t k,
                             std::size_t reps, std::size_t n_outer,
                             std::size_t m_inner, Rng& rng) {
  if (reps < 2) throw std::invalid_argument("mi_x_y: reps >= 2");
  std::vector<double> values(reps);
  std::vector<double> x(source.dim()), y(k), z(k), scratch;
  const double sqrt_t = std::sqrt(t);
  const double log_norm =
      -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi * t);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rep_rng = rng.derive(r);
    Rng theta_rng = rep_rng.derive(0);
    const Matrix theta = detail::draw_theta_matrix(k, source.dim(), theta_rng);
    Rng inner_rng = rep_rng.derive(1);
    Matrix z_inner(m_inner, k);
    for (std::size_t j = 0; j < m_inner; ++j) {
      source.sample_into(inner_rng, x);
      matvec(theta, x, z_inner.row(j));
    }
    Rng outer_rng = rep_rng.derive(2);
    std::vector<double> vals(n_outer);
    for (std::size_t i = 0; i < n_outer; ++i) {
      source.sample_into(outer_rng, x);
      matvec(theta, x, z);
      double noise_sq = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double nz = outer_rng.gaussian();
        y[c] = z[c] + sqrt_t * nz;
        noise_sq += nz * nz;
      }
      const double log_channel = log_norm - 0.5 * noise_sq;
      vals[i] = log_channel -
                detail::log_kernel_mixture(z_inner, t, y, m_inner, scratch);
    }
    values[r] = sample_mean(vals);
  }
  return detail::report_from_replicates(EstimateQuantity::kMiXY, values, m_inner,
                                        "nested-mc", rng);
}

struct ExpectedW2Options {
  W2Method method = W2Method::kExactAssignment;
  bool bias_probe = true;  // re-estimate on half-size clouds
  W2Options w2;
};

/// E over Theta of W2^2(P_{Z|Theta}, G_Z) from empirical OT between m-sample
/// clouds. Empirical OT is upward biased at finite m; the probe estimates
/// the bias as value(m/2) - value(m), and extras["debiased"] subtracts it.
inline EstimateReport expected_w2(const VectorSource& source, std::size_t k,
                                  std::size_t reps, std::size_t m_samples, Rng& rng,
                                  const ExpectedW2Options& opts = {}) {
  if (reps < 2) throw std::invalid_argument("expected_w2: reps >= 2");
  if (m_samples < 4) throw std::invalid_argument("expected_w2: m_samples >= 4");
  const double sqrt_gamma = std::sqrt(source.gamma());
  std::vector<double> values(reps), probes(opts.bias_probe ? reps : 0);
  std::vector<double> x(source.dim());

  const auto cloud_w2 = [&](const Matrix& theta, std::size_t m, Rng& cloud_rng) {
    Matrix za(m, k), zb(m, k);
    for (std::size_t i = 0; i < m; ++i) {
      source.sample_into(cloud_rng, x);
      matvec(theta, x, za.row(i));
      for (std::size_t c = 0; c < k; ++c) zb(i, c) = sqrt_gamma * cloud_rng.gaussian();
    }
    if (k == 1) {
      std::vector<double> a(m), b(m);
      for (std::size_t i = 0; i < m; ++i) {
        a[i] = za(i, 0);
        b[i] = zb(i, 0);
      }
      return w2_empirical_1d(a, b);
    }
    return w2_empirical_kd(za, zb, opts.method, opts.w2);
  };

  for (std::size_t r = 0; r < reps; ++r) {
    Rng rep_rng = rng.derive(r);
    Rng theta_rng = rep_rng.derive(0);
    const Matrix theta = detail::draw_theta_matrix(k, source.dim(), theta_rng);
    Rng full_rng = rep_rng.derive(1);
    values[r] = cloud_w2(theta, m_samples, full_rng);
    if (opts.bias_probe) {
      Rng half_rng = rep_rng.derive(2);
      probes[r] = cloud_w2(theta, m_samples / 2, half_rng) - values[r];
    }
  }
  EstimateReport out = detail::report_from_replicates(
      EstimateQuantity::kExpectedW2, values, m_samples,
      opts.method == W2Method::kExactAssignment || k == 1 ? "exact-ot" : "sinkhorn",
      rng);
  if (opts.bias_probe) {
    const double probe = sample_mean(probes);
    out.extras["bias_probe"] = probe;
    out.extras["debiased"] = out.value - probe;
  }
  return out;
}

struct VarDensityOptions {
  std::size_t grid_nodes = 401;     // >= 400 per contract
  double half_width_sigmas = 8.0;   // grid covers +/- this many sqrt(gamma+t)
  /// Test hook: replaces the standard Gaussian draw of the 1 x n projection
  /// row. Receives the replicate Rng.
  std::function<Matrix(std::size_t, Rng&)> theta_sampler;
};

/// k = 1 density-variance integral: int sqrt(Var_Theta p_{Y|Theta}(y)) dy by
/// trapezoid over a uniform grid. The across-replicate variance at each grid
/// point is debiased by the average inner-MC variance of the density
/// estimate (floored at zero). Widens the grid once if it captures less
/// than 0.999 of the marginal mass, then errors.
inline EstimateReport var_density_integral(const VectorSource& source, double t,
                                           std::size_t reps, std::size_t m_inner,
                                           Rng& rng,
                                           const VarDensityOptions& opts = {}) {
  if (reps < 3) throw std::invalid_argument("var_density_integral: reps >= 3");
  if (opts.grid_nodes < 400)
    throw std::invalid_argument("var_density_integral: grid_nodes >= 400");
  const double sigma = std::sqrt(source.gamma() + t);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * t);
  const double inv_2t = 0.5 / t;

  double half_width = opts.half_width_sigmas * sigma;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::size_t g_count = opts.grid_nodes;
    const double dy = 2.0 * half_width / static_cast<double>(g_count - 1);
    std::vector<double> grid(g_count);
    for (std::size_t g = 0; g < g_count; ++g)
      grid[g] = -half_width + static_cast<double>(g) * dy;

    // Per grid point: sum/sumsq of density over replicates, and the mean
    // inner variance of the density estimate.
    std::vector<double> sum_p(g_count, 0.0), sum_p2(g_count, 0.0),
        sum_iv(g_count, 0.0);
    Matrix p_hat(reps, g_count);
    std::vector<double> x(source.dim()), z(m_inner);
    for (std::size_t r = 0; r < reps; ++r) {
      Rng rep_rng = rng.derive(r);
      Rng theta_rng = rep_rng.derive(0);
      const Matrix theta = opts.theta_sampler
                               ? opts.theta_sampler(source.dim(), theta_rng)
                               : detail::draw_theta_matrix(1, source.dim(), theta_rng);
      Rng inner_rng = rep_rng.derive(1);
      for (std::size_t j = 0; j < m_inner; ++j) {
        source.sample_into(inner_rng, x);
        z[j] = dot(theta.row(0), x);
      }
      for (std::size_t g = 0; g < g_count; ++g) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < m_inner; ++j) {
          const double d = grid[g] - z[j];
          const double kernel = norm * std::exp(-inv_2t * d * d);
          s += kernel;
          s2 += kernel * kernel;
        }
        const double mean_k = s / static_cast<double>(m_inner);
        const double var_k = (s2 - static_cast<double>(m_inner) * mean_k * mean_k) /
                             static_cast<double>(m_inner - 1);
        p_hat(r, g) = mean_k;
        sum_p[g] += mean_k;
        sum_p2[g] += mean_k * mean_k;
        sum_iv[g] += std::max(0.0, var_k) / static_cast<double>(m_inner);
      }
    }

    // Mass check on the reconstructed marginal density.
    std::vector<double> mean_p(g_count);
    for (std::size_t g = 0; g < g_count; ++g)
      mean_p[g] = sum_p[g] / static_cast<double>(reps);
    if (trapezoid(mean_p, dy) < 0.999) {
      if (attempt == 0) {
        half_width *= 1.5;
        continue;
      }
      throw std::runtime_error(
          "var_density_integral: grid too narrow even after widening");
    }

    const double dreps = static_cast<double>(reps);
    const auto sqrt_var_at = [&](std::size_t g, double sp, double sp2, double siv,
                                 double count) {
      const double mean = sp / count;
      const double var_across = (sp2 - count * mean * mean) / (count - 1.0);
      return std::sqrt(std::max(0.0, var_across - siv / count));
    };

    std::vector<double> sqrt_var(g_count);
    for (std::size_t g = 0; g < g_count; ++g)
      sqrt_var[g] = sqrt_var_at(g, sum_p[g], sum_p2[g], sum_iv[g], dreps);
    const double integral = trapezoid(sqrt_var, dy);

    // Jackknife over replicates for the SE.
    std::vector<double> loo(reps);
    std::vector<double> sv(g_count);
    for (std::size_t r = 0; r < reps; ++r) {
      for (std::size_t g = 0; g < g_count; ++g) {
        const double p = p_hat(r, g);
        sv[g] = sqrt_var_at(g, sum_p[g] - p, sum_p2[g] - p * p,
                            sum_iv[g] * (dreps - 1.0) / dreps, dreps - 1.0);
      }
      loo[r] = trapezoid(sv, dy);
    }

    EstimateReport out;
    out.quantity = EstimateQuantity::kVarDensityIntegral;
    out.value = integral;
    out.se = jackknife_se(loo);
    out.reps_outer = reps;
    out.samples_inner = m_inner;
    out.method = "grid-trapezoid";
    out.seed_path = rng.path_string();
    out.extras["half_width"] = half_width;
    out.extras["mass"] = trapezoid(mean_p, dy);
    return out;
  }
  throw std::logic_error("var_density_integral: unreachable");
}

}  // namespace gproj
