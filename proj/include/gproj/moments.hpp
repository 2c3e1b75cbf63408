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
#include <optional>
#include <stdexcept>
#include <vector>

#include "gproj/matrix.hpp"
#include "gproj/mc.hpp"
#include "gproj/quadrature.hpp"
#include "gproj/rng.hpp"
#include "gproj/sources.hpp"

namespace gproj {

// Moment functionals of the variance of the conditional density of the
// noisy projection Y given the matrix:
//   m_p = int |y|^p Var(p_{Y|Theta}(y|Theta)) dy / int |y|^p phi^2(y) dy
//   M   = sqrt(m_{k-1} m_{k+1})
// m_p reduces to an expectation over an independent pair (X1, X2) through
// the tuple (V_a, V_g, R) below.

/// Pair summary: arithmetic/geometric means of t + |X_i|^2/n and the
/// normalized inner product R = <X1, X2>/n.
struct PairStatistics {
  double v_a = 0.0;
  double v_g = 0.0;
  double r = 0.0;
};

/// A value that may be astronomically large: log_value is always valid,
/// value is exp(log_value) when representable (else +inf).
struct LogValue {
  double value = 0.0;
  double log_value = 0.0;
};

inline LogValue make_log_value(double log_v) {
  return {std::exp(log_v), log_v};
}

inline PairStatistics pair_stats_from_norms(double s1, double s2, double r,
                                            double t) {
  PairStatistics ps;
  ps.v_a = t + 0.5 * (s1 + s2);
  ps.v_g = std::sqrt((t + s1) * (t + s2));
  ps.r = r;
  return ps;
}

inline PairStatistics pair_stats(std::span<const double> x1, std::span<const double> x2,
                                 double t, std::size_t n) {
  if (x1.size() != n || x2.size() != n)
    throw std::invalid_argument("pair_stats: dimension mismatch");
  if (!(t > 0.0)) throw std::invalid_argument("pair_stats: t must be positive");
  const double dn = static_cast<double>(n);
  return pair_stats_from_norms(squared_norm(x1) / dn, squared_norm(x2) / dn,
                               dot(x1, x2) / dn, t);
}

/// Cached per-pair summaries (|X1|^2/n, |X2|^2/n, <X1,X2>/n), reusable
/// across an entire (k, p, t) grid for one source.
struct PairBatch {
  std::vector<double> s1, s2, r;
  [[nodiscard]] std::size_t size() const { return r.size(); }
};

inline PairBatch sample_pair_batch(const VectorSource& source, std::size_t n_pairs,
                                   Rng& rng) {
  PairBatch batch;
  batch.s1.resize(n_pairs);
  batch.s2.resize(n_pairs);
  batch.r.resize(n_pairs);
  const double n = static_cast<double>(source.dim());
  std::vector<double> x1(source.dim()), x2(source.dim());
  for (std::size_t i = 0; i < n_pairs; ++i) {
    source.sample_into(rng, x1);
    source.sample_into(rng, x2);
    batch.s1[i] = squared_norm(x1) / n;
    batch.s2[i] = squared_norm(x2) / n;
    batch.r[i] = dot(x1, x2) / n;
  }
  return batch;
}

/// g_{k,p}(u) = (1-u)^{-k/2} (1+u)^{p/2} - 1, evaluated in log space.
inline double g_kp(double u, double k, double p) {
  if (!(u > -1.0 && u < 1.0)) throw std::invalid_argument("g_kp: |u| < 1 required");
  return std::expm1(-0.5 * k * std::log1p(-u) + 0.5 * p * std::log1p(u));
}

/// Upper bound on g_{k,p}(r/(t+gamma)) for |r| <= gamma:
/// (k+p)/2 * r/(t+gamma)
///   + t^{-k/2} (t+2 gamma)^{p/2} (t+gamma)^{(k-p)/2} r^2/gamma^2.
/// The quadratic coefficient is (1/z^2)(1-z)^{-k/2}(1+z)^{p/2} evaluated at
/// z = gamma/(t+gamma); the t^{-k/2} factor comes from
/// (1-z)^{-k/2} = ((t+gamma)/t)^{k/2} and is required for the bound to hold
/// when t < 1.
inline double g_kp_upper(double r, double t, double gamma, double k, double p) {
  if (!(t > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("g_kp_upper: t, gamma must be positive");
  if (std::abs(r) > gamma) throw std::invalid_argument("g_kp_upper: |r| <= gamma");
  const double linear = 0.5 * (k + p) * r / (t + gamma);
  const double quad = std::exp(-0.5 * k * std::log(t) +
                               0.5 * p * std::log(t + 2.0 * gamma) +
                               0.5 * (k - p) * std::log(t + gamma)) *
                      r * r / (gamma * gamma);
  return linear + quad;
}

enum class MomentMethod { kMonteCarlo, kClosedOrthogonal, kClosedSphere };

struct MomentEstimate {
  double k = 1.0;
  double p = 0.0;
  double t = 1.0;
  MeanSe estimate;
  MomentMethod method = MomentMethod::kMonteCarlo;
};

namespace detail {

inline double m_p_integrand(const PairStatistics& ps, double t, double k, double p) {
  // (Va - R) = t + |x1-x2|^2/(2n) >= t and Vg^2 - R^2 > 0 by Cauchy-Schwarz.
  const double va_minus_r = ps.v_a - ps.r;
  const double spread = ps.v_g * ps.v_g - ps.r * ps.r;
  const double log_first =
      -0.5 * (k + p) * std::log(va_minus_r) + 0.5 * p * std::log(spread);
  const double log_second = -0.5 * (k + p) * std::log(ps.v_a) + p * std::log(ps.v_g);
  if (log_first > 700.0 || log_second > 700.0)
    throw std::overflow_error("m_p integrand overflows double range");
  return std::exp(log_first) - std::exp(log_second);
}

}  // namespace detail

/// Monte Carlo m_p over a precomputed pair batch.
inline MomentEstimate m_p_mc(const PairBatch& batch, double k, double p, double t) {
  if (!(k + p > 0.0)) throw std::invalid_argument("m_p_mc: k + p must be positive");
  if (!(t > 0.0)) throw std::invalid_argument("m_p_mc: t must be positive");
  std::vector<double> vals(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PairStatistics ps =
        pair_stats_from_norms(batch.s1[i], batch.s2[i], batch.r[i], t);
    vals[i] = detail::m_p_integrand(ps, t, k, p);
  }
  MomentEstimate out;
  out.k = k;
  out.p = p;
  out.t = t;
  out.estimate = batch_mean_se(vals);
  out.method = MomentMethod::kMonteCarlo;
  return out;
}

inline MomentEstimate m_p_mc(const VectorSource& source, double k, double p, double t,
                             std::size_t n_pairs, Rng& rng) {
  return m_p_mc(sample_pair_batch(source, n_pairs, rng), k, p, t);
}

/// Closed form for a law on d orthogonal atoms of equal norm:
/// m_p = lambda ((t+2g)^{p/2}/t^{k/2} - (t+g)^{(p-k)/2}).
inline MomentEstimate m_p_orthogonal(double lambda, double gamma, double t, double k,
                                     double p) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("m_p_orthogonal: lambda in [0,1]");
  if (!(t > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("m_p_orthogonal: t, gamma must be positive");
  const double first =
      std::exp(0.5 * p * std::log(t + 2.0 * gamma) - 0.5 * k * std::log(t));
  const double second = std::exp(0.5 * (p - k) * std::log(t + gamma));
  MomentEstimate out;
  out.k = k;
  out.p = p;
  out.t = t;
  out.estimate = {lambda * (first - second), 0.0};
  out.method = MomentMethod::kClosedOrthogonal;
  return out;
}

/// Closed form for the uniform law on the sphere of radius sqrt(n gamma):
/// an expectation over U (symmetric about 0, U^2 ~ Beta(1, n-1)) by
/// Gauss-Legendre quadrature against the density of |U|,
/// f(u) = 2 (n-1) u (1-u^2)^{n-2} on (0, 1). The integrand is analytic
/// there; the panel [0, u0] with u0 ~ sqrt(60/n) carries all but e^{-60} of
/// the mass, so the order-doubling converges uniformly in n.
inline MomentEstimate m_p_sphere(std::size_t n, double gamma, double t, double k,
                                 double p, std::size_t quadrature_order = 64) {
  if (n < 2) throw std::invalid_argument("m_p_sphere: n >= 2");
  if (quadrature_order < 16)
    throw std::invalid_argument("m_p_sphere: quadrature_order >= 16");
  if (!(t > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("m_p_sphere: t, gamma must be positive");
  const double nm2 = static_cast<double>(n) - 2.0;
  const auto g = [&](double u) {
    return std::exp(0.5 * p * std::log(t + gamma * (1.0 + u)) -
                    0.5 * k * std::log(t + gamma * (1.0 - u)));
  };
  const auto integrand = [&](double u) {
    const double density = 2.0 * (static_cast<double>(n) - 1.0) * u *
                           std::exp(nm2 * std::log1p(-u * u));
    return density * 0.5 * (g(u) + g(-u));
  };
  const double u0 = std::min(1.0, std::sqrt(60.0 / std::max(nm2, 1.0)));
  double expectation = integrate_adaptive(integrand, 0.0, u0, quadrature_order);
  if (u0 < 1.0) expectation += integrate_gl(integrand, u0, 1.0, 256);
  const double second = std::exp(0.5 * (p - k) * std::log(t + gamma));
  MomentEstimate out;
  out.k = k;
  out.p = p;
  out.t = t;
  out.estimate = {expectation - second, 0.0};
  out.method = MomentMethod::kClosedSphere;
  return out;
}

struct BigM {
  double value = 0.0;
  bool floored = false;  // true when a negative MC input was clamped to 0
};

/// M = sqrt(m_{k-1} m_{k+1}); negative Monte Carlo inputs are floored at 0.
inline BigM big_m(double m_km1, double m_kp1) {
  BigM out;
  out.floored = m_km1 < 0.0 || m_kp1 < 0.0;
  const double a = std::max(0.0, m_km1);
  const double b = std::max(0.0, m_kp1);
  out.value = std::sqrt(a * b);
  return out;
}

/// k = 1 bound: M <= beta_1 / t.
inline double m_bound_k1(double beta1, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("m_bound_k1: t must be positive");
  return beta1 / t;
}

/// Bound for magnitudes confined to [gamma_min, gamma_max]:
/// (2 gmax/gmin)^{1/4} [k b1/gmin + (1 + 2 gmax/t)^{k/2} b2^2/gmin^2].
/// The power factor can be astronomically large for small t, so the result
/// carries its log alongside the (possibly infinite) linear value.
inline LogValue m_bound_bounded(double gamma_min, double gamma_max, double beta1,
                                double beta2, double t, double k) {
  if (!(gamma_min > 0.0) || gamma_max < gamma_min)
    throw std::invalid_argument("m_bound_bounded: need 0 < gamma_min <= gamma_max");
  if (!(t > 0.0)) throw std::invalid_argument("m_bound_bounded: t must be positive");
  const double log_prefactor = 0.25 * std::log(2.0 * gamma_max / gamma_min);
  const double log_term1 = std::log(k * beta1 / gamma_min);  // -inf for beta1 = 0
  const double log_term2 = 0.5 * k * std::log1p(2.0 * gamma_max / t) +
                           std::log(beta2 * beta2 / (gamma_min * gamma_min));
  const double terms[] = {log_term1, log_term2};
  return make_log_value(log_prefactor + log_sum_exp(terms));
}

/// Specialization for |X|^2/n = gamma a.s., with the first term driven by
/// mean_sq = (1/n)|E X|^2 instead of beta_1:
/// 2^{1/4} [k mean_sq/gamma + (1 + 2 gamma/t)^{k/2} b2^2/gamma^2].
inline LogValue m_bound_const_magnitude(double mean_sq_norm_over_n, double gamma,
                                        double beta2, double t, double k) {
  if (!(gamma > 0.0) || !(t > 0.0))
    throw std::invalid_argument("m_bound_const_magnitude: gamma, t must be positive");
  if (mean_sq_norm_over_n < 0.0 || mean_sq_norm_over_n > gamma * (1.0 + 1e-9))
    throw std::invalid_argument("m_bound_const_magnitude: mean_sq in [0, gamma]");
  const double log_term1 = std::log(k * mean_sq_norm_over_n / gamma);
  const double log_term2 = 0.5 * k * std::log1p(2.0 * gamma / t) +
                           std::log(beta2 * beta2 / (gamma * gamma));
  const double terms[] = {log_term1, log_term2};
  return make_log_value(0.25 * std::log(2.0) + log_sum_exp(terms));
}

}  // namespace gproj
