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
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gproj/mc.hpp"
#include "gproj/moments.hpp"

namespace gproj {

// Analytic right-hand sides for the Gaussian-projection approximation
// bounds. Constants default to the proven values (40, 3, 10) but stay
// overridable so sweeps can probe tightness and negative controls can
// corrupt them deliberately.

struct BoundConstants {
  double thm1_c = 40.0;
  double thm2_c = 3.0;
  double thm5_c = 10.0;
  double cor1_c_prime = 40.0;
};

/// Evaluated bound with its parameters, for reports.
struct BoundReport {
  std::string name;
  std::map<std::string, double> params;
  double value = 0.0;
  double log_value = 0.0;
  std::vector<std::pair<std::string, bool>> assumptions;

  [[nodiscard]] bool assumptions_ok() const {
    for (const auto& [_, ok] : assumptions)
      if (!ok) return false;
    return true;
  }
};

namespace detail {

/// Golden-section maximization of a unimodal function on [lo, hi].
template <typename F>
double golden_section_max(F&& f, double lo, double hi, double tol = 1e-12) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Argmax of log(1+x)/sqrt(x) over x > 0.
inline double kappa_maximizer() {
  static const double x_star = detail::golden_section_max(
      [](double x) { return std::log1p(x) / std::sqrt(x); }, 1e-8, 100.0);
  return x_star;
}

/// kappa = sup_{x>0} log(1+x)/sqrt(x), computed numerically and cached.
inline double kappa() {
  static const double value = [] {
    const double x = kappa_maximizer();
    return std::log1p(x) / std::sqrt(x);
  }();
  return value;
}

/// Mutual information from the moment functional:
/// I(Y;Theta) <= kappa (pi k/2)^{1/4} sqrt(M).
inline double mi_bound_from_m(double m_value, double k) {
  if (m_value < 0.0) throw std::invalid_argument("mi_bound_from_m: M >= 0");
  return kappa() * std::pow(0.5 * std::numbers::pi * k, 0.25) * std::sqrt(m_value);
}

/// Marginal relative entropy: D(P_Y || G_Y) <= (k/2) log(1+gamma/t) alpha/gamma.
inline double kl_marginal_bound(double alpha, double gamma, double t, double k) {
  if (!(t > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("kl_marginal_bound: t, gamma must be positive");
  return 0.5 * k * std::log1p(gamma / t) * alpha / gamma;
}

/// Wasserstein bound for general laws (expected squared distance):
/// gamma C [k a/g + k^{3/4} (b1/g)^{1/2} + k (b2/g)^{4/(k+4)}].
inline double thm1_w2_bound(double alpha, double beta1, double beta2, double gamma,
                            double k, double c = 40.0) {
  if (!(gamma > 0.0)) throw std::invalid_argument("thm1_w2_bound: gamma > 0");
  const double t1 = k * alpha / gamma;
  const double t2 = std::pow(k, 0.75) * std::sqrt(beta1 / gamma);
  const double t3 = k * std::pow(beta2 / gamma, 4.0 / (k + 4.0));
  return gamma * c * (t1 + t2 + t3);
}

struct Thm2Breakdown {
  double term_alpha = 0.0;   // k log(1+g/t) a/(eps g)
  double term_beta1 = 0.0;   // k^{3/4} (b1/g)^{1/2}
  double log_term_beta2 = 0.0;  // log of k^{1/4} (1+(2+eps)g/t)^{k/4} b2/g
  LogValue total;            // C * (sum of terms)
};

/// Relative entropy bound for general laws; the (1+(2+eps)g/t)^{k/4} factor
/// is carried in log space.
inline Thm2Breakdown thm2_kl_bound_terms(double alpha, double beta1, double beta2,
                                         double gamma, double t, double epsilon,
                                         double k, double c = 3.0) {
  if (!(t > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("thm2_kl_bound: t, gamma must be positive");
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("thm2_kl_bound: epsilon in (0, 1]");
  Thm2Breakdown out;
  out.term_alpha = k * std::log1p(gamma / t) * alpha / (epsilon * gamma);
  out.term_beta1 = std::pow(k, 0.75) * std::sqrt(beta1 / gamma);
  out.log_term_beta2 = 0.25 * std::log(k) +
                       0.25 * k * std::log1p((2.0 + epsilon) * gamma / t) +
                       std::log(beta2 / gamma);
  const double logs[] = {std::log(out.term_alpha), std::log(out.term_beta1),
                         out.log_term_beta2};
  out.total = make_log_value(std::log(c) + log_sum_exp(logs));
  return out;
}

inline LogValue thm2_kl_bound(double alpha, double beta1, double beta2, double gamma,
                              double t, double epsilon, double k, double c = 3.0) {
  return thm2_kl_bound_terms(alpha, beta1, beta2, gamma, t, epsilon, k, c).total;
}

/// Minimizes the Theorem 2 bound over epsilon in (0, 1]: coarse log grid
/// followed by golden-section refinement.
inline std::pair<double, double> thm2_optimize_epsilon(double alpha, double beta1,
                                                       double beta2, double gamma,
                                                       double t, double k,
                                                       double c = 3.0) {
  const auto objective = [&](double eps) {
    return thm2_kl_bound(alpha, beta1, beta2, gamma, t, eps, k, c).log_value;
  };
  const double eps_floor = 1e-4;
  double best_eps = 1.0;
  double best = objective(1.0);
  const int grid = 64;
  for (int i = 0; i <= grid; ++i) {
    const double eps = eps_floor * std::pow(1.0 / eps_floor,
                                            static_cast<double>(i) / grid);
    const double v = objective(eps);
    if (v < best) {
      best = v;
      best_eps = eps;
    }
  }
  const double lo = std::max(eps_floor, best_eps / 3.0);
  const double hi = std::min(1.0, best_eps * 3.0);
  const double refined = detail::golden_section_max(
      [&](double e) { return -objective(e); }, lo, hi, 1e-10);
  if (objective(refined) < best) best_eps = refined;
  return {best_eps, std::exp(objective(best_eps))};
}

/// Corollary rate (normalized by gamma): C' (n^{-1/4} + k n^{-2/(k+4)}).
inline double cor1_w2_bound(double n, double k, double c_prime) {
  if (!(n >= 1.0) || !(k >= 1.0) || !(c_prime > 0.0))
    throw std::invalid_argument("cor1_w2_bound: n, k >= 1 and c_prime > 0");
  return c_prime * (std::pow(n, -0.25) + k * std::pow(n, -2.0 / (k + 4.0)));
}

/// k = 1 relative entropy bound: alpha/(2t) + sqrt(beta1/t).
inline double thm3_kl_k1_bound(double alpha, double beta1, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("thm3_kl_k1_bound: t > 0");
  return 0.5 * alpha / t + std::sqrt(beta1 / t);
}

/// Constant-magnitude relative entropy bound:
/// k^{3/4} (mean_sq/g)^{1/2} + k^{1/4} (1+2g/t)^{k/4} b2/g.
inline LogValue thm4_kl_sphere_bound(double mean_sq_norm_over_n, double beta2,
                                     double gamma, double t, double k) {
  if (!(t > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("thm4_kl_sphere_bound: t, gamma must be positive");
  if (mean_sq_norm_over_n < 0.0 || mean_sq_norm_over_n > gamma * (1.0 + 1e-9))
    throw std::invalid_argument("thm4_kl_sphere_bound: mean_sq in [0, gamma]");
  const double log_t1 =
      0.75 * std::log(k) + 0.5 * std::log(mean_sq_norm_over_n / gamma);
  const double log_t2 = 0.25 * std::log(k) + 0.25 * k * std::log1p(2.0 * gamma / t) +
                        std::log(beta2 / gamma);
  const double logs[] = {log_t1, log_t2};
  return make_log_value(log_sum_exp(logs));
}

struct Thm5Result {
  double value = 0.0;
  double t_star = 0.0;  // the noise level used inside the proof, for diagnostics
};

/// Constant-magnitude Wasserstein bound:
/// C gamma [k^{3/4}(mean_sq/g)^{1/2} + k (b2/g)^{4/(k+4)}], with the proof's
/// t* = (3g/2)(k^{1/4} b2/(4g))^{4/(k+4)} reported alongside.
inline Thm5Result thm5_w2_sphere_bound(double mean_sq_norm_over_n, double beta2,
                                       double gamma, double k, double c = 10.0) {
  if (!(gamma > 0.0)) throw std::invalid_argument("thm5_w2_sphere_bound: gamma > 0");
  Thm5Result out;
  const double t1 = std::pow(k, 0.75) * std::sqrt(mean_sq_norm_over_n / gamma);
  const double t2 = k * std::pow(beta2 / gamma, 4.0 / (k + 4.0));
  out.value = c * gamma * (t1 + t2);
  out.t_star = 1.5 * gamma *
               std::pow(std::pow(k, 0.25) * beta2 / (4.0 * gamma), 4.0 / (k + 4.0));
  return out;
}

/// Talagrand transfer: W2^2(P_{Z|theta}, G_Z) <= 4 t k + 4 (t+gamma) D.
inline double w2_from_kl(double kl_value, double t, double gamma, double k) {
  if (!(t > 0.0)) throw std::invalid_argument("w2_from_kl: t > 0");
  if (kl_value < 0.0) throw std::invalid_argument("w2_from_kl: kl >= 0");
  return 4.0 * t * k + 4.0 * (t + gamma) * kl_value;
}

/// Truncated mutual information bound:
/// (k/2) log(1+g/t) (P(E^c) + alpha/g) + [conditional MI bound, already
/// multiplied by P(E)].
inline double mi_truncation_bound(double k, double t, double gamma, double alpha,
                                  double prob_complement,
                                  double mi_conditional_bound) {
  if (!(prob_complement >= 0.0 && prob_complement <= 1.0))
    throw std::invalid_argument("mi_truncation_bound: prob_complement in [0,1]");
  return 0.5 * k * std::log1p(gamma / t) * (prob_complement + alpha / gamma) +
         mi_conditional_bound;
}

/// Integral-moment inequality constant:
/// int sqrt(f) <= sqrt(2 pi^{k/2+1}/Gamma(k/2)) (mu_{k-1} mu_{k+1})^{1/4}.
inline double int_moment_bound(double mu_km1, double mu_kp1, double k) {
  if (mu_km1 < 0.0 || mu_kp1 < 0.0)
    throw std::invalid_argument("int_moment_bound: moments >= 0");
  const double log_const = 0.5 * (std::log(2.0) +
                                  (0.5 * k + 1.0) * std::log(std::numbers::pi) -
                                  std::lgamma(0.5 * k));
  return std::exp(log_const) * std::pow(mu_km1 * mu_kp1, 0.25);
}

/// AWGN capacity in nats: C(s) = (1/2) log(1+s).
inline double awgn_capacity(double snr) {
  if (snr < 0.0) throw std::invalid_argument("awgn_capacity: snr >= 0");
  return 0.5 * std::log1p(snr);
}

struct CsGap {
  double implied_mi = 0.0;   // k C(gamma/t) - E[D]
  bool suspicious = false;   // negative => MC error exceeded the true gap
};

/// Capacity gap identity: I(X;Y|Theta) = k C(gamma/t) - E[D(P_{Y|Theta}||G_Y)].
inline CsGap cs_gap(double expected_kl, double k, double gamma, double t) {
  CsGap out;
  out.implied_mi = k * awgn_capacity(gamma / t) - expected_kl;
  out.suspicious = out.implied_mi < 0.0;
  return out;
}

struct LogDevCheck {
  MeanSe lhs;   // E[log((1+mu)/(1+X)) 1_E(X)]
  MeanSe rhs;   // (log(1+mu)/mu) E|mu - X|
  bool holds = false;
};

/// Monte Carlo check of the logarithmic-deviation inequality for a
/// non-negative sample with mean mu and an arbitrary measurable set E.
inline LogDevCheck check_log_dev(std::span<const double> samples, double mu,
                                 const std::function<bool(double)>& indicator) {
  if (!(mu > 0.0)) throw std::invalid_argument("check_log_dev: mu > 0");
  std::vector<double> lhs_vals(samples.size());
  std::vector<double> dev_vals(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples[i];
    if (x < 0.0) throw std::invalid_argument("check_log_dev: samples >= 0");
    lhs_vals[i] = indicator(x) ? std::log((1.0 + mu) / (1.0 + x)) : 0.0;
    dev_vals[i] = std::abs(mu - x);
  }
  LogDevCheck out;
  out.lhs = batch_mean_se(lhs_vals);
  const MeanSe dev = batch_mean_se(dev_vals);
  const double factor = std::log1p(mu) / mu;
  out.rhs = {factor * dev.value, factor * dev.se};
  out.holds = out.lhs.value <= out.rhs.value + 3.0 * combined_se(out.lhs.se, out.rhs.se);
  return out;
}

}  // namespace gproj
