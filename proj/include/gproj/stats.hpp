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
#include "gproj/rng.hpp"
#include "gproj/sources.hpp"

namespace gproj {

// Distribution functionals of the ambient law:
//   alpha   = (1/n) E| |X|^2 - E|X|^2 |           (magnitude concentration)
//   beta_r  = (1/n) (E|<X1, X2>|^r)^(1/r), r in {1,2}
// beta_2 equals the Frobenius norm of (1/n) E[X X^T].

/// Estimates (or closed forms) of gamma, alpha, beta_1, beta_2.
struct DistributionStats {
  double gamma = 0.0;
  MeanSe alpha;
  MeanSe beta1;
  MeanSe beta2;
  std::size_t n_samples = 0;
  std::size_t n_pairs = 0;
  bool gamma_exact = false;
  bool alpha_exact = false;
  bool beta1_exact = false;
  bool beta2_exact_flag = false;
};

/// Empirical frequency of the magnitude-deviation event
/// | |X|^2/n - gamma | > (eps/2) gamma, with Markov bound metadata.
struct TruncationSet {
  double epsilon = 1.0;
  double gamma = 0.0;
  MeanSe prob_complement;
  double markov_bound = 0.0;  // (2/eps) alpha/gamma, from the same run's alpha
};

enum class PairMode { kFreshPairs, kUStatistic };

/// alpha(X) by Monte Carlo: mean of |(1/n)|X_i|^2 - gamma| centered at the
/// source's declared gamma when it is exact (sample mean otherwise).
inline MeanSe estimate_alpha(const VectorSource& source, std::size_t n_samples,
                             Rng& rng) {
  if (n_samples < 2) throw std::invalid_argument("estimate_alpha: n_samples >= 2");
  if (auto exact = source.alpha_exact()) return {*exact, 0.0};
  const double n = static_cast<double>(source.dim());
  std::vector<double> norm_means(n_samples);
  std::vector<double> x(source.dim());
  for (std::size_t i = 0; i < n_samples; ++i) {
    source.sample_into(rng, x);
    norm_means[i] = squared_norm(x) / n;
  }
  const double center =
      source.gamma_exact() ? source.gamma() : sample_mean(norm_means);
  std::vector<double> devs(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i)
    devs[i] = std::abs(norm_means[i] - center);
  return batch_mean_se(devs);
}

namespace detail {

inline MeanSe beta_from_moment_samples(std::vector<double>& abs_r, int r) {
  const MeanSe moment = batch_mean_se(abs_r);
  MeanSe out;
  if (r == 1) return moment;
  // value = moment^(1/r); delta method for the SE.
  out.value = std::pow(moment.value, 1.0 / static_cast<double>(r));
  if (moment.value > 0.0)
    out.se = delta_method_se(
        out.value / (static_cast<double>(r) * moment.value), moment.se);
  return out;
}

}  // namespace detail

/// beta_r(X) over independent pairs (default) or as a U-statistic over all
/// unordered pairs of a pool of n_pairs vectors (lower variance, reuses
/// samples so pairs are not independent).
inline MeanSe estimate_beta(const VectorSource& source, int r, std::size_t n_pairs,
                            Rng& rng, PairMode mode = PairMode::kFreshPairs) {
  if (r != 1 && r != 2) throw std::invalid_argument("estimate_beta: r must be 1 or 2");
  if (n_pairs < 2) throw std::invalid_argument("estimate_beta: n_pairs >= 2");
  const double n = static_cast<double>(source.dim());

  if (mode == PairMode::kFreshPairs) {
    std::vector<double> abs_r(n_pairs);
    std::vector<double> x1(source.dim()), x2(source.dim());
    for (std::size_t i = 0; i < n_pairs; ++i) {
      source.sample_into(rng, x1);
      source.sample_into(rng, x2);
      const double ip = std::abs(dot(x1, x2)) / n;
      abs_r[i] = (r == 2) ? ip * ip : ip;
    }
    return detail::beta_from_moment_samples(abs_r, r);
  }

  // U-statistic mode: SE via batch means over groups of the pool.
  const std::size_t pool = n_pairs;
  Matrix xs = source.sample_block(rng, pool);
  const std::size_t groups = batch_count_for(pool);
  const std::size_t per = pool / groups;
  std::vector<double> group_moment(groups, 0.0);
  double total = 0.0;
  std::size_t total_pairs = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    double s = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = g * per; i < (g + 1) * per; ++i) {
      for (std::size_t j = i + 1; j < (g + 1) * per; ++j) {
        const double ip = std::abs(dot(xs.row(i), xs.row(j))) / n;
        s += (r == 2) ? ip * ip : ip;
        ++cnt;
      }
    }
    group_moment[g] = s / static_cast<double>(cnt);
    total += s;
    total_pairs += cnt;
  }
  const double moment = total / static_cast<double>(total_pairs);
  const double moment_se =
      std::sqrt(sample_variance(group_moment) / static_cast<double>(groups));
  MeanSe out;
  out.value = std::pow(moment, 1.0 / static_cast<double>(r));
  if (moment > 0.0 && r == 2)
    out.se = delta_method_se(out.value / (2.0 * moment), moment_se);
  else
    out.se = moment_se;
  return out;
}

/// beta_2 from a known second-moment matrix: |(1/n) E[X X^T]|_F.
inline double beta2_exact(const Matrix& second_moment, std::size_t n) {
  if (second_moment.rows() != n || second_moment.cols() != n)
    throw std::invalid_argument("beta2_exact: matrix must be n x n");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(second_moment(i, j) - second_moment(j, i)) >
          1e-9 * (1.0 + std::abs(second_moment(i, j))))
        throw std::invalid_argument("beta2_exact: matrix is not symmetric");
  double frob_sq = 0.0;
  for (double v : second_moment.data()) frob_sq += v * v;
  return std::sqrt(frob_sq) / static_cast<double>(n);
}

/// Full functional summary for a source; closed forms used where declared.
inline DistributionStats compute_stats(const VectorSource& source,
                                       std::size_t n_samples, std::size_t n_pairs,
                                       Rng& rng) {
  DistributionStats out;
  out.gamma = source.gamma();
  out.gamma_exact = source.gamma_exact();
  out.n_samples = n_samples;
  out.n_pairs = n_pairs;

  if (auto a = source.alpha_exact()) {
    out.alpha = {*a, 0.0};
    out.alpha_exact = true;
  } else {
    Rng r0 = rng.derive(0);
    out.alpha = estimate_alpha(source, n_samples, r0);
  }
  if (auto b1 = source.beta_exact(1)) {
    out.beta1 = {*b1, 0.0};
    out.beta1_exact = true;
  } else {
    Rng r1 = rng.derive(1);
    out.beta1 = estimate_beta(source, 1, n_pairs, r1);
  }
  if (auto b2 = source.beta_exact(2)) {
    out.beta2 = {*b2, 0.0};
    out.beta2_exact_flag = true;
  } else {
    Rng r2 = rng.derive(2);
    out.beta2 = estimate_beta(source, 2, n_pairs, r2);
  }
  return out;
}

/// Frequency of |(1/n)|X|^2 - gamma| > (eps/2) gamma, the complement of the
/// truncation set used to prove the general KL bound.
inline TruncationSet truncation_probability(const VectorSource& source, double epsilon,
                                            std::size_t n_samples, Rng& rng) {
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("truncation_probability: epsilon in (0, 1]");
  TruncationSet out;
  out.epsilon = epsilon;
  out.gamma = source.gamma();
  const double n = static_cast<double>(source.dim());
  const double threshold = 0.5 * epsilon * out.gamma;
  std::vector<double> hit(n_samples);
  std::vector<double> x(source.dim());
  std::vector<double> devs(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    source.sample_into(rng, x);
    const double dev = std::abs(squared_norm(x) / n - out.gamma);
    devs[i] = dev;
    hit[i] = dev > threshold ? 1.0 : 0.0;
  }
  out.prob_complement = batch_mean_se(hit);
  const double alpha_hat =
      source.alpha_exact() ? *source.alpha_exact() : sample_mean(devs);
  out.markov_bound = (2.0 / epsilon) * alpha_hat / out.gamma;
  return out;
}

}  // namespace gproj
