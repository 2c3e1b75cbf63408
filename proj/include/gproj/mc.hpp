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
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace gproj {

/// A Monte Carlo estimate with its standard error.
struct MeanSe {
  double value = 0.0;
  double se = 0.0;
};

inline double sample_mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

/// Mean with standard error from the spread of i.i.d. replicates.
inline MeanSe mean_from_replicates(std::span<const double> xs) {
  MeanSe out;
  out.value = sample_mean(xs);
  out.se = xs.size() > 1
               ? std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()))
               : 0.0;
  return out;
}

/// Number of batches used for batch-means standard errors. At least 30
/// whenever the sample allows it.
inline std::size_t batch_count_for(std::size_t n) {
  if (n >= 64) return 32;
  return std::max<std::size_t>(2, n / 2);
}

/// Mean of `xs` with a batch-means standard error. The estimate itself uses
/// every sample; the SE uses `b` equal batches over the leading b*floor(n/b)
/// samples.
inline MeanSe batch_mean_se(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("batch_mean_se: empty sample");
  MeanSe out;
  out.value = sample_mean(xs);
  const std::size_t b = batch_count_for(xs.size());
  const std::size_t per = xs.size() / b;
  if (per == 0 || b < 2) return out;
  std::vector<double> means(b);
  for (std::size_t i = 0; i < b; ++i)
    means[i] = sample_mean(xs.subspan(i * per, per));
  out.se = std::sqrt(sample_variance(means) / static_cast<double>(b));
  return out;
}

inline double combined_se(double se_a, double se_b) {
  return std::sqrt(se_a * se_a + se_b * se_b);
}

/// log(sum(exp(xs))) guarded against overflow; -inf for an empty span.
inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// Standard error of the delta-method transform g(m) of a sample mean m,
/// given g'(m) and the SE of m.
inline double delta_method_se(double dgdm, double se_of_mean) {
  return std::abs(dgdm) * se_of_mean;
}

/// Jackknife standard error of a statistic given its leave-one-out values.
inline double jackknife_se(std::span<const double> loo_values) {
  const std::size_t n = loo_values.size();
  if (n < 2) return 0.0;
  const double m = sample_mean(loo_values);
  double s = 0.0;
  for (double v : loo_values) s += (v - m) * (v - m);
  return std::sqrt(s * static_cast<double>(n - 1) / static_cast<double>(n));
}

}  // namespace gproj
