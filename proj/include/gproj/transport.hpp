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
#include <string>
#include <vector>

#include "gproj/matrix.hpp"
#include "gproj/mc.hpp"

namespace gproj {

// Empirical quadratic optimal transport between equal-size point clouds.
// One dimension is exact via sorting; higher dimensions use either an exact
// assignment solve (small clouds) or a debiased entropic approximation.

/// Exact empirical W2^2 between two samples on the line: sort both and
/// average the squared gaps between order statistics.
inline double w2_empirical_1d(std::span<const double> samples_a,
                              std::span<const double> samples_b) {
  if (samples_a.size() != samples_b.size() || samples_a.empty())
    throw std::invalid_argument("w2_empirical_1d: need equal nonzero sample counts");
  std::vector<double> a(samples_a.begin(), samples_a.end());
  std::vector<double> b(samples_b.begin(), samples_b.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

namespace detail {

/// Minimum-cost perfect matching on a dense square cost matrix by shortest
/// augmenting paths with potentials (Jonker-Volgenant style). O(n^3).
inline double assignment_min_cost(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n || n == 0)
    throw std::invalid_argument("assignment: square nonempty cost matrix required");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; p[j] = row matched to column j, column 0 is virtual.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), char{0});
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      const auto row = cost.row(i0 - 1);
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost(p[j] - 1, j - 1);
  return total;
}

inline Matrix squared_cost_matrix(const Matrix& a, const Matrix& b) {
  Matrix cost(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      cost(i, j) = squared_distance(a.row(i), b.row(j));
  return cost;
}

struct SinkhornState {
  std::vector<double> f, g;
};

/// Log-domain Sinkhorn on uniform marginals; returns the sharp transport
/// cost <P, C> of the converged entropic plan.
inline double sinkhorn_cost(const Matrix& cost, double epsilon, SinkhornState& state,
                            std::size_t max_iters, double marginal_tol,
                            std::size_t* iters_out = nullptr) {
  const std::size_t m = cost.rows();
  const double log_w = -std::log(static_cast<double>(m));
  if (state.f.size() != m) state.f.assign(m, 0.0);
  if (state.g.size() != m) state.g.assign(m, 0.0);
  std::vector<double> buf(m);
  std::size_t it = 0;
  for (; it < max_iters; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j)
        buf[j] = log_w + (state.g[j] - cost(i, j)) / epsilon;
      state.f[i] = -epsilon * log_sum_exp(buf);
    }
    double worst = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < m; ++i)
        buf[i] = log_w + (state.f[i] - cost(i, j)) / epsilon;
      const double new_g = -epsilon * log_sum_exp(buf);
      worst = std::max(worst, std::abs(new_g - state.g[j]));
      state.g[j] = new_g;
    }
    if (worst < marginal_tol * epsilon) break;
  }
  if (iters_out) *iters_out = it;
  // <P, C> with P_ij = w_i w_j exp((f_i + g_j - C_ij)/epsilon).
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      total += std::exp(2.0 * log_w + (state.f[i] + state.g[j] - cost(i, j)) / epsilon) *
               cost(i, j);
  return total;
}

}  // namespace detail

enum class W2Method { kExactAssignment, kEntropicDebiased };

struct W2Options {
  std::size_t exact_max_points = 2000;
  double entropic_rel_tol = 1e-3;   // annealing stop on relative change
  std::size_t sinkhorn_max_iters = 2000;
  double sinkhorn_marginal_tol = 1e-9;
  std::size_t anneal_max_levels = 12;
};

/// Empirical W2^2 between equal-size clouds in dimension >= 2. The exact
/// path solves the assignment problem under squared Euclidean cost; the
/// entropic path computes the debiased Sinkhorn divergence
/// S_eps(a,b) - S_eps(a,a)/2 - S_eps(b,b)/2 with eps annealed until the
/// relative change drops below entropic_rel_tol.
inline double w2_empirical_kd(const Matrix& samples_a, const Matrix& samples_b,
                              W2Method method, const W2Options& opts = {}) {
  if (samples_a.rows() != samples_b.rows() || samples_a.rows() == 0)
    throw std::invalid_argument("w2_empirical_kd: equal nonzero sample counts");
  if (samples_a.cols() != samples_b.cols())
    throw std::invalid_argument("w2_empirical_kd: dimension mismatch");
  const std::size_t m = samples_a.rows();

  if (method == W2Method::kExactAssignment) {
    if (m > opts.exact_max_points)
      throw std::invalid_argument(
          "w2_empirical_kd: exact assignment limited to " +
          std::to_string(opts.exact_max_points) + " points; use entropic-debiased");
    const Matrix cost = detail::squared_cost_matrix(samples_a, samples_b);
    return detail::assignment_min_cost(cost) / static_cast<double>(m);
  }

  const Matrix c_ab = detail::squared_cost_matrix(samples_a, samples_b);
  const Matrix c_aa = detail::squared_cost_matrix(samples_a, samples_a);
  const Matrix c_bb = detail::squared_cost_matrix(samples_b, samples_b);
  double mean_cost = 0.0;
  for (double v : c_ab.data()) mean_cost += v;
  mean_cost /= static_cast<double>(c_ab.data().size());
  double epsilon = std::max(0.25 * mean_cost, 1e-12);

  detail::SinkhornState s_ab, s_aa, s_bb;
  double prev = std::numeric_limits<double>::quiet_NaN();
  std::size_t iters = 0;
  for (std::size_t level = 0; level < opts.anneal_max_levels; ++level) {
    const double ot_ab = detail::sinkhorn_cost(c_ab, epsilon, s_ab,
                                               opts.sinkhorn_max_iters,
                                               opts.sinkhorn_marginal_tol, &iters);
    const double ot_aa = detail::sinkhorn_cost(c_aa, epsilon, s_aa,
                                               opts.sinkhorn_max_iters,
                                               opts.sinkhorn_marginal_tol);
    const double ot_bb = detail::sinkhorn_cost(c_bb, epsilon, s_bb,
                                               opts.sinkhorn_max_iters,
                                               opts.sinkhorn_marginal_tol);
    const double debiased = ot_ab - 0.5 * ot_aa - 0.5 * ot_bb;
    if (!std::isnan(prev)) {
      const double change =
          std::abs(debiased - prev) / std::max(std::abs(debiased), 1e-12);
      if (change < opts.entropic_rel_tol) return std::max(debiased, 0.0);
    }
    prev = debiased;
    epsilon *= 0.5;
  }
  throw std::runtime_error(
      "w2_empirical_kd: entropic annealing did not converge (last Sinkhorn used " +
      std::to_string(iters) + " iterations)");
}

}  // namespace gproj
