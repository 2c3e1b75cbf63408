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
#include <map>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace gproj {

struct QuadratureRule {
  std::vector<double> nodes;    // on (-1, 1)
  std::vector<double> weights;
};

/// Gauss-Legendre nodes/weights on (-1, 1) by Newton iteration on P_n.
/// Rules are cached per order.
inline const QuadratureRule& gauss_legendre(std::size_t order) {
  static std::map<std::size_t, QuadratureRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const std::size_t half = (order + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    // Tricomi initial guess for the i-th root.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(order) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (std::size_t j = 2; j <= order; ++j) {
        const double p2 = ((2.0 * static_cast<double>(j) - 1.0) * x * p1 -
                           (static_cast<double>(j) - 1.0) * p0) /
                          static_cast<double>(j);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(order) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.weights[i] = w;
    rule.nodes[order - 1 - i] = x;
    rule.weights[order - 1 - i] = w;
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

/// Integrate f over [a, b] with a fixed-order Gauss-Legendre rule.
template <typename F>
double integrate_gl(F&& f, double a, double b, std::size_t order) {
  const QuadratureRule& rule = gauss_legendre(order);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < order; ++i)
    s += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return s * half;
}

struct QuadratureError : std::runtime_error {
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_tolerance(achieved) {}
  double achieved_tolerance;
};

/// Order-doubling Gauss-Legendre driver: doubles the order until the
/// relative change drops below `rel_tol`. Throws QuadratureError (carrying
/// the achieved tolerance) if `max_order` is reached without converging.
template <typename F>
double integrate_adaptive(F&& f, double a, double b, std::size_t start_order,
                          double rel_tol = 1e-10, std::size_t max_order = 1 << 14) {
  double prev = integrate_gl(f, a, b, start_order);
  for (std::size_t order = start_order * 2; order <= max_order; order *= 2) {
    const double cur = integrate_gl(f, a, b, order);
    const double change =
        std::abs(cur - prev) / std::max(std::abs(cur), 1e-300);
    if (change < rel_tol) return cur;
    prev = cur;
  }
  const double cur = integrate_gl(f, a, b, max_order);
  const double achieved =
      std::abs(cur - prev) / std::max(std::abs(cur), 1e-300);
  throw QuadratureError("quadrature did not converge to requested tolerance",
                        achieved);
}

/// Trapezoid rule over a uniform grid of values with spacing `dx`.
inline double trapezoid(std::span<const double> values, double dx) {
  if (values.size() < 2) return 0.0;
  double s = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) s += values[i];
  return s * dx;
}

}  // namespace gproj
