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
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "gproj/rng.hpp"
#include "gproj/transport.hpp"
#include "oracles.hpp"

using namespace gproj;

namespace {

Matrix gaussian_cloud(std::size_t m, std::size_t k, double sigma, Rng& rng) {
  Matrix cloud(m, k);
  for (double& v : cloud.data()) v = sigma * rng.gaussian();
  return cloud;
}

}  // namespace

TEST_CASE("1-d transport basics", "[transport]") {
  const std::vector<double> a = {0.0, 1.0, 2.0};
  REQUIRE(w2_empirical_1d(a, a) == 0.0);
  const std::vector<double> b = {2.0, 0.0, 1.0};
  REQUIRE(w2_empirical_1d(a, b) == 0.0);  // same multiset
  std::vector<double> shifted(a);
  for (double& v : shifted) v += 5.0;
  REQUIRE_THAT(w2_empirical_1d(a, shifted), Catch::Matchers::WithinRel(25.0, 1e-12));
  // Shift both: unchanged.
  std::vector<double> b2(b);
  for (double& v : b2) v += 3.0;
  std::vector<double> a2(a);
  for (double& v : a2) v += 3.0;
  REQUIRE(w2_empirical_1d(a2, b2) == w2_empirical_1d(a, b));
  REQUIRE_THROWS_AS(w2_empirical_1d(a, std::vector<double>{1.0}),
                    std::invalid_argument);
}

TEST_CASE("1-d transport recovers the gaussian scale gap", "[transport]") {
  // W2^2(N(0,1), N(0,4)) = (2-1)^2 = 1.
  Rng rng(1);
  const std::size_t m = 100000;
  std::vector<double> a(m), b(m);
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = rng.gaussian();
    b[i] = 2.0 * rng.gaussian();
  }
  REQUIRE_THAT(w2_empirical_1d(a, b), Catch::Matchers::WithinAbs(1.0, 0.02));
  REQUIRE(w2_empirical_1d(a, b) == w2_empirical_1d(b, a));
}

TEST_CASE("assignment solver matches brute force on small instances", "[transport]") {
  Rng rng(2);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 2 + trial % 6;  // 2..7
    Matrix cost(n, n);
    for (double& v : cost.data()) v = rng.uniform();
    const double fast = detail::assignment_min_cost(cost);
    const double brute = oracles::brute_force_assignment(cost);
    REQUIRE_THAT(fast, Catch::Matchers::WithinRel(brute, 1e-12));
  }
}

TEST_CASE("exact k-d transport on hand-checkable clouds", "[transport]") {
  Matrix a(2, 2), b(2, 2);
  a(0, 0) = 0.0; a(0, 1) = 0.0;
  a(1, 0) = 1.0; a(1, 1) = 0.0;
  b(0, 0) = 1.0; b(0, 1) = 1.0;
  b(1, 0) = 0.0; b(1, 1) = 1.0;
  // Optimal matching pairs (0,0)->(0,1) and (1,0)->(1,1): cost (1+1)/2 = 1.
  REQUIRE_THAT(w2_empirical_kd(a, b, W2Method::kExactAssignment),
               Catch::Matchers::WithinRel(1.0, 1e-12));
  REQUIRE(w2_empirical_kd(a, a, W2Method::kExactAssignment) == 0.0);
}

TEST_CASE("exact k-d transport recovers the isotropic gaussian gap", "[transport]") {
  // W2^2(N(0, I_2), N(0, 4 I_2)) = 2 (2-1)^2 = 2.
  Rng rng(3);
  const std::size_t m = 2000;
  const Matrix a = gaussian_cloud(m, 2, 1.0, rng);
  const Matrix b = gaussian_cloud(m, 2, 2.0, rng);
  const double w2 = w2_empirical_kd(a, b, W2Method::kExactAssignment);
  REQUIRE_THAT(w2, Catch::Matchers::WithinAbs(2.0, 0.15));
}

TEST_CASE("exact path refuses clouds beyond its size limit", "[transport]") {
  Rng rng(4);
  const Matrix a = gaussian_cloud(2001, 2, 1.0, rng);
  const Matrix b = gaussian_cloud(2001, 2, 1.0, rng);
  REQUIRE_THROWS_AS(w2_empirical_kd(a, b, W2Method::kExactAssignment),
                    std::invalid_argument);
}

TEST_CASE("debiased entropic transport agrees with the exact solver", "[transport]") {
  Rng rng(5);
  const std::size_t m = 1000;
  const Matrix a = gaussian_cloud(m, 2, 1.0, rng);
  const Matrix b = gaussian_cloud(m, 2, 1.8, rng);
  const double exact = w2_empirical_kd(a, b, W2Method::kExactAssignment);
  const double entropic = w2_empirical_kd(a, b, W2Method::kEntropicDebiased);
  REQUIRE(std::abs(entropic - exact) < 0.05 * exact);
}

TEST_CASE("debiased entropic transport vanishes on identical clouds", "[transport]") {
  Rng rng(6);
  const Matrix a = gaussian_cloud(256, 2, 1.0, rng);
  REQUIRE(w2_empirical_kd(a, a, W2Method::kEntropicDebiased) <= 1e-6);
}

TEST_CASE("empirical transport obeys the metric axioms", "[transport]") {
  Rng rng(7);
  const std::size_t m = 64;

  SECTION("one dimension") {
    std::vector<double> a(m), b(m), c(m);
    for (std::size_t i = 0; i < m; ++i) {
      a[i] = rng.gaussian();
      b[i] = 0.5 + 1.3 * rng.gaussian();
      c[i] = -1.0 + 0.7 * rng.gaussian();
    }
    const double ab = std::sqrt(w2_empirical_1d(a, b));
    const double bc = std::sqrt(w2_empirical_1d(b, c));
    const double ac = std::sqrt(w2_empirical_1d(a, c));
    REQUIRE(ac <= ab + bc + 1e-9);
    REQUIRE(w2_empirical_1d(a, a) == 0.0);
  }

  SECTION("two dimensions, exact assignment") {
    const Matrix a = gaussian_cloud(m, 2, 1.0, rng);
    const Matrix b = gaussian_cloud(m, 2, 1.5, rng);
    const Matrix c = gaussian_cloud(m, 2, 0.8, rng);
    const double ab = std::sqrt(w2_empirical_kd(a, b, W2Method::kExactAssignment));
    const double ba = std::sqrt(w2_empirical_kd(b, a, W2Method::kExactAssignment));
    REQUIRE_THAT(ab, Catch::Matchers::WithinRel(ba, 1e-12));
    const double bc = std::sqrt(w2_empirical_kd(b, c, W2Method::kExactAssignment));
    const double ac = std::sqrt(w2_empirical_kd(a, c, W2Method::kExactAssignment));
    REQUIRE(ac <= ab + bc + 1e-9);
  }
}
