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

#include "catch2/catch_amalgamated.hpp"
#include "gproj/stats.hpp"
#include "oracles.hpp"

using namespace gproj;

namespace {

/// Deterministic random rotation from Gram-Schmidt on a seeded Gaussian
/// matrix (test helper for the rotation-invariance property).
Matrix random_rotation(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix q(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = q.row(i);
    rng.fill_gaussian(row);
    for (std::size_t j = 0; j < i; ++j) {
      const double proj = dot(row, q.row(j));
      for (std::size_t c = 0; c < n; ++c) row[c] -= proj * q.row(j)[c];
    }
    const double norm = std::sqrt(squared_norm(row));
    for (double& v : row) v /= norm;
  }
  return q;
}

}  // namespace

TEST_CASE("alpha vanishes for constant-magnitude sources", "[stats]") {
  Rng rng(1);
  REQUIRE(estimate_alpha(*make_sphere(16, 1.0), 100, rng).value == 0.0);
  REQUIRE(estimate_alpha(*make_point({1.0, 2.0}), 100, rng).value == 0.0);
  REQUIRE(estimate_alpha(*make_iid(16, Marginal::rademacher()), 100, rng).value == 0.0);
}

TEST_CASE("alpha of an iid gaussian source matches the chi-square oracle", "[stats]") {
  // Oracle: brute-force simulation of E|chi^2_100/100 - 1| (approximately
  // 0.1125), independent of the library RNG and estimator.
  const MeanSe oracle = oracles::chi_square_folded_mean(100, 2000000, 555);
  REQUIRE_THAT(oracle.value, Catch::Matchers::WithinAbs(0.1125, 0.002));
  const auto src = make_iid(100, Marginal::gaussian());
  Rng rng(2);
  const MeanSe est = estimate_alpha(*src, 60000, rng);
  REQUIRE(std::abs(est.value - oracle.value) < 3.0 * combined_se(est.se, oracle.se));
}

TEST_CASE("beta of a deterministic point equals gamma for r = 1, 2", "[stats]") {
  const auto src = make_point({2.0, 0.0, 0.0, 0.0});
  Rng rng(3);
  for (int r : {1, 2}) {
    const MeanSe est = estimate_beta(*src, r, 100, rng);
    REQUIRE_THAT(est.value, Catch::Matchers::WithinRel(src->gamma(), 1e-12));
  }
}

TEST_CASE("beta2 of iid gaussian entries is gamma/sqrt(n)", "[stats]") {
  const std::size_t n = 36;
  const double gamma = 2.0;
  const auto src = make_iid(n, Marginal::gaussian(std::sqrt(gamma)));
  Rng rng(4);
  const MeanSe est = estimate_beta(*src, 2, 60000, rng);
  const double exact = gamma / std::sqrt(static_cast<double>(n));
  REQUIRE(std::abs(est.value - exact) < 3.0 * est.se);
  REQUIRE_THAT(*src->beta_exact(2), Catch::Matchers::WithinRel(exact, 1e-12));
}

TEST_CASE("beta2 of the uniform orthogonal support is sqrt(lambda) gamma", "[stats]") {
  const auto src = make_orthogonal_support_uniform(32, 10, 1.0);
  Rng rng(5);
  const MeanSe est = estimate_beta(*src, 2, 60000, rng);
  REQUIRE(std::abs(est.value - std::sqrt(0.1)) < 3.0 * est.se);
}

TEST_CASE("beta2_exact evaluates the Frobenius norm of the second moment", "[stats]") {
  const std::size_t n = 8;
  const double gamma = 1.5;
  Matrix scaled_identity(n, n);
  for (std::size_t i = 0; i < n; ++i) scaled_identity(i, i) = gamma;
  REQUIRE_THAT(beta2_exact(scaled_identity, n),
               Catch::Matchers::WithinRel(gamma / std::sqrt(8.0), 1e-12));

  Matrix rank_one(n, n);
  rank_one(0, 0) = static_cast<double>(n) * gamma;
  REQUIRE_THAT(beta2_exact(rank_one, n), Catch::Matchers::WithinRel(gamma, 1e-12));

  Matrix asym(n, n);
  asym(0, 1) = 1.0;
  REQUIRE_THROWS_AS(beta2_exact(asym, n), std::invalid_argument);
}

TEST_CASE("beta2_exact agrees with the Monte Carlo estimator", "[stats]") {
  const std::size_t n = 16;
  const auto src = make_iid(n, Marginal::uniform(1.0));  // gamma = 1/3
  Matrix second(n, n);
  for (std::size_t i = 0; i < n; ++i) second(i, i) = src->gamma();
  Rng rng(6);
  const MeanSe est = estimate_beta(*src, 2, 60000, rng);
  REQUIRE(std::abs(est.value - beta2_exact(second, n)) < 3.0 * est.se);
}

TEST_CASE("U-statistic pair mode agrees with fresh pairs", "[stats]") {
  const auto src = make_iid(24, Marginal::gaussian());
  Rng r1(7), r2(8);
  const MeanSe fresh = estimate_beta(*src, 1, 40000, r1, PairMode::kFreshPairs);
  const MeanSe ustat = estimate_beta(*src, 1, 2048, r2, PairMode::kUStatistic);
  REQUIRE(std::abs(fresh.value - ustat.value) < 3.0 * combined_se(fresh.se, ustat.se));
}

TEST_CASE("truncation probability is zero on the sphere", "[stats]") {
  Rng rng(9);
  const TruncationSet ts = truncation_probability(*make_sphere(16, 1.0), 0.5, 5000, rng);
  REQUIRE(ts.prob_complement.value == 0.0);
}

TEST_CASE("truncation probability obeys the Markov bound", "[stats]") {
  const auto src = make_iid(50, Marginal::sparse(0.2, std::sqrt(5.0)));
  Rng rng(10);
  for (double eps : {0.25, 0.5, 1.0}) {
    Rng r = rng.derive(static_cast<std::uint64_t>(eps * 100));
    const TruncationSet ts = truncation_probability(*src, eps, 40000, r);
    REQUIRE(ts.prob_complement.value <=
            ts.markov_bound + 3.0 * ts.prob_complement.se + 1e-12);
  }
}

TEST_CASE("truncation probability matches the chi-square tail oracle", "[stats]") {
  // iid N(0,1), n = 100, eps = 1: P(|chi^2_100/100 - 1| > 0.5), about 2.7e-4.
  const double exact = oracles::chi_square_tail_two_sided(100, 0.5);
  REQUIRE_THAT(exact, Catch::Matchers::WithinAbs(2.7e-4, 1e-4));
  const auto src = make_iid(100, Marginal::gaussian());
  Rng rng(11);
  const TruncationSet ts = truncation_probability(*src, 1.0, 200000, rng);
  const double binom_se = std::sqrt(exact * (1.0 - exact) / 200000.0);
  REQUIRE(std::abs(ts.prob_complement.value - exact) < 4.0 * binom_se);
}

TEST_CASE("functionals are invariant under a fixed rotation", "[stats]") {
  const std::size_t n = 16;
  const auto base = make_iid(n, Marginal::sparse(0.3, 2.0));
  const auto rotated = make_rotated(base, random_rotation(n, 77));
  Rng r1(12), r2(13);
  const DistributionStats a = compute_stats(*base, 40000, 40000, r1);
  const DistributionStats b = compute_stats(*rotated, 40000, 40000, r2);
  REQUIRE(std::abs(a.alpha.value - b.alpha.value) <
          3.0 * combined_se(a.alpha.se, b.alpha.se) + 1e-12);
  REQUIRE(std::abs(a.beta1.value - b.beta1.value) <
          3.0 * combined_se(a.beta1.se, b.beta1.se) + 1e-12);
  // beta2 is closed-form for iid sources; force the Monte Carlo route on
  // the rotated copy against the closed form of the base.
  Rng r3(14);
  const MeanSe b2_rot = estimate_beta(*rotated, 2, 40000, r3);
  REQUIRE(std::abs(b2_rot.value - a.beta2.value) < 3.0 * b2_rot.se);
}

TEST_CASE("scaling X by c multiplies gamma, alpha, beta by c^2", "[stats]") {
  const std::size_t n = 32;
  const double c = 3.0;
  const auto base = make_iid(n, Marginal::gaussian(1.0));
  const auto scaled = make_iid(n, Marginal::gaussian(c));
  Rng r1(15), r2(16);
  const DistributionStats a = compute_stats(*base, 50000, 50000, r1);
  const DistributionStats b = compute_stats(*scaled, 50000, 50000, r2);
  REQUIRE_THAT(b.gamma, Catch::Matchers::WithinRel(c * c * a.gamma, 1e-12));
  const double se_alpha = combined_se(c * c * a.alpha.se, b.alpha.se);
  REQUIRE(std::abs(b.alpha.value - c * c * a.alpha.value) < 3.0 * se_alpha);
  const double se_beta1 = combined_se(c * c * a.beta1.se, b.beta1.se);
  REQUIRE(std::abs(b.beta1.value - c * c * a.beta1.value) < 3.0 * se_beta1);
  // Normalized ratios are scale-free.
  REQUIRE(std::abs(b.alpha.value / b.gamma - a.alpha.value / a.gamma) <
          3.0 * se_alpha / a.gamma);
}

TEST_CASE("beta1 never exceeds beta2", "[stats]") {
  Rng rng(17);
  const std::vector<SourcePtr> sources = {
      make_iid(20, Marginal::gaussian()),
      make_iid(20, Marginal::rademacher()),
      make_sphere(20, 1.0),
      make_orthogonal_support_uniform(20, 7, 1.0),
      make_point(std::vector<double>(20, 1.0)),
  };
  for (std::size_t i = 0; i < sources.size(); ++i) {
    Rng r = rng.derive(i);
    const MeanSe b1 = estimate_beta(*sources[i], 1, 30000, r);
    Rng r2 = rng.derive(100 + i);
    const MeanSe b2 = estimate_beta(*sources[i], 2, 30000, r2);
    REQUIRE(b1.value <= b2.value + 3.0 * combined_se(b1.se, b2.se) + 1e-12);
  }
}

TEST_CASE("sphere beta2 estimate matches gamma/sqrt(n)", "[stats]") {
  const std::size_t n = 40;
  const double gamma = 1.25;
  const auto src = make_sphere(n, gamma);
  Rng rng(18);
  const MeanSe est = estimate_beta(*src, 2, 60000, rng);
  REQUIRE(std::abs(est.value - gamma / std::sqrt(static_cast<double>(n))) <
          3.0 * est.se);
}

TEST_CASE("compute_stats reports exactness flags", "[stats]") {
  Rng rng(19);
  const DistributionStats s = compute_stats(*make_sphere(16, 1.0), 1000, 1000, rng);
  REQUIRE(s.gamma_exact);
  REQUIRE(s.alpha_exact);
  REQUIRE(s.beta1_exact);
  REQUIRE(s.beta2_exact_flag);
  REQUIRE(s.alpha.value == 0.0);
}
