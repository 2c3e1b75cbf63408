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
#include "gproj/mc.hpp"
#include "gproj/sources.hpp"

using namespace gproj;

TEST_CASE("iid factories declare the marginal second moment", "[sources]") {
  REQUIRE(make_iid(100, Marginal::gaussian())->gamma() == 1.0);
  REQUIRE(make_iid(100, Marginal::rademacher())->gamma() == 1.0);
  const auto sparse = make_iid(64, Marginal::sparse(0.1, std::sqrt(10.0)));
  REQUIRE_THAT(sparse->gamma(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE(sparse->finite_fourth_moment());
}

TEST_CASE("iid factory rejects marginals without a second moment", "[sources]") {
  REQUIRE_THROWS_AS(make_iid(10, Marginal::student_t(2)), std::invalid_argument);
  REQUIRE_NOTHROW(make_iid(10, Marginal::student_t(3)));
  REQUIRE_FALSE(make_iid(10, Marginal::student_t(3))->finite_fourth_moment());
}

TEST_CASE("sphere samples sit exactly on the radius", "[sources]") {
  const auto src = make_sphere(10, 2.0);
  Rng rng(1);
  std::vector<double> x(10);
  for (int i = 0; i < 100; ++i) {
    src->sample_into(rng, x);
    REQUIRE_THAT(squared_norm(x), Catch::Matchers::WithinRel(20.0, 1e-12));
  }
}

TEST_CASE("sphere pair overlap has the Beta(1, n-1) second moment", "[sources]") {
  // <X1, X2>/(n gamma) = gamma U / gamma with U^2 ~ Beta(1, n-1): mean 1/n.
  const std::size_t n = 25;
  const auto src = make_sphere(n, 1.0);
  Rng rng(2);
  std::vector<double> a(n), b(n), u2(20000);
  for (double& v : u2) {
    src->sample_into(rng, a);
    src->sample_into(rng, b);
    const double u = dot(a, b) / static_cast<double>(n);
    v = u * u;
  }
  const MeanSe m = batch_mean_se(u2);
  REQUIRE(std::abs(m.value - 1.0 / static_cast<double>(n)) < 4.0 * m.se);
}

TEST_CASE("sphere sample mean vanishes at the CLT rate", "[sources]") {
  const std::size_t n = 8, count = 100000;
  const auto src = make_sphere(n, 1.0);
  Rng rng(30);
  std::vector<double> mean(n, 0.0), x(n);
  for (std::size_t i = 0; i < count; ++i) {
    src->sample_into(rng, x);
    for (std::size_t j = 0; j < n; ++j) mean[j] += x[j];
  }
  // Each coordinate has variance gamma/n = 1/8.
  const double se = std::sqrt(1.0 / static_cast<double>(n) / count);
  for (std::size_t j = 0; j < n; ++j)
    REQUIRE(std::abs(mean[j] / count) < 4.0 * se);
}

TEST_CASE("orthogonal support exposes the collision mass", "[sources]") {
  REQUIRE_THAT(*make_orthogonal_support_uniform(20, 10, 1.0)->collision_lambda(),
               Catch::Matchers::WithinAbs(0.1, 1e-12));
  REQUIRE_THAT(*make_orthogonal_support(4, 2, {1.0, 0.0}, 1.0)->collision_lambda(),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(*make_orthogonal_support(4, 2, {0.5, 0.5}, 1.0)->collision_lambda(),
               Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("orthogonal support validates its arguments", "[sources]") {
  REQUIRE_THROWS_AS(make_orthogonal_support_uniform(4, 5, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(make_orthogonal_support(4, 2, {0.7, 0.7}, 1.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(make_orthogonal_support(4, 2, {1.5, -0.5}, 1.0),
                    std::invalid_argument);
}

TEST_CASE("orthogonal support atoms are orthogonal with the right norm", "[sources]") {
  const std::size_t n = 16, d = 5;
  const double gamma = 2.0;
  const auto src = make_orthogonal_support_uniform(n, d, gamma);
  Rng rng(4);
  Matrix seen(d, n);
  std::size_t found = 0;
  std::vector<double> x(n);
  while (found < d) {
    src->sample_into(rng, x);
    bool fresh = true;
    for (std::size_t i = 0; i < found; ++i)
      if (std::abs(dot(seen.row(i), x)) > 1e-12) fresh = false;
    REQUIRE_THAT(squared_norm(x), Catch::Matchers::WithinRel(n * gamma, 1e-12));
    if (fresh) {
      std::copy(x.begin(), x.end(), seen.row(found).begin());
      ++found;
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      REQUIRE(std::abs(dot(seen.row(i), seen.row(j))) < 1e-12);
}

TEST_CASE("point source is deterministic with beta_r = gamma", "[sources]") {
  const auto src = make_point({3.0, 0.0, 0.0, 4.0});
  REQUIRE_THAT(src->gamma(), Catch::Matchers::WithinRel(25.0 / 4.0, 1e-12));
  REQUIRE(*src->beta_exact(1) == src->gamma());
  REQUIRE(*src->beta_exact(2) == src->gamma());
  REQUIRE(src->constant_magnitude());
}

TEST_CASE("empirical source respects the resampling flag", "[sources]") {
  Matrix data(5, 3);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) data(i, j) = static_cast<double>(i + j);
  const auto no_resample = make_empirical(data, false);
  Rng rng(5);
  REQUIRE_THROWS_AS(sample_x(*no_resample, rng, 6), std::invalid_argument);
  REQUIRE_NOTHROW(sample_x(*no_resample, rng, 5));
  const auto resample = make_empirical(data, true);
  REQUIRE_NOTHROW(sample_x(*resample, rng, 50));
}

TEST_CASE("sample_x is deterministic given the seed path", "[sources]") {
  const auto src = make_iid(32, Marginal::gaussian());
  Rng a = Rng(9).derive(4);
  Rng b = Rng(9).derive(4);
  const Matrix ma = sample_x(*src, a, 50);
  const Matrix mb = sample_x(*src, b, 50);
  REQUIRE(ma.data() == mb.data());
}

TEST_CASE("sample_x satisfies the law of large numbers for gamma", "[sources]") {
  const auto src = make_iid(50, Marginal::sparse(0.1, std::sqrt(10.0)));
  Rng rng(6);
  const Matrix block = sample_x(*src, rng, 10000);
  std::vector<double> means(block.rows());
  for (std::size_t i = 0; i < block.rows(); ++i)
    means[i] = squared_norm(block.row(i)) / 50.0;
  const MeanSe m = batch_mean_se(means);
  REQUIRE(std::abs(m.value - src->gamma()) < 4.0 * m.se);
}

TEST_CASE("projection entries have variance 1/n", "[sources]") {
  const std::size_t k = 100, n = 100;
  Rng rng(7);
  const ProjectionDraw draw = sample_theta(k, n, rng);
  double s2 = 0.0;
  for (double v : draw.entries.data()) s2 += v * v;
  const double mean_sq = s2 / static_cast<double>(k * n);
  const double se = std::sqrt(2.0) / static_cast<double>(n) /
                    std::sqrt(static_cast<double>(k * n));
  REQUIRE(std::abs(mean_sq - 0.01) < 4.0 * se);

  Rng again(7);
  REQUIRE(sample_theta(k, n, again).entries.data() == draw.entries.data());
}

TEST_CASE("projection of a fixed norm-sqrt(n) vector has unit variance", "[sources]") {
  const std::size_t n = 64;
  std::vector<double> x(n, 1.0);  // |x|^2 = n
  Rng rng(8);
  std::vector<double> vals(20000);
  for (double& v : vals) {
    const ProjectionDraw draw = sample_theta(1, n, rng);
    const double z = dot(draw.entries.row(0), x);
    v = z * z;
  }
  const MeanSe m = batch_mean_se(vals);
  REQUIRE(std::abs(m.value - 1.0) < 4.0 * m.se);
}

TEST_CASE("column sums of the projection have variance k/n", "[sources]") {
  const std::size_t k = 3, n = 16;
  Rng rng(9);
  std::vector<double> sums;
  sums.reserve(4000 * n);
  for (int rep = 0; rep < 4000; ++rep) {
    const ProjectionDraw draw = sample_theta(k, n, rng);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += draw.entries(i, j);
      sums.push_back(s);
    }
  }
  std::vector<double> sq(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) sq[i] = sums[i] * sums[i];
  const MeanSe m = batch_mean_se(sq);
  const double expected = static_cast<double>(k) / static_cast<double>(n);
  REQUIRE(std::abs(m.value - expected) < 4.0 * m.se);
}

TEST_CASE("project_and_noise matches its defining equations", "[sources]") {
  const std::size_t n = 12, k = 2;
  Rng rng(10);
  const ProjectionDraw theta = sample_theta(k, n, rng);

  SECTION("vanishing noise leaves y = z") {
    std::vector<double> x(n, 0.5);
    const NoiseChannel tiny(1e-18, k);
    auto [z, y] = project_and_noise(theta, x, tiny, rng);
    for (std::size_t i = 0; i < k; ++i)
      REQUIRE_THAT(y[i], Catch::Matchers::WithinAbs(z[i], 1e-8));
  }

  SECTION("x = 0 gives z = 0 and pure noise of power t") {
    std::vector<double> x(n, 0.0);
    const NoiseChannel channel(2.0, k);
    std::vector<double> noise_sq;
    for (int rep = 0; rep < 20000; ++rep) {
      auto [z, y] = project_and_noise(theta, x, channel, rng);
      for (std::size_t i = 0; i < k; ++i) {
        REQUIRE(z[i] == 0.0);
        noise_sq.push_back(y[i] * y[i]);
      }
    }
    const MeanSe m = batch_mean_se(noise_sq);
    REQUIRE(std::abs(m.value - 2.0) < 4.0 * m.se);
  }

  SECTION("dimension mismatch is rejected") {
    std::vector<double> x(n + 1, 0.0);
    REQUIRE_THROWS_AS(project_and_noise(theta, x, NoiseChannel(1.0, k), rng),
                      std::invalid_argument);
  }
}

TEST_CASE("noisy projections of a sphere source have covariance (gamma+t) I",
          "[sources]") {
  const std::size_t n = 32, k = 2;
  const double gamma = 1.5, t = 0.5;
  const auto src = make_sphere(n, gamma);
  Rng rng(11);
  std::vector<double> y00, y11, y01;
  std::vector<double> x(n);
  const NoiseChannel channel(t, k);
  for (int rep = 0; rep < 30000; ++rep) {
    const ProjectionDraw theta = sample_theta(k, n, rng);
    src->sample_into(rng, x);
    auto [z, y] = project_and_noise(theta, x, channel, rng);
    y00.push_back(y[0] * y[0]);
    y11.push_back(y[1] * y[1]);
    y01.push_back(y[0] * y[1]);
  }
  const MeanSe m00 = batch_mean_se(y00), m11 = batch_mean_se(y11),
               m01 = batch_mean_se(y01);
  REQUIRE(std::abs(m00.value - (gamma + t)) < 4.0 * m00.se);
  REQUIRE(std::abs(m11.value - (gamma + t)) < 4.0 * m11.se);
  REQUIRE(std::abs(m01.value) < 4.0 * m01.se);
}

TEST_CASE("raw projections have mean zero and covariance gamma I", "[sources]") {
  const std::size_t n = 24, k = 2;
  const double gamma = 2.0;
  const auto src = make_iid(n, Marginal::gaussian(std::sqrt(gamma)));
  Rng rng(12);
  std::vector<double> z0, z00, z01;
  std::vector<double> x(n);
  for (int rep = 0; rep < 30000; ++rep) {
    const ProjectionDraw theta = sample_theta(k, n, rng);
    src->sample_into(rng, x);
    const std::vector<double> z = matvec(theta.entries, x);
    z0.push_back(z[0]);
    z00.push_back(z[0] * z[0]);
    z01.push_back(z[0] * z[1]);
  }
  const MeanSe m0 = batch_mean_se(z0), m00 = batch_mean_se(z00),
               m01 = batch_mean_se(z01);
  REQUIRE(std::abs(m0.value) < 4.0 * m0.se);
  REQUIRE(std::abs(m00.value - gamma) < 4.0 * m00.se);
  REQUIRE(std::abs(m01.value) < 4.0 * m01.se);
}
