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
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gproj/matrix.hpp"
#include "gproj/rng.hpp"

namespace gproj {

enum class SourceKind {
  kIidMarginal,
  kSphereUniform,
  kOrthogonalSupport,
  kDeterministicPoint,
  kEmpiricalDataset,
};

inline const char* to_string(SourceKind k) {
  switch (k) {
    case SourceKind::kIidMarginal: return "iid-marginal";
    case SourceKind::kSphereUniform: return "sphere-uniform";
    case SourceKind::kOrthogonalSupport: return "orthogonal-support";
    case SourceKind::kDeterministicPoint: return "deterministic-point";
    case SourceKind::kEmpiricalDataset: return "empirical-dataset";
  }
  return "?";
}

/// One-dimensional marginal for i.i.d.-entry sources. All supported
/// marginals are symmetric about zero.
struct Marginal {
  enum class Kind { kGaussian, kRademacher, kSparse, kUniform, kStudentT };

  Kind kind = Kind::kGaussian;
  double a = 1.0;  // gaussian: sigma; sparse: p; uniform: half-width; student-t: dof
  double b = 0.0;  // sparse: magnitude of the nonzero value

  static Marginal gaussian(double sigma = 1.0) { return {Kind::kGaussian, sigma, 0.0}; }
  static Marginal rademacher() { return {Kind::kRademacher, 0.0, 0.0}; }
  static Marginal sparse(double p, double value) { return {Kind::kSparse, p, value}; }
  static Marginal uniform(double half_width) { return {Kind::kUniform, half_width, 0.0}; }
  static Marginal student_t(double dof) { return {Kind::kStudentT, dof, 0.0}; }

  [[nodiscard]] double second_moment() const {
    switch (kind) {
      case Kind::kGaussian: return a * a;
      case Kind::kRademacher: return 1.0;
      case Kind::kSparse: return a * b * b;
      case Kind::kUniform: return a * a / 3.0;
      case Kind::kStudentT:
        return a > 2.0 ? a / (a - 2.0) : std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  [[nodiscard]] bool finite_fourth_moment() const {
    return kind != Kind::kStudentT || a > 4.0;
  }

  /// True when |X| is a single constant, so the norm of an i.i.d. vector is
  /// deterministic.
  [[nodiscard]] bool constant_magnitude() const { return kind == Kind::kRademacher; }

  double sample(Rng& rng) const {
    switch (kind) {
      case Kind::kGaussian:
        return a * rng.gaussian();
      case Kind::kRademacher:
        return rng.rademacher();
      case Kind::kSparse: {
        const double u = rng.uniform();
        if (u < 0.5 * a) return b;
        if (u < a) return -b;
        return 0.0;
      }
      case Kind::kUniform:
        return rng.uniform(-a, a);
      case Kind::kStudentT: {
        // Integer dof: chi-square as a sum of squared normals.
        const int dof = static_cast<int>(a);
        double chi2 = 0.0;
        for (int i = 0; i < dof; ++i) {
          const double g = rng.gaussian();
          chi2 += g * g;
        }
        return rng.gaussian() / std::sqrt(chi2 / static_cast<double>(dof));
      }
    }
    return 0.0;
  }

  [[nodiscard]] std::string name() const {
    switch (kind) {
      case Kind::kGaussian: return "gaussian";
      case Kind::kRademacher: return "rademacher";
      case Kind::kSparse: return "sparse";
      case Kind::kUniform: return "uniform";
      case Kind::kStudentT: return "student-t";
    }
    return "?";
  }
};

/// A sampler plus metadata for the law of the ambient vector X.
///
/// gamma() is E[|X|^2]/n, exact for the construction-based kinds and
/// estimated from the data for empirical sources. Closed-form functionals
/// are exposed when the kind admits them so estimators can skip Monte Carlo.
class VectorSource {
 public:
  virtual ~VectorSource() = default;

  [[nodiscard]] std::size_t dim() const { return n_; }
  [[nodiscard]] double gamma() const { return gamma_; }
  [[nodiscard]] bool gamma_exact() const { return gamma_exact_; }
  [[nodiscard]] SourceKind kind() const { return kind_; }
  [[nodiscard]] const std::string& name() const { return name_; }

  /// Draw one vector into `out` (size n).
  virtual void sample_into(Rng& rng, std::span<double> out) const = 0;

  /// Batch draw; rows are i.i.d. unless the kind documents otherwise
  /// (empirical sources sample without replacement by default).
  virtual Matrix sample_block(Rng& rng, std::size_t count) const {
    Matrix m(count, n_);
    for (std::size_t i = 0; i < count; ++i) sample_into(rng, m.row(i));
    return m;
  }

  // Closed-form functionals, when the law admits them.
  [[nodiscard]] virtual std::optional<double> alpha_exact() const {
    return constant_magnitude() ? std::optional<double>(0.0) : std::nullopt;
  }
  [[nodiscard]] virtual std::optional<double> beta_exact(int /*r*/) const {
    return std::nullopt;
  }
  /// Collision mass sum(w_i^2) for discrete supports.
  [[nodiscard]] virtual std::optional<double> collision_lambda() const {
    return std::nullopt;
  }
  /// (1/n)|E X|^2 when known.
  [[nodiscard]] virtual std::optional<double> mean_sq_norm_over_n() const {
    return std::nullopt;
  }
  /// True iff (1/n)|X|^2 = gamma almost surely.
  [[nodiscard]] virtual bool constant_magnitude() const { return false; }
  [[nodiscard]] virtual bool finite_fourth_moment() const { return true; }

 protected:
  VectorSource(std::size_t n, double gamma, bool gamma_exact, SourceKind kind,
               std::string name)
      : n_(n), gamma_(gamma), gamma_exact_(gamma_exact), kind_(kind),
        name_(std::move(name)) {
    if (n_ == 0) throw std::invalid_argument("source: n must be positive");
    if (!(gamma_ > 0.0) || !std::isfinite(gamma_))
      throw std::invalid_argument("source: gamma must be positive and finite");
  }

  std::size_t n_;
  double gamma_;
  bool gamma_exact_;
  SourceKind kind_;
  std::string name_;
};

using SourcePtr = std::shared_ptr<const VectorSource>;

namespace detail {

class IidSource final : public VectorSource {
 public:
  IidSource(std::size_t n, Marginal marginal)
      : VectorSource(n, marginal.second_moment(), true, SourceKind::kIidMarginal,
                     "iid-" + marginal.name()),
        marginal_(marginal) {}

  void sample_into(Rng& rng, std::span<double> out) const override {
    for (double& v : out) v = marginal_.sample(rng);
  }

  std::optional<double> beta_exact(int r) const override {
    // E[X X^T] = gamma I, so beta_2 = gamma/sqrt(n).
    if (r == 2) return gamma_ / std::sqrt(static_cast<double>(n_));
    return std::nullopt;
  }
  std::optional<double> mean_sq_norm_over_n() const override { return 0.0; }
  bool constant_magnitude() const override { return marginal_.constant_magnitude(); }
  bool finite_fourth_moment() const override { return marginal_.finite_fourth_moment(); }

  [[nodiscard]] const Marginal& marginal() const { return marginal_; }

 private:
  Marginal marginal_;
};

class SphereSource final : public VectorSource {
 public:
  SphereSource(std::size_t n, double gamma)
      : VectorSource(n, gamma, true, SourceKind::kSphereUniform, "sphere") {
    if (n < 2) throw std::invalid_argument("sphere source: n must be >= 2");
    radius_ = std::sqrt(static_cast<double>(n) * gamma);
  }

  void sample_into(Rng& rng, std::span<double> out) const override {
    double norm_sq = 0.0;
    do {
      for (double& v : out) v = rng.gaussian();
      norm_sq = squared_norm(out);
    } while (norm_sq == 0.0);
    const double scale = radius_ / std::sqrt(norm_sq);
    for (double& v : out) v *= scale;
  }

  std::optional<double> beta_exact(int r) const override {
    const double n = static_cast<double>(n_);
    if (r == 2) return gamma_ / std::sqrt(n);  // E[U^2] = 1/n
    if (r == 1) {
      // E|U| with U^2 ~ Beta(1, n-1): Gamma(3/2)Gamma(n)/Gamma(n+1/2).
      const double log_e =
          std::lgamma(1.5) + std::lgamma(n) - std::lgamma(n + 0.5);
      return gamma_ * std::exp(log_e);
    }
    return std::nullopt;
  }
  std::optional<double> mean_sq_norm_over_n() const override { return 0.0; }
  bool constant_magnitude() const override { return true; }

 private:
  double radius_;
};

class OrthogonalSupportSource final : public VectorSource {
 public:
  OrthogonalSupportSource(std::size_t n, std::size_t d, std::vector<double> weights,
                          double gamma)
      : VectorSource(n, gamma, true, SourceKind::kOrthogonalSupport,
                     "orthogonal-support"),
        d_(d), weights_(std::move(weights)) {
    if (d_ == 0 || d_ > n_)
      throw std::invalid_argument("orthogonal support: need 1 <= d <= n");
    if (weights_.size() != d_)
      throw std::invalid_argument("orthogonal support: weight count != d");
    double sum = 0.0;
    for (double w : weights_) {
      if (w < 0.0) throw std::invalid_argument("orthogonal support: negative weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("orthogonal support: weights must sum to 1");
    cdf_.resize(d_);
    std::partial_sum(weights_.begin(), weights_.end(), cdf_.begin());
    cdf_.back() = 1.0;
    atom_value_ = std::sqrt(static_cast<double>(n_) * gamma_);
  }

  void sample_into(Rng& rng, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    const double u = rng.uniform();
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    out[std::min(idx, d_ - 1)] = atom_value_;
  }

  std::optional<double> beta_exact(int r) const override {
    // <X1, X2>/n is gamma with probability lambda, else 0.
    const double lambda = *collision_lambda();
    if (r == 1) return lambda * gamma_;
    if (r == 2) return std::sqrt(lambda) * gamma_;
    return std::nullopt;
  }
  std::optional<double> collision_lambda() const override {
    double s = 0.0;
    for (double w : weights_) s += w * w;
    return s;
  }
  std::optional<double> mean_sq_norm_over_n() const override {
    // |E X|^2 = n * gamma * sum(w_i^2).
    return gamma_ * *collision_lambda();
  }
  bool constant_magnitude() const override { return true; }

  [[nodiscard]] std::size_t support_size() const { return d_; }
  [[nodiscard]] double atom_value() const { return atom_value_; }

 private:
  std::size_t d_;
  std::vector<double> weights_;
  std::vector<double> cdf_;
  double atom_value_;
};

class PointSource final : public VectorSource {
 public:
  explicit PointSource(std::vector<double> point)
      : VectorSource(point.size(),
                     squared_norm(std::span<const double>(point)) /
                         static_cast<double>(point.size()),
                     true, SourceKind::kDeterministicPoint, "point"),
        point_(std::move(point)) {}

  void sample_into(Rng& /*rng*/, std::span<double> out) const override {
    std::copy(point_.begin(), point_.end(), out.begin());
  }

  std::optional<double> beta_exact(int /*r*/) const override { return gamma_; }
  std::optional<double> collision_lambda() const override { return 1.0; }
  std::optional<double> mean_sq_norm_over_n() const override { return gamma_; }
  bool constant_magnitude() const override { return true; }

 private:
  std::vector<double> point_;
};

class EmpiricalSource final : public VectorSource {
 public:
  EmpiricalSource(Matrix data, bool with_replacement)
      : VectorSource(data.cols(), estimate_gamma(data), false,
                     SourceKind::kEmpiricalDataset, "empirical"),
        data_(std::move(data)), with_replacement_(with_replacement) {}

  void sample_into(Rng& rng, std::span<double> out) const override {
    const std::size_t idx = rng.next_below(data_.rows());
    const auto row = data_.row(idx);
    std::copy(row.begin(), row.end(), out.begin());
  }

  Matrix sample_block(Rng& rng, std::size_t count) const override {
    if (with_replacement_) return VectorSource::sample_block(rng, count);
    if (count > data_.rows())
      throw std::invalid_argument(
          "empirical source: requested more samples than the dataset holds "
          "and resampling is disabled");
    // Partial Fisher-Yates over row indices.
    std::vector<std::size_t> idx(data_.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Matrix m(count, n_);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.next_below(idx.size() - i);
      std::swap(idx[i], idx[j]);
      const auto row = data_.row(idx[i]);
      std::copy(row.begin(), row.end(), m.row(i).begin());
    }
    return m;
  }

 private:
  static double estimate_gamma(const Matrix& data) {
    if (data.rows() == 0) throw std::invalid_argument("empirical source: no rows");
    double s = 0.0;
    for (std::size_t i = 0; i < data.rows(); ++i) s += squared_norm(data.row(i));
    return s / static_cast<double>(data.rows() * data.cols());
  }

  Matrix data_;
  bool with_replacement_;
};

/// Applies a fixed orthogonal map to an inner source. Used to exercise
/// rotation invariance of the distribution functionals.
class RotatedSource final : public VectorSource {
 public:
  RotatedSource(SourcePtr inner, Matrix rotation)
      : VectorSource(inner->dim(), inner->gamma(), inner->gamma_exact(),
                     inner->kind(), inner->name() + "-rotated"),
        inner_(std::move(inner)), rotation_(std::move(rotation)) {
    if (rotation_.rows() != n_ || rotation_.cols() != n_)
      throw std::invalid_argument("rotated source: rotation must be n x n");
  }

  void sample_into(Rng& rng, std::span<double> out) const override {
    std::vector<double> x(n_);
    inner_->sample_into(rng, x);
    matvec(rotation_, x, out);
  }

  bool constant_magnitude() const override { return inner_->constant_magnitude(); }
  std::optional<double> beta_exact(int r) const override { return inner_->beta_exact(r); }
  std::optional<double> alpha_exact() const override { return inner_->alpha_exact(); }

 private:
  SourcePtr inner_;
  Matrix rotation_;
};

}  // namespace detail

inline SourcePtr make_iid(std::size_t n, Marginal marginal) {
  if (!std::isfinite(marginal.second_moment()))
    throw std::invalid_argument("make_iid: marginal second moment is not finite");
  return std::make_shared<detail::IidSource>(n, marginal);
}

inline SourcePtr make_sphere(std::size_t n, double gamma) {
  return std::make_shared<detail::SphereSource>(n, gamma);
}

inline SourcePtr make_orthogonal_support(std::size_t n, std::size_t d,
                                         std::vector<double> weights, double gamma) {
  return std::make_shared<detail::OrthogonalSupportSource>(n, d, std::move(weights),
                                                           gamma);
}

inline SourcePtr make_orthogonal_support_uniform(std::size_t n, std::size_t d,
                                                 double gamma) {
  return make_orthogonal_support(
      n, d, std::vector<double>(d, 1.0 / static_cast<double>(d)), gamma);
}

inline SourcePtr make_point(std::vector<double> point) {
  return std::make_shared<detail::PointSource>(std::move(point));
}

inline SourcePtr make_empirical(Matrix data, bool with_replacement = false) {
  return std::make_shared<detail::EmpiricalSource>(std::move(data), with_replacement);
}

inline SourcePtr make_rotated(SourcePtr inner, Matrix rotation) {
  return std::make_shared<detail::RotatedSource>(std::move(inner), std::move(rotation));
}

/// One realization of the k x n projection matrix with i.i.d. N(0, 1/n)
/// entries, together with its seed lineage.
struct ProjectionDraw {
  std::size_t k = 0;
  std::size_t n = 0;
  Matrix entries;
  std::string seed_path;
};

/// Additive Gaussian noise channel of power t applied to k coordinates.
struct NoiseChannel {
  double t = 1.0;
  std::size_t k = 1;

  NoiseChannel(double t_in, std::size_t k_in) : t(t_in), k(k_in) {
    if (!(t > 0.0)) throw std::invalid_argument("noise channel: t must be positive");
    if (k == 0) throw std::invalid_argument("noise channel: k must be positive");
  }
};

inline Matrix sample_x(const VectorSource& source, Rng& rng, std::size_t count) {
  if (count == 0) throw std::invalid_argument("sample_x: count must be >= 1");
  return source.sample_block(rng, count);
}

inline ProjectionDraw sample_theta(std::size_t k, std::size_t n, Rng& rng) {
  if (k == 0 || n == 0) throw std::invalid_argument("sample_theta: k, n must be >= 1");
  ProjectionDraw draw;
  draw.k = k;
  draw.n = n;
  draw.entries = Matrix(k, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& v : draw.entries.data()) v = scale * rng.gaussian();
  draw.seed_path = rng.path_string();
  return draw;
}

/// z = theta x and y = z + sqrt(t) N.
inline std::pair<std::vector<double>, std::vector<double>> project_and_noise(
    const ProjectionDraw& theta, std::span<const double> x, const NoiseChannel& channel,
    Rng& rng) {
  if (x.size() != theta.n || channel.k != theta.k)
    throw std::invalid_argument("project_and_noise: dimension mismatch");
  std::vector<double> z = matvec(theta.entries, x);
  std::vector<double> y(z.size());
  const double sqrt_t = std::sqrt(channel.t);
  for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] + sqrt_t * rng.gaussian();
  return {std::move(z), std::move(y)};
}

}  // namespace gproj
