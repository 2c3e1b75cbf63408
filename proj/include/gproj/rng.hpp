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
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace gproj {

/// Counter-based splittable pseudo-random generator.
///
/// Each stream is a SplitMix64 walk identified by a 64-bit key; `derive(i)`
/// produces an independent child stream from (key, i) without touching the
/// parent's counter. Replicate r of a job seeded with root seed s always
/// sees the same stream, so serial and work-stealing parallel runs produce
/// bit-identical output.
class Rng {
 public:
  explicit Rng(std::uint64_t root_seed)
      : key_(mix(root_seed + kKeyTweak)), path_(1, root_seed) {}

  /// Child stream for replicate/work-unit `index`. Does not consume state.
  [[nodiscard]] Rng derive(std::uint64_t index) const {
    Rng child(*this);
    child.key_ = mix(mix(key_ ^ kDeriveTweak) + index * kGolden);
    child.ctr_ = 0;
    child.have_cached_gaussian_ = false;
    child.path_.push_back(index);
    return child;
  }

  static Rng from_path(std::uint64_t root, std::span<const std::uint64_t> path) {
    Rng r(root);
    for (std::uint64_t idx : path) r = r.derive(idx);
    return r;
  }

  std::uint64_t next_u64() { return mix(key_ + (++ctr_) * kGolden); }

  /// Uniform on the open interval (0, 1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; one spare value is cached.
  double gaussian() {
    if (have_cached_gaussian_) {
      have_cached_gaussian_ = false;
      return cached_gaussian_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_gaussian_ = radius * std::sin(angle);
    have_cached_gaussian_ = true;
    return radius * std::cos(angle);
  }

  void fill_gaussian(std::span<double> out) {
    for (double& v : out) v = gaussian();
  }

  double exponential() { return -std::log(uniform()); }

  /// +1 or -1 with equal probability.
  double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  /// Uniform index in [0, bound) by rejection (unbiased).
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t v = next_u64();
      if (v >= threshold) return v % bound;
    }
  }

  /// Seed lineage "root/i/j/..." for reproducibility records.
  [[nodiscard]] std::string path_string() const {
    std::string s;
    for (std::size_t i = 0; i < path_.size(); ++i) {
      if (i > 0) s += '/';
      s += std::to_string(path_[i]);
    }
    return s;
  }

  [[nodiscard]] const std::vector<std::uint64_t>& path() const { return path_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kKeyTweak = 0xA0761D6478BD642FULL;
  static constexpr std::uint64_t kDeriveTweak = 0x94D049BB133111EBULL;

  // SplitMix64 finalizer (Vigna 2015).
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t ctr_ = 0;
  bool have_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
  std::vector<std::uint64_t> path_;
};

}  // namespace gproj
