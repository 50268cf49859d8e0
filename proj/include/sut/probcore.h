// Copyright 2026 The Shuffle Uniformity Testing Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Probability primitives over finite domains: distributions, histograms,
// seeded random streams, and the Poisson / categorical samplers used by the
// protocol simulations.
//
// Symbols of a domain [k] = {1, ..., k} are stored 0-based: symbol j lives at
// index j - 1 everywhere in this library.

#ifndef SUT_PROBCORE_H_
#define SUT_PROBCORE_H_

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"

namespace sut {

// Absolute tolerance on the total mass of a probability vector.
inline constexpr double kNormalizationTolerance = 1e-12;

class DiscreteDistribution {
 public:
  // Validates `probs` as-is: non-negative, finite, summing to 1 within
  // kNormalizationTolerance. Never renormalizes.
  static absl::StatusOr<DiscreteDistribution> Create(
      std::vector<double> probs) {
    if (probs.empty()) {
      return absl::InvalidArgumentError(
          "DiscreteDistribution: domain size must be positive");
    }
    double total = 0;
    for (size_t j = 0; j < probs.size(); ++j) {
      if (!std::isfinite(probs[j]) || probs[j] < 0) {
        return absl::InvalidArgumentError(
            absl::StrCat("DiscreteDistribution: entry ", j + 1,
                         " is negative or not finite"));
      }
      total += probs[j];
    }
    if (std::abs(total - 1.0) > kNormalizationTolerance) {
      return absl::InvalidArgumentError(absl::StrCat(
          "DiscreteDistribution: entries sum to ", total, ", not 1"));
    }
    return DiscreteDistribution(std::move(probs));
  }

  // Explicit renormalization of non-negative weights with positive total.
  static absl::StatusOr<DiscreteDistribution> Normalized(
      std::vector<double> weights) {
    double total = 0;
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0) {
        return absl::InvalidArgumentError(
            "DiscreteDistribution: weights must be finite and non-negative");
      }
      total += w;
    }
    if (!(total > 0)) {
      return absl::InvalidArgumentError(
          "DiscreteDistribution: weights have zero total mass");
    }
    for (double& w : weights) w /= total;
    return DiscreteDistribution(std::move(weights));
  }

  // Requires k >= 1.
  static DiscreteDistribution Uniform(size_t k) {
    assert(k >= 1);
    return DiscreteDistribution(
        std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  static absl::StatusOr<DiscreteDistribution> PointMass(size_t k,
                                                        size_t index) {
    if (index >= k) {
      return absl::InvalidArgumentError("PointMass: index outside domain");
    }
    std::vector<double> probs(k, 0.0);
    probs[index] = 1.0;
    return DiscreteDistribution(std::move(probs));
  }

  size_t k() const { return probs_.size(); }
  double operator[](size_t index) const { return probs_[index]; }
  std::span<const double> probs() const { return probs_; }

  bool IsUniform() const {
    return std::all_of(probs_.begin(), probs_.end(),
                       [&](double p) { return p == probs_.front(); });
  }

 private:
  explicit DiscreteDistribution(std::vector<double> probs)
      : probs_(std::move(probs)) {}

  std::vector<double> probs_;
};

// Counts over a finite domain. `total()` is maintained alongside the counts.
class Histogram {
 public:
  explicit Histogram(size_t bins) : counts_(bins, 0) {}

  static absl::StatusOr<Histogram> FromCounts(std::vector<int64_t> counts) {
    Histogram h(0);
    for (int64_t c : counts) {
      if (c < 0) {
        return absl::InvalidArgumentError("Histogram: negative count");
      }
      h.total_ += c;
    }
    h.counts_ = std::move(counts);
    return h;
  }

  void Add(size_t index, int64_t amount = 1) {
    counts_[index] += amount;
    total_ += amount;
  }

  size_t bins() const { return counts_.size(); }
  int64_t operator[](size_t index) const { return counts_[index]; }
  std::span<const int64_t> counts() const { return counts_; }
  int64_t total() const { return total_; }

 private:
  std::vector<int64_t> counts_;
  int64_t total_ = 0;
};

// A reproducible random stream identified by (seed, stream id). Identical
// pairs replay identical draws; the engine and every transform below are
// fully specified, so draws are identical across platforms and compilers.
class RandomSource {
 public:
  RandomSource(uint64_t seed, uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<uint32_t>(seed),
                      static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(stream_id),
                      static_cast<uint32_t>(stream_id >> 32),
                      0x5eedu};
    engine_.seed(seq);
  }

  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_id_; }

  uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on {0, ..., n - 1}; n must be positive. Lemire's multiply with
  // rejection, so the result is exactly uniform.
  uint64_t UniformInt(uint64_t n) {
    assert(n > 0);
    unsigned __int128 m =
        static_cast<unsigned __int128>(engine_()) * n;
    auto low = static_cast<uint64_t>(m);
    if (low < n) {
      const uint64_t threshold = -n % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * n;
        low = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  // A fair bit straight from the engine.
  bool FairBit() { return (engine_() >> 63) != 0; }

 private:
  uint64_t seed_;
  uint64_t stream_id_;
  std::mt19937_64 engine_;
};

namespace internal {

// log(n!) without touching the global state lgamma writes on glibc.
inline double LogFactorial(int64_t n) {
  constexpr int kTableSize = 256;
  static const std::array<double, kTableSize> kTable = [] {
    std::array<double, kTableSize> t{};
    t[0] = 0;
    for (int i = 1; i < kTableSize; ++i) t[i] = t[i - 1] + std::log(i);
    return t;
  }();
  if (n < kTableSize) return kTable[n];
  // Stirling series for log Gamma(x), x = n + 1 >= 257.
  const double x = static_cast<double>(n) + 1.0;
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return (x - 0.5) * std::log(x) - x +
         0.5 * std::log(2 * std::numbers::pi) +
         inv * (1.0 / 12 - inv2 * (1.0 / 360 - inv2 / 1260));
}

}  // namespace internal

// Poisson sampler for a fixed rate. Uses sequential inversion below
// kPtrsThreshold and Hormann's transformed rejection with squeeze (PTRS)
// above it.
class PoissonSampler {
 public:
  static constexpr double kPtrsThreshold = 30.0;

  static absl::StatusOr<PoissonSampler> Create(double rate) {
    if (!std::isfinite(rate) || rate < 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("Poisson rate must be finite and >= 0, got ", rate));
    }
    return PoissonSampler(rate);
  }

  double rate() const { return rate_; }

  int64_t operator()(RandomSource& rng) const {
    if (rate_ == 0) return 0;
    return rate_ < kPtrsThreshold ? Inversion(rng) : Ptrs(rng);
  }

 private:
  explicit PoissonSampler(double rate) : rate_(rate) {
    exp_neg_rate_ = std::exp(-rate);
    if (rate >= kPtrsThreshold) {
      const double sqrt_rate = std::sqrt(rate);
      log_rate_ = std::log(rate);
      b_ = 0.931 + 2.53 * sqrt_rate;
      a_ = -0.059 + 0.02483 * b_;
      inv_alpha_ = 1.1239 + 1.1328 / (b_ - 3.4);
      v_r_ = 0.9277 - 3.6224 / (b_ - 2);
    }
  }

  int64_t Inversion(RandomSource& rng) const {
    const double u = rng.Uniform();
    double pmf = exp_neg_rate_;
    double cdf = pmf;
    int64_t k = 0;
    while (u >= cdf && pmf > 0) {
      ++k;
      pmf *= rate_ / static_cast<double>(k);
      cdf += pmf;
    }
    return k;
  }

  int64_t Ptrs(RandomSource& rng) const {
    while (true) {
      const double u = rng.Uniform() - 0.5;
      const double v = rng.Uniform();
      const double us = 0.5 - std::abs(u);
      const auto k = static_cast<int64_t>(
          std::floor((2 * a_ / us + b_) * u + rate_ + 0.43));
      if (us >= 0.07 && v <= v_r_) return k;
      if (k < 0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha_) - std::log(a_ / (us * us) + b_) <=
          -rate_ + static_cast<double>(k) * log_rate_ -
              internal::LogFactorial(k)) {
        return k;
      }
    }
  }

  double rate_;
  double exp_neg_rate_ = 0;
  double log_rate_ = 0;
  double a_ = 0;
  double b_ = 0;
  double inv_alpha_ = 0;
  double v_r_ = 0;
};

inline absl::StatusOr<int64_t> SamplePoisson(double rate, RandomSource& rng) {
  auto sampler = PoissonSampler::Create(rate);
  if (!sampler.ok()) return sampler.status();
  return (*sampler)(rng);
}

// Inverse-CDF sampler over a fixed distribution.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(const DiscreteDistribution& d)
      : cdf_(d.k()), uniform_(d.IsUniform()) {
    double acc = 0;
    for (size_t j = 0; j < d.k(); ++j) {
      acc += d[j];
      cdf_[j] = acc;
    }
    last_positive_ = 0;
    for (size_t j = 0; j < d.k(); ++j) {
      if (d[j] > 0) last_positive_ = j;
    }
  }

  size_t operator()(RandomSource& rng) const {
    if (uniform_) return static_cast<size_t>(rng.UniformInt(cdf_.size()));
    const double u = rng.Uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) return last_positive_;
    return static_cast<size_t>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
  bool uniform_;
  size_t last_positive_;
};

inline size_t SampleCategorical(const DiscreteDistribution& d,
                                RandomSource& rng) {
  return CategoricalSampler(d)(rng);
}

inline absl::StatusOr<double> TvDistance(const DiscreteDistribution& p,
                                         const DiscreteDistribution& q) {
  if (p.k() != q.k()) {
    return absl::InvalidArgumentError("TvDistance: domain sizes differ");
  }
  double sum = 0;
  for (size_t j = 0; j < p.k(); ++j) sum += std::abs(p[j] - q[j]);
  return 0.5 * sum;
}

inline absl::StatusOr<double> L2DistanceSq(const DiscreteDistribution& p,
                                           const DiscreteDistribution& q) {
  if (p.k() != q.k()) {
    return absl::InvalidArgumentError("L2DistanceSq: domain sizes differ");
  }
  double sum = 0;
  for (size_t j = 0; j < p.k(); ++j) {
    const double d = p[j] - q[j];
    sum += d * d;
  }
  return sum;
}

// The standard "far from uniform" alternative: odd symbols get
// (1 + 2 alpha') / k, even symbols (1 - 2 alpha') / k. Its total variation
// distance to uniform is exactly alpha'.
inline absl::StatusOr<DiscreteDistribution> MakeFarDistribution(
    size_t k, double alpha_prime) {
  if (k == 0 || k % 2 != 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("MakeFarDistribution: k must be even and positive, got ",
                     k));
  }
  if (!(alpha_prime > 0 && alpha_prime <= 0.5)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "MakeFarDistribution: alpha' must lie in (0, 1/2], got ",
        alpha_prime));
  }
  const double kd = static_cast<double>(k);
  std::vector<double> probs(k);
  for (size_t j = 0; j < k; ++j) {
    // Index j holds symbol j + 1.
    probs[j] = (j % 2 == 0 ? 1 + 2 * alpha_prime : 1 - 2 * alpha_prime) / kd;
  }
  return DiscreteDistribution::Create(std::move(probs));
}

}  // namespace sut

#endif  // SUT_PROBCORE_H_
