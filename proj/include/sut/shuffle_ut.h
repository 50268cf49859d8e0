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

// The Poisson-noise shuffle protocol for uniformity testing.
//
// Every user holding x in [k] sends, for each j in [k], one informative
// message (j, 1{x = j}) followed by Poi(lambda / N) noise messages (j, b) with
// fair bits b. The shuffler permutes the union of all messages. The analyser
// counts the (j, 1) messages N_j and rejects uniformity when
//
//   Z = (k / n) * sum_j ((N_j - mu)^2 - N_j),   mu = n / k + lambda / 2,
//
// exceeds tau = 2 n alpha^2. With N ~ Poi(n), each N_j is Poi(n p_j + lambda/2)
// and the N_j are independent, which is what the moment oracles below use.

#ifndef SUT_SHUFFLE_UT_H_
#define SUT_SHUFFLE_UT_H_

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "sut/common.h"
#include "sut/privacy.h"
#include "sut/probcore.h"
#include "sut/status_macros.h"

namespace sut {

// Noise rate that makes each per-symbol count (eps, 2 delta)-DP:
// 64 log(2/delta) / (1 - e^-eps)^2.
inline absl::StatusOr<double> CalibrateLambda(double eps, double delta) {
  if (!(eps > 0) || !std::isfinite(eps)) {
    return absl::InvalidArgumentError(
        absl::StrCat("eps must be positive and finite, got ", eps));
  }
  if (!(delta > 0 && delta < 1)) {
    return absl::InvalidArgumentError(
        absl::StrCat("delta must lie in (0, 1), got ", delta));
  }
  const double gap = -std::expm1(-eps);
  return 64 * std::log(2 / delta) / (gap * gap);
}

struct UtParams {
  size_t k = 0;
  double n = 0;
  double alpha = 0;
  // NaN when lambda was set directly.
  double eps = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double lambda = 0;
  double mu = 0;
  double tau = 0;

  static absl::StatusOr<UtParams> Create(size_t k, double n, double alpha,
                                         double eps, double delta) {
    SUT_ASSIGN_OR_RETURN(const double lambda, CalibrateLambda(eps, delta));
    SUT_ASSIGN_OR_RETURN(UtParams params, WithLambda(k, n, alpha, lambda));
    params.eps = eps;
    params.delta = delta;
    return params;
  }

  // Bypasses calibration; used for moment experiments at a fixed noise rate.
  static absl::StatusOr<UtParams> WithLambda(size_t k, double n, double alpha,
                                             double lambda) {
    if (k < 1) return absl::InvalidArgumentError("k must be >= 1");
    if (!(n > 0) || !std::isfinite(n)) {
      return absl::InvalidArgumentError(
          absl::StrCat("n must be positive and finite, got ", n));
    }
    if (!(alpha > 0 && alpha <= 1)) {
      return absl::InvalidArgumentError(
          absl::StrCat("alpha must lie in (0, 1], got ", alpha));
    }
    if (!(lambda >= 0) || !std::isfinite(lambda)) {
      return absl::InvalidArgumentError(
          absl::StrCat("lambda must be finite and >= 0, got ", lambda));
    }
    UtParams params;
    params.k = k;
    params.n = n;
    params.alpha = alpha;
    params.lambda = lambda;
    params.mu = n / static_cast<double>(k) + lambda / 2;
    params.tau = 2 * n * alpha * alpha;
    return params;
  }
};

struct MessagePair {
  uint32_t index = 0;  // 0-based symbol
  uint8_t bit = 0;

  friend auto operator<=>(const MessagePair&, const MessagePair&) = default;
};

struct UtTranscript {
  std::vector<MessagePair> messages;
  int64_t n_users = 0;
};

// Randomiser for one round, with the noise rate lambda / N fixed once the
// number of users N is known.
class UtRandomiser {
 public:
  static absl::StatusOr<UtRandomiser> Create(const UtParams& params,
                                             int64_t n_users) {
    if (n_users < 1) {
      return absl::InvalidArgumentError(
          "randomiser needs at least one user (N = 0 must be handled by the "
          "caller)");
    }
    SUT_ASSIGN_OR_RETURN(
        PoissonSampler noise,
        PoissonSampler::Create(params.lambda / static_cast<double>(n_users)));
    return UtRandomiser(params.k, noise);
  }

  // Appends the messages of a user holding `x` to `out`.
  void Append(size_t x, RandomSource& rng,
              std::vector<MessagePair>& out) const {
    for (size_t j = 0; j < k_; ++j) {
      const auto index = static_cast<uint32_t>(j);
      out.push_back({index, static_cast<uint8_t>(x == j)});
      for (int64_t t = noise_(rng); t > 0; --t) {
        out.push_back({index, static_cast<uint8_t>(rng.FairBit())});
      }
    }
  }

 private:
  UtRandomiser(size_t k, PoissonSampler noise) : k_(k), noise_(noise) {}

  size_t k_;
  PoissonSampler noise_;
};

inline absl::StatusOr<std::vector<MessagePair>> RandomiseUt(
    size_t x, const UtParams& params, int64_t n_users, RandomSource& rng) {
  if (x >= params.k) {
    return absl::InvalidArgumentError("RandomiseUt: input outside [k]");
  }
  SUT_ASSIGN_OR_RETURN(const UtRandomiser randomiser,
                       UtRandomiser::Create(params, n_users));
  std::vector<MessagePair> out;
  randomiser.Append(x, rng, out);
  return out;
}

// Concatenates the users' tuples and returns a uniform permutation of them.
inline UtTranscript Shuffle(
    const std::vector<std::vector<MessagePair>>& tuples, RandomSource& rng) {
  UtTranscript t;
  t.n_users = static_cast<int64_t>(tuples.size());
  for (const auto& tuple : tuples) {
    t.messages.insert(t.messages.end(), tuple.begin(), tuple.end());
  }
  ShuffleInPlace(std::span<MessagePair>(t.messages), rng);
  return t;
}

// Z = (k/n) * sum_j ((N_j - mu)^2 - N_j) over a histogram of (j, 1) messages.
inline double StatisticZ(const Histogram& counts_n1, const UtParams& params) {
  assert(counts_n1.bins() == params.k);
  double sum = 0;
  for (size_t j = 0; j < params.k; ++j) {
    const double c = static_cast<double>(counts_n1[j]);
    const double d = c - params.mu;
    sum += d * d - c;
  }
  return static_cast<double>(params.k) / params.n * sum;
}

struct UtAnalysis {
  Verdict verdict = Verdict::kUniform;
  double z = 0;
  // l_j = (number of index-j messages) - N; Poi(lambda) under the protocol.
  std::vector<int64_t> noise_scales;
  Histogram ones{0};
};

inline absl::StatusOr<UtAnalysis> AnalyseUt(const UtTranscript& t,
                                            const UtParams& params) {
  Histogram ones(params.k);
  std::vector<int64_t> per_index(params.k, 0);
  for (const MessagePair& m : t.messages) {
    if (m.index >= params.k || m.bit > 1) {
      return absl::InvalidArgumentError(absl::StrCat(
          "malformed transcript: message (", m.index + 1, ", ",
          static_cast<int>(m.bit), ") outside [", params.k, "] x {0,1}"));
    }
    ++per_index[m.index];
    if (m.bit == 1) ones.Add(m.index);
  }
  UtAnalysis result;
  result.noise_scales.resize(params.k);
  for (size_t j = 0; j < params.k; ++j) {
    result.noise_scales[j] = per_index[j] - t.n_users;
  }
  result.z = StatisticZ(ones, params);
  result.verdict =
      result.z > params.tau ? Verdict::kNotUniform : Verdict::kUniform;
  result.ones = std::move(ones);
  return result;
}

// E[Z] = n k ||p - U||_2^2.
inline double ExpectedZ(const DiscreteDistribution& p, double n, size_t k) {
  assert(p.k() == k);
  const double kd = static_cast<double>(k);
  double l2 = 0;
  for (size_t j = 0; j < k; ++j) {
    const double d = p[j] - 1 / kd;
    l2 += d * d;
  }
  return n * kd * l2;
}

// Var[Z] = k^2 sum_j [2 (p_j + lambda/2n)^2 + 4n (p_j + lambda/2n)(p_j - 1/k)^2].
inline double VarZExact(const DiscreteDistribution& p,
                        const UtParams& params) {
  assert(p.k() == params.k);
  const double kd = static_cast<double>(params.k);
  const double shift = params.lambda / (2 * params.n);
  double sum = 0;
  for (size_t j = 0; j < params.k; ++j) {
    const double r = p[j] + shift;
    const double d = p[j] - 1 / kd;
    sum += 2 * r * r + 4 * params.n * r * d * d;
  }
  return kd * kd * sum;
}

// The Chebyshev sample-size constant that makes both error sides <= 1/3.
inline constexpr double kProtocol1SampleConstant = 40.0;

namespace internal {

inline bool SatisfiesProtocol1Bound(double n, size_t k, double alpha,
                                    double lambda) {
  const double kd = static_cast<double>(k);
  return n >= kProtocol1SampleConstant * std::pow(kd, 0.75) *
                  std::sqrt(n / kd + lambda / 2) / alpha;
}

}  // namespace internal

// Smallest integer n with n >= 40 k^{3/4} sqrt(n/k + lambda/2) / alpha, for a
// given noise rate.
inline absl::StatusOr<int64_t> RequiredNProtocol1WithLambda(size_t k,
                                                            double alpha,
                                                            double lambda) {
  if (k < 1 || !(alpha > 0 && alpha <= 1) || !(lambda >= 0)) {
    return absl::InvalidArgumentError(
        "RequiredNProtocol1: need k >= 1, alpha in (0, 1], lambda >= 0");
  }
  const double kd = static_cast<double>(k);
  const double c = kProtocol1SampleConstant * std::pow(kd, 0.75) / alpha;
  const double c2 = c * c;
  // n^2 - c^2 (n/k + lambda/2) >= 0.
  const double lin = c2 / kd;
  const double root = (lin + std::sqrt(lin * lin + 2 * c2 * lambda)) / 2;
  if (!std::isfinite(root) || root > 9e15) {
    return absl::OutOfRangeError(
        "RequiredNProtocol1: no finite sample size satisfies the bound");
  }
  auto n = static_cast<int64_t>(std::ceil(root));
  if (n < 1) n = 1;
  while (n > 1 && internal::SatisfiesProtocol1Bound(
                      static_cast<double>(n - 1), k, alpha, lambda)) {
    --n;
  }
  while (!internal::SatisfiesProtocol1Bound(static_cast<double>(n), k, alpha,
                                            lambda)) {
    ++n;
  }
  return n;
}

inline absl::StatusOr<int64_t> RequiredNProtocol1(size_t k, double alpha,
                                                  double eps, double delta) {
  SUT_ASSIGN_OR_RETURN(const double lambda, CalibrateLambda(eps, delta));
  return RequiredNProtocol1WithLambda(k, alpha, lambda);
}

// (2 eps, 4 delta^gamma) for every honest fraction gamma.
inline RobustProfile RobustProfileP1(double eps, double delta) {
  return RobustProfile(2 * eps, delta);
}

struct Protocol1Outcome {
  Verdict verdict = Verdict::kUniform;
  double z = 0;
  int64_t n_users = 0;
};

// One full Poissonised execution: N ~ Poi(n) users with x ~ p, randomisers,
// shuffler, analyser. N = 0 yields an empty transcript, analysed as is.
inline absl::StatusOr<Protocol1Outcome> RunProtocol1(
    const CategoricalSampler& p, const UtParams& params, RandomSource& rng) {
  SUT_ASSIGN_OR_RETURN(const PoissonSampler users,
                       PoissonSampler::Create(params.n));
  UtTranscript t;
  t.n_users = users(rng);
  if (t.n_users > 0) {
    SUT_ASSIGN_OR_RETURN(const UtRandomiser randomiser,
                         UtRandomiser::Create(params, t.n_users));
    t.messages.reserve(static_cast<size_t>(t.n_users) * params.k +
                       static_cast<size_t>(params.k * params.lambda * 1.1) +
                       64);
    for (int64_t u = 0; u < t.n_users; ++u) {
      randomiser.Append(p(rng), rng, t.messages);
    }
    ShuffleInPlace(std::span<MessagePair>(t.messages), rng);
  }
  SUT_ASSIGN_OR_RETURN(const UtAnalysis analysis, AnalyseUt(t, params));
  return Protocol1Outcome{analysis.verdict, analysis.z, t.n_users};
}

}  // namespace sut

#endif  // SUT_SHUFFLE_UT_H_
