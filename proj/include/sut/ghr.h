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

// Generalised Hadamard Response (GHR) local randomiser and the l2 identity
// tester built on top of it.
//
// For input alphabet [k] and local privacy eps_L the scheme picks
//
//   a = 2^floor(log2 min(e^eps_L, 2k)),  b = 2^ceil(log2(k/a + 1)),
//   K = a b,  s = b / 2,
//
// and maps each input x to a non-constant row of the (a, b)-reduced Hadamard
// matrix: a block-diagonal arrangement of a Sylvester matrices H_b with -1
// everywhere off the diagonal blocks. The +1 entries of that row form the
// signal set C_x (|C_x| = s), and
//
//   P[R(x) = y] = ((e^eps_L - 1) 1{y in C_x} + 1) / (s e^eps_L + K - s).
//
// Entry (r, c) of H_b is (-1)^popcount(r & c), so membership is a parity test
// and no matrix is ever stored.

#ifndef SUT_GHR_H_
#define SUT_GHR_H_

#include <bit>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "sut/common.h"
#include "sut/probcore.h"
#include "sut/status_macros.h"

namespace sut {

inline constexpr double kDefaultSafetyConst = 8.0;

class GhrScheme {
 public:
  struct RowIndex {
    size_t copy;  // which H_b block, in [0, a)
    size_t row;   // row inside H_b, in [1, b); row 0 is all-ones
  };

  static absl::StatusOr<GhrScheme> Create(size_t k, double eps_l) {
    if (k < 2) {
      return absl::InvalidArgumentError(
          absl::StrCat("GHR needs k >= 2, got ", k));
    }
    if (!(eps_l > 0) || !std::isfinite(eps_l)) {
      return absl::InvalidArgumentError(
          absl::StrCat("GHR needs finite eps_L > 0, got ", eps_l));
    }
    return GhrScheme(k, eps_l);
  }

  // Accepts eps_L = 0 (the signal term vanishes). Test hook only.
  static GhrScheme CreateUncheckedForTesting(size_t k, double eps_l) {
    return GhrScheme(k, eps_l);
  }

  size_t k() const { return k_; }
  double eps_l() const { return eps_l_; }
  size_t a() const { return a_; }
  size_t b() const { return b_; }
  size_t output_size() const { return a_ * b_; }
  size_t s() const { return b_ / 2; }
  double exp_eps() const { return exp_eps_; }
  double expm1_eps() const { return expm1_eps_; }

  // Bits per message: ceil(log2 K).
  int message_bits() const {
    return std::bit_width(output_size() - 1);
  }

  // Canonical injection: inputs fill copies in order, rows 1..b-1 each.
  RowIndex RowOf(size_t x) const {
    return {x / (b_ - 1), 1 + x % (b_ - 1)};
  }

  // y in C_x, without range checks.
  bool Contains(size_t x, size_t y) const {
    const RowIndex r = RowOf(x);
    if (y / b_ != r.copy) return false;
    return std::popcount(r.row & (y % b_)) % 2 == 0;
  }

  // Denominator s e^eps + K - s of the transition probabilities.
  double Normalizer() const {
    const double s_d = static_cast<double>(s());
    return s_d * exp_eps_ + static_cast<double>(output_size()) - s_d;
  }

  double TransitionProbability(size_t x, size_t y) const {
    return ((Contains(x, y) ? expm1_eps_ : 0.0) + 1.0) / Normalizer();
  }

  // Two-stage draw: land in C_x with probability s e^eps / normalizer, then
  // pick uniformly inside or outside C_x by rejection.
  size_t Randomise(size_t x, RandomSource& rng) const {
    const RowIndex r = RowOf(x);
    if (rng.Uniform() < in_set_probability_) {
      while (true) {
        const auto c = static_cast<size_t>(rng.UniformInt(b_));
        if (std::popcount(r.row & c) % 2 == 0) return r.copy * b_ + c;
      }
    }
    while (true) {
      const auto y = static_cast<size_t>(rng.UniformInt(output_size()));
      if (!Contains(x, y)) return y;
    }
  }

 private:
  GhrScheme(size_t k, double eps_l)
      : k_(k),
        eps_l_(eps_l),
        exp_eps_(std::exp(eps_l)),
        expm1_eps_(std::expm1(eps_l)) {
    // log2 min(e^eps, 2k), floored with a small slack so that eps = ln 2
    // gives exactly 1 despite rounding.
    const double log2_cap = std::min(eps_l / std::numbers::ln2,
                                     std::log2(2.0 * static_cast<double>(k)));
    a_ = size_t{1} << static_cast<int>(std::floor(log2_cap + 1e-9));
    // Smallest power of two b with b >= k/a + 1, i.e. a (b - 1) >= k.
    b_ = 2;
    while (a_ * (b_ - 1) < k_) b_ *= 2;
    const double s_d = static_cast<double>(s());
    in_set_probability_ = s_d * exp_eps_ / Normalizer();
  }

  size_t k_;
  double eps_l_;
  double exp_eps_;
  double expm1_eps_;
  size_t a_ = 1;
  size_t b_ = 2;
  double in_set_probability_ = 0;
};

inline absl::StatusOr<GhrScheme> GhrParams(size_t k, double eps_l) {
  return GhrScheme::Create(k, eps_l);
}

inline absl::StatusOr<bool> RowMembership(const GhrScheme& scheme, size_t x,
                                          size_t y) {
  if (x >= scheme.k() || y >= scheme.output_size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "RowMembership: (x, y) = (", x + 1, ", ", y + 1, ") out of range"));
  }
  return scheme.Contains(x, y);
}

inline absl::StatusOr<size_t> GhrRandomise(const GhrScheme& scheme, size_t x,
                                           RandomSource& rng) {
  if (x >= scheme.k()) {
    return absl::InvalidArgumentError("GhrRandomise: input outside [k]");
  }
  return scheme.Randomise(x, rng);
}

// Phi(p)(y) = sum_x p(x) P[R(x) = y].
inline DiscreteDistribution InducedDistribution(const GhrScheme& scheme,
                                                const DiscreteDistribution& p) {
  assert(p.k() == scheme.k());
  const size_t b = scheme.b();
  std::vector<double> signal(scheme.output_size(), 0.0);
  for (size_t x = 0; x < scheme.k(); ++x) {
    if (p[x] == 0) continue;
    const auto r = scheme.RowOf(x);
    for (size_t c = 0; c < b; ++c) {
      if (std::popcount(r.row & c) % 2 == 0) signal[r.copy * b + c] += p[x];
    }
  }
  const double norm = scheme.Normalizer();
  for (double& v : signal) v = (scheme.expm1_eps() * v + 1.0) / norm;
  return DiscreteDistribution::Create(std::move(signal)).value();
}

struct GhrAnalyserParams {
  GhrScheme scheme;
  double alpha;
  // Squared l2 rejection radius; distinct from the honest-user fraction.
  double gamma_l2_sq;
  DiscreteDistribution q_star;

  static absl::StatusOr<GhrAnalyserParams> Create(const GhrScheme& scheme,
                                                  double alpha) {
    if (!(alpha > 0 && alpha <= 1)) {
      return absl::InvalidArgumentError(
          absl::StrCat("alpha must lie in (0, 1], got ", alpha));
    }
    const double s = static_cast<double>(scheme.s());
    const double k = static_cast<double>(scheme.k());
    const double big_k = static_cast<double>(scheme.output_size());
    const double ratio =
        scheme.expm1_eps() / (scheme.exp_eps() + big_k / s - 1);
    return GhrAnalyserParams{
        scheme, alpha, 2 * alpha * alpha / (s * k) * ratio * ratio,
        InducedDistribution(scheme, DiscreteDistribution::Uniform(scheme.k()))};
  }
};

enum class L2Verdict { kMatch, kFar };

struct L2TestResult {
  L2Verdict verdict = L2Verdict::kMatch;
  double statistic = 0;
  double threshold = 0;
};

// T = sum_y ((M_y - n q*_y)^2 - M_y), rejecting when T > n^2 gamma^2 / 2.
// Under Poissonised counts M_y ~ Poi(n q_y), E[T] = n^2 ||q - q*||_2^2.
inline L2TestResult L2IdentityTest(const Histogram& counts, double n,
                                   const DiscreteDistribution& q_star,
                                   double gamma_l2_sq) {
  assert(counts.bins() == q_star.k());
  double t = 0;
  for (size_t y = 0; y < q_star.k(); ++y) {
    const double m = static_cast<double>(counts[y]);
    const double d = m - n * q_star[y];
    t += d * d - m;
  }
  L2TestResult result;
  result.statistic = t;
  result.threshold = n * n * gamma_l2_sq / 2;
  result.verdict = t > result.threshold ? L2Verdict::kFar : L2Verdict::kMatch;
  return result;
}

struct GhrAnalysis {
  Verdict verdict = Verdict::kUniform;
  double statistic = 0;
  double threshold = 0;
};

inline absl::StatusOr<GhrAnalysis> AnalyseGhr(std::span<const uint32_t> messages,
                                              const GhrAnalyserParams& params,
                                              double n) {
  const size_t big_k = params.scheme.output_size();
  Histogram counts(big_k);
  for (uint32_t y : messages) {
    if (y >= big_k) {
      return absl::InvalidArgumentError(absl::StrCat(
          "malformed transcript: symbol ", y + 1, " outside [", big_k, "]"));
    }
    counts.Add(y);
  }
  const L2TestResult l2 =
      L2IdentityTest(counts, n, params.q_star, params.gamma_l2_sq);
  return GhrAnalysis{
      l2.verdict == L2Verdict::kFar ? Verdict::kNotUniform : Verdict::kUniform,
      l2.statistic, l2.threshold};
}

// safety_const * (k^1.5 / (alpha^2 (e^eps - 1)^2) + k^1.5 / (alpha^2 e^eps)
//                 + k^0.5 / alpha^2), rounded up.
inline absl::StatusOr<int64_t> RequiredNLdp(size_t k, double alpha,
                                            double eps_l,
                                            double safety_const =
                                                kDefaultSafetyConst) {
  if (k < 1 || !(alpha > 0) || !(eps_l > 0) || !(safety_const > 0)) {
    return absl::InvalidArgumentError(
        "RequiredNLdp: parameters must be positive");
  }
  const double kd = static_cast<double>(k);
  const double a2 = alpha * alpha;
  const double em1 = std::expm1(eps_l);
  const double value =
      safety_const * (std::pow(kd, 1.5) / (a2 * em1 * em1) +
                      std::pow(kd, 1.5) / (a2 * std::exp(eps_l)) +
                      std::sqrt(kd) / a2);
  if (!std::isfinite(value) || value > 9e15) {
    return absl::OutOfRangeError("RequiredNLdp: sample size overflows");
  }
  return static_cast<int64_t>(std::ceil(value));
}

struct GhrRoundOutcome {
  Verdict verdict = Verdict::kUniform;
  double statistic = 0;
  int64_t n_users = 0;
};

// One Poissonised round of the GHR tester: N ~ Poi(n) users with x ~ p send
// one GHR message each; the messages are optionally shuffled and analysed.
inline absl::StatusOr<GhrRoundOutcome> RunGhrRound(
    const CategoricalSampler& p, const GhrAnalyserParams& params, double n,
    bool shuffle, RandomSource& rng) {
  SUT_ASSIGN_OR_RETURN(const PoissonSampler users, PoissonSampler::Create(n));
  const int64_t n_users = users(rng);
  std::vector<uint32_t> messages(static_cast<size_t>(n_users));
  for (uint32_t& m : messages) {
    m = static_cast<uint32_t>(params.scheme.Randomise(p(rng), rng));
  }
  if (shuffle) ShuffleInPlace(std::span<uint32_t>(messages), rng);
  SUT_ASSIGN_OR_RETURN(const GhrAnalysis analysis,
                       AnalyseGhr(messages, params, n));
  return GhrRoundOutcome{analysis.verdict, analysis.statistic, n_users};
}

}  // namespace sut

#endif  // SUT_GHR_H_
