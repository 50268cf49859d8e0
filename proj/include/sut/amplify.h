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

// Privacy amplification by shuffling for the GHR randomiser, and the
// resulting shuffle protocol for uniformity testing.
//
// Shuffling n outputs of an eps_L-LDP randomiser is (eps, delta)-DP with
//
//   eps = log(1 + 8 (e^eps_L - 1)/(e^eps_L + 1)
//                   * (sqrt(e^eps_L log(4/delta) / n) + e^eps_L / n)),
//
// valid when eps_L <= log(n / (16 log(2/delta))). The protocol picks eps_L as
// the root of the simpler dominating expression
//
//   eps = log(1 + 16 e^{eps_L/2} (e^eps_L - 1)/(e^eps_L + 1)
//                   * sqrt(log(4/delta) / n)).

#ifndef SUT_AMPLIFY_H_
#define SUT_AMPLIFY_H_

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/cord.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "sut/common.h"
#include "sut/ghr.h"
#include "sut/privacy.h"
#include "sut/probcore.h"
#include "sut/status_macros.h"

namespace sut {

inline constexpr char kGateBoundPayload[] = "sut.gate_bound";

inline absl::Status AmplificationInvalidError(absl::string_view message,
                                              double gate_bound) {
  absl::Status status = absl::FailedPreconditionError(
      absl::StrCat("amplification invalid: ", message,
                   " (gate bound on eps_L: ", gate_bound, ")"));
  status.SetPayload(kGateBoundPayload,
                    absl::Cord(absl::StrCat(gate_bound)));
  return status;
}

inline std::optional<double> GateBoundFromStatus(const absl::Status& status) {
  const absl::optional<absl::Cord> payload =
      status.GetPayload(kGateBoundPayload);
  double value = 0;
  if (!payload || !absl::SimpleAtod(std::string(*payload), &value)) {
    return std::nullopt;
  }
  return value;
}

// log(n / (16 log(2/delta))): the largest eps_L the bound applies to.
inline double AmplificationGate(double n, double delta) {
  return std::log(n / (16 * std::log(2 / delta)));
}

namespace internal {

inline absl::Status ValidateAmplificationArgs(double n, double delta) {
  if (!(n >= 1) || !std::isfinite(n)) {
    return absl::InvalidArgumentError(
        absl::StrCat("number of users must be >= 1, got ", n));
  }
  if (!(delta > 0 && delta < 1)) {
    return absl::InvalidArgumentError(
        absl::StrCat("delta must lie in (0, 1), got ", delta));
  }
  return absl::OkStatus();
}

// Right-hand side of the eps_L choice equation.
inline double InversionRhs(double eps_l, double n, double delta) {
  return std::log1p(16 * std::exp(eps_l / 2) * std::tanh(eps_l / 2) *
                    std::sqrt(std::log(4 / delta) / n));
}

}  // namespace internal

inline absl::StatusOr<double> AmplifiedEpsilon(double eps_l, double n,
                                               double delta) {
  SUT_RETURN_IF_ERROR(internal::ValidateAmplificationArgs(n, delta));
  if (!(eps_l >= 0) || !std::isfinite(eps_l)) {
    return absl::InvalidArgumentError(
        absl::StrCat("eps_L must be finite and >= 0, got ", eps_l));
  }
  const double gate = AmplificationGate(n, delta);
  if (eps_l > gate) {
    return AmplificationInvalidError(
        absl::StrCat("eps_L = ", eps_l, " exceeds the validity gate"), gate);
  }
  const double e = std::exp(eps_l);
  // (e - 1)/(e + 1) = tanh(eps_L / 2).
  return std::log1p(8 * std::tanh(eps_l / 2) *
                    (std::sqrt(e * std::log(4 / delta) / n) + e / n));
}

// Unique positive root of the eps_L choice equation, by bisection over
// [1e-12, log n]. Verifies afterwards that the amplification bound applies
// and does not exceed eps_target.
inline absl::StatusOr<double> InvertAmplification(double eps_target, double n,
                                                  double delta) {
  SUT_RETURN_IF_ERROR(internal::ValidateAmplificationArgs(n, delta));
  if (!(eps_target > 0) || !std::isfinite(eps_target)) {
    return absl::InvalidArgumentError(
        absl::StrCat("target eps must be positive, got ", eps_target));
  }
  const double gate = AmplificationGate(n, delta);
  double lo = 1e-12;
  double hi = std::log(n);
  if (!(hi > lo) || internal::InversionRhs(hi, n, delta) < eps_target) {
    return AmplificationInvalidError(
        absl::StrCat("no eps_L in [1e-12, log n] reaches eps = ", eps_target,
                     " with n = ", n),
        gate);
  }
  if (internal::InversionRhs(lo, n, delta) > eps_target) {
    return AmplificationInvalidError(
        absl::StrCat("eps = ", eps_target, " is below the smallest reachable "
                                           "value"),
        gate);
  }
  for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (internal::InversionRhs(mid, n, delta) < eps_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double eps_l = 0.5 * (lo + hi);
  if (eps_l > gate) {
    return AmplificationInvalidError(
        absl::StrCat("n = ", n, " is too small: eps_L = ", eps_l,
                     " violates the validity gate"),
        gate);
  }
  SUT_ASSIGN_OR_RETURN(const double achieved,
                       AmplifiedEpsilon(eps_l, n, delta));
  if (achieved > eps_target) {
    return AmplificationInvalidError(
        absl::StrCat("amplified eps ", achieved, " exceeds target ",
                     eps_target),
        gate);
  }
  return eps_l;
}

// (eps, 4 delta^gamma) for every honest fraction gamma.
inline RobustProfile RobustProfileP2(double eps, double delta) {
  return RobustProfile(eps, delta);
}

// Amplified eps when only gamma n users are honest, with
// delta(gamma) = 4^{1 - gamma} delta^gamma.
inline absl::StatusOr<double> AmplifiedEpsilonAtHonestFraction(
    double eps_l, double n, double delta, double gamma) {
  if (!(gamma > 0 && gamma <= 1)) {
    return absl::InvalidArgumentError(
        absl::StrCat("honest fraction gamma must lie in (0, 1], got ", gamma));
  }
  const double delta_gamma =
      std::pow(4.0, 1 - gamma) * std::pow(delta, gamma);
  return AmplifiedEpsilon(eps_l, gamma * n, delta_gamma);
}

// Everything a shuffle-protocol round needs, computed once per
// configuration.
struct Protocol2Setup {
  double eps = 0;
  double delta = 0;
  double n = 0;
  double eps_l = 0;
  double realized_eps_bound = 0;
  GhrAnalyserParams analyser;

  static absl::StatusOr<Protocol2Setup> Create(size_t k, double alpha,
                                               double eps, double delta,
                                               double n) {
    SUT_ASSIGN_OR_RETURN(const double eps_l,
                         InvertAmplification(eps, n, delta));
    SUT_ASSIGN_OR_RETURN(const double bound,
                         AmplifiedEpsilon(eps_l, n, delta));
    SUT_ASSIGN_OR_RETURN(const GhrScheme scheme, GhrScheme::Create(k, eps_l));
    SUT_ASSIGN_OR_RETURN(GhrAnalyserParams analyser,
                         GhrAnalyserParams::Create(scheme, alpha));
    return Protocol2Setup{eps, delta, n, eps_l, bound, std::move(analyser)};
  }
};

struct Protocol2Outcome {
  Verdict verdict = Verdict::kUniform;
  double statistic = 0;
  int64_t n_users = 0;
  double eps_l = 0;
  double realized_eps_bound = 0;
};

inline absl::StatusOr<Protocol2Outcome> RunProtocol2(
    const CategoricalSampler& p, const Protocol2Setup& setup,
    RandomSource& rng) {
  SUT_ASSIGN_OR_RETURN(
      const GhrRoundOutcome round,
      RunGhrRound(p, setup.analyser, setup.n, /*shuffle=*/true, rng));
  return Protocol2Outcome{round.verdict, round.statistic, round.n_users,
                          setup.eps_l, setup.realized_eps_bound};
}

inline absl::StatusOr<Protocol2Outcome> RunProtocol2(
    const DiscreteDistribution& p, size_t k, double alpha, double eps,
    double delta, double n, RandomSource& rng) {
  if (p.k() != k) {
    return absl::InvalidArgumentError("RunProtocol2: p is not over [k]");
  }
  SUT_ASSIGN_OR_RETURN(const Protocol2Setup setup,
                       Protocol2Setup::Create(k, alpha, eps, delta, n));
  return RunProtocol2(CategoricalSampler(p), setup, rng);
}

namespace internal {

inline bool Protocol2SampleSizeOk(int64_t n, size_t k, double alpha,
                                  double eps, double delta,
                                  double safety_const) {
  const auto eps_l =
      InvertAmplification(eps, static_cast<double>(n), delta);
  if (!eps_l.ok()) return false;
  const auto needed = RequiredNLdp(k, alpha, *eps_l, safety_const);
  return needed.ok() && n >= *needed;
}

}  // namespace internal

// Smallest n for which the amplified eps_L(n) is valid and the LDP tester at
// eps_L(n) needs at most n samples. Doubling, then bisection.
inline absl::StatusOr<int64_t> RequiredNProtocol2(
    size_t k, double alpha, double eps, double delta,
    double safety_const = kDefaultSafetyConst) {
  if (k < 2 || !(alpha > 0 && alpha <= 1) || !(eps > 0) ||
      !(delta > 0 && delta < 1) || !(safety_const > 0)) {
    return absl::InvalidArgumentError(
        "RequiredNProtocol2: need k >= 2, alpha in (0, 1], eps > 0, "
        "delta in (0, 1), safety_const > 0");
  }
  constexpr int64_t kCap = int64_t{1} << 50;
  int64_t lo = 1;
  int64_t hi = 2;
  while (!internal::Protocol2SampleSizeOk(hi, k, alpha, eps, delta,
                                          safety_const)) {
    lo = hi;
    hi *= 2;
    if (hi > kCap) {
      return absl::OutOfRangeError(
          "RequiredNProtocol2: no sample size below 2^50 works");
    }
  }
  while (hi - lo > 1) {
    const int64_t mid = lo + (hi - lo) / 2;
    if (internal::Protocol2SampleSizeOk(mid, k, alpha, eps, delta,
                                        safety_const)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace sut

#endif  // SUT_AMPLIFY_H_
