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

#include "sut/ghr.h"

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace sut {
namespace {

using ::testing::HasSubstr;

const double kLn2 = std::numbers::ln2;
const std::vector<double> kEpsGrid = {0.5, std::numbers::ln2, 2.0, 5.0};

// Sylvester's recursion H_{2m} = [[H, H], [H, -H]], starting from H_1 = [1].
std::vector<std::vector<int>> Sylvester(size_t b) {
  std::vector<std::vector<int>> h = {{1}};
  while (h.size() < b) {
    const size_t m = h.size();
    std::vector<std::vector<int>> next(2 * m, std::vector<int>(2 * m));
    for (size_t r = 0; r < m; ++r) {
      for (size_t c = 0; c < m; ++c) {
        next[r][c] = h[r][c];
        next[r][c + m] = h[r][c];
        next[r + m][c] = h[r][c];
        next[r + m][c + m] = -h[r][c];
      }
    }
    h = std::move(next);
  }
  return h;
}

// The (a, b)-reduced matrix: H_b blocks on the diagonal, -1 elsewhere.
std::vector<std::vector<int>> ReducedHadamard(size_t a, size_t b) {
  const auto h = Sylvester(b);
  std::vector<std::vector<int>> m(a * b, std::vector<int>(a * b, -1));
  for (size_t i = 0; i < a; ++i) {
    for (size_t r = 0; r < b; ++r) {
      for (size_t c = 0; c < b; ++c) m[i * b + r][i * b + c] = h[r][c];
    }
  }
  return m;
}

struct Expected {
  size_t a, b, big_k, s;
};

void ExpectScheme(size_t k, double eps, Expected e) {
  auto scheme = GhrParams(k, eps);
  ASSERT_TRUE(scheme.ok());
  EXPECT_EQ(scheme->a(), e.a);
  EXPECT_EQ(scheme->b(), e.b);
  EXPECT_EQ(scheme->output_size(), e.big_k);
  EXPECT_EQ(scheme->s(), e.s);
}

TEST(GhrParamsTest, ReferenceSchemes) {
  ExpectScheme(6, kLn2, {2, 4, 8, 2});
  ExpectScheme(2, std::log(100.0), {4, 2, 8, 1});
  ExpectScheme(4, 0.1, {1, 8, 8, 4});
}

// Independent evaluation of the defining formulas.
TEST(GhrParamsTest, MatchesDefinitionsAndSizeBounds) {
  for (size_t k = 2; k <= 200; ++k) {
    for (double eps : {0.05, 0.5, kLn2, 1.0, 2.0, 3.3, 5.0, 9.0}) {
      const GhrScheme s = *GhrParams(k, eps);
      const double m = std::min(std::exp(eps), 2.0 * k);
      size_t a = 1;
      while (2.0 * a <= m * (1 + 1e-12)) a *= 2;
      size_t b = 1;
      while (static_cast<double>(b) < static_cast<double>(k) / a + 1) b *= 2;
      EXPECT_EQ(s.a(), a) << k << " " << eps;
      EXPECT_EQ(s.b(), b) << k << " " << eps;
      EXPECT_GE(s.s(), 1u);
      EXPECT_LE(s.output_size(), 6 * k);
      EXPECT_GE(s.output_size(), k + s.a());
      EXPECT_EQ(s.message_bits(),
                static_cast<int>(std::ceil(std::log2(s.output_size()))));
    }
  }
}

TEST(GhrParamsTest, RejectsBadInput) {
  EXPECT_EQ(GhrParams(1, 1).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(GhrParams(4, 0).ok());
  EXPECT_FALSE(GhrParams(4, -1).ok());
  EXPECT_FALSE(GhrParams(4, NAN).ok());
}

TEST(RowMapTest, InjectiveAndSkipsAllOnesRow) {
  for (size_t k = 2; k <= 64; ++k) {
    for (double eps : kEpsGrid) {
      const GhrScheme s = *GhrParams(k, eps);
      std::set<std::pair<size_t, size_t>> seen;
      for (size_t x = 0; x < k; ++x) {
        const auto r = s.RowOf(x);
        EXPECT_LT(r.copy, s.a());
        EXPECT_GE(r.row, 1u);
        EXPECT_LT(r.row, s.b());
        EXPECT_TRUE(seen.emplace(r.copy, r.row).second);
      }
    }
  }
}

TEST(RowMembershipTest, MatchesSylvesterOracle) {
  for (size_t k = 2; k <= 32; ++k) {
    for (double eps : kEpsGrid) {
      const GhrScheme s = *GhrParams(k, eps);
      const auto m = ReducedHadamard(s.a(), s.b());
      for (size_t x = 0; x < k; ++x) {
        const auto r = s.RowOf(x);
        const size_t matrix_row = r.copy * s.b() + r.row;
        for (size_t y = 0; y < s.output_size(); ++y) {
          ASSERT_EQ(*RowMembership(s, x, y), m[matrix_row][y] == 1)
              << k << " " << eps << " " << x << " " << y;
        }
      }
    }
  }
}

TEST(RowMembershipTest, HTwoBlocks) {
  // k = 2, e^eps = 4: a = 4 copies of H_2, whose row 1 is (1, -1).
  const GhrScheme s = *GhrParams(2, std::log(4.0));
  ASSERT_EQ(s.b(), 2u);
  for (size_t x = 0; x < 2; ++x) {
    for (size_t y = 0; y < s.output_size(); ++y) {
      EXPECT_EQ(*RowMembership(s, x, y), y == 2 * x) << x << " " << y;
    }
  }
}

TEST(RowMembershipTest, SingleCopy) {
  const GhrScheme s = *GhrParams(2, 0.01);
  EXPECT_EQ(s.a(), 1u);
  // Row 1 of H_4 is (1, -1, 1, -1).
  EXPECT_TRUE(*RowMembership(s, 0, 0));
  EXPECT_FALSE(*RowMembership(s, 0, 1));
  EXPECT_TRUE(*RowMembership(s, 0, 2));
  EXPECT_FALSE(*RowMembership(s, 0, 3));
}

TEST(RowMembershipTest, OutOfRange) {
  const GhrScheme s = *GhrParams(6, kLn2);
  EXPECT_EQ(RowMembership(s, 6, 0).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(RowMembership(s, 0, 8).ok());
}

TEST(RowMembershipTest, DifferentCopyIsNeverMember) {
  const GhrScheme s = *GhrParams(12, 2.0);
  ASSERT_GT(s.a(), 1u);
  for (size_t x = 0; x < 12; ++x) {
    const size_t copy = s.RowOf(x).copy;
    for (size_t y = 0; y < s.output_size(); ++y) {
      if (y / s.b() != copy) EXPECT_FALSE(s.Contains(x, y));
    }
  }
}

TEST(SignalSetTest, SizesAndIntersections) {
  for (size_t k = 2; k <= 32; ++k) {
    for (double eps : kEpsGrid) {
      const GhrScheme s = *GhrParams(k, eps);
      const size_t big_k = s.output_size();
      for (size_t x = 0; x < k; ++x) {
        size_t size = 0;
        for (size_t y = 0; y < big_k; ++y) size += s.Contains(x, y);
        EXPECT_EQ(size, s.s());
        for (size_t x2 = x + 1; x2 < k; ++x2) {
          size_t inter = 0;
          for (size_t y = 0; y < big_k; ++y) {
            inter += s.Contains(x, y) && s.Contains(x2, y);
          }
          const bool same_copy = s.RowOf(x).copy == s.RowOf(x2).copy;
          EXPECT_EQ(inter, same_copy ? s.s() / 2 : 0u)
              << k << " " << eps << " " << x << " " << x2;
        }
      }
    }
  }
}

TEST(TransitionTest, RowsSumToOneAndRatioIsExact) {
  for (size_t k = 2; k <= 32; ++k) {
    for (double eps : kEpsGrid) {
      const GhrScheme s = *GhrParams(k, eps);
      double worst = 0;
      for (size_t y = 0; y < s.output_size(); ++y) {
        double lo = INFINITY;
        double hi = 0;
        for (size_t x = 0; x < k; ++x) {
          lo = std::min(lo, s.TransitionProbability(x, y));
          hi = std::max(hi, s.TransitionProbability(x, y));
        }
        worst = std::max(worst, hi / lo);
      }
      EXPECT_NEAR(worst, std::exp(eps), 1e-9 * std::exp(eps)) << k << " "
                                                              << eps;
      for (size_t x = 0; x < k; ++x) {
        double total = 0;
        for (size_t y = 0; y < s.output_size(); ++y) {
          total += s.TransitionProbability(x, y);
        }
        EXPECT_NEAR(total, 1, 1e-12);
      }
    }
  }
}

TEST(TransitionTest, ReferenceProbabilities) {
  const GhrScheme s = *GhrParams(6, kLn2);
  for (size_t y = 0; y < 8; ++y) {
    EXPECT_NEAR(s.TransitionProbability(0, y), s.Contains(0, y) ? 0.2 : 0.1,
                1e-15);
  }
}

TEST(GhrRandomiseTest, EmpiricalFrequenciesMatchPmf) {
  const GhrScheme s = *GhrParams(6, kLn2);
  RandomSource rng(61, 0);
  constexpr int kDraws = 100000;
  std::vector<int> counts(8, 0);
  for (int i = 0; i < kDraws; ++i) ++counts[*GhrRandomise(s, 0, rng)];
  for (size_t y = 0; y < 8; ++y) {
    const double p = s.TransitionProbability(0, y);
    const double sd = std::sqrt(kDraws * p * (1 - p));
    EXPECT_NEAR(counts[y], kDraws * p, 3 * sd) << y;
  }
  EXPECT_FALSE(GhrRandomise(s, 6, rng).ok());
}

TEST(GhrRandomiseTest, ChiSquareAcrossSchemes) {
  RandomSource rng(62, 0);
  for (size_t k : {2u, 5u, 16u, 31u}) {
    for (double eps : kEpsGrid) {
      const GhrScheme s = *GhrParams(k, eps);
      const size_t x = k - 1;
      std::vector<int64_t> samples(40000);
      for (auto& v : samples) v = static_cast<int64_t>(s.Randomise(x, rng));
      const double p = sut::testing::ChiSquarePValue(samples, [&](int64_t y) {
        return y < static_cast<int64_t>(s.output_size())
                   ? s.TransitionProbability(x, static_cast<size_t>(y))
                   : 0.0;
      });
      EXPECT_GT(p, sut::testing::kGofSignificance) << k << " " << eps;
    }
  }
}

TEST(InducedDistributionTest, ZeroEpsIsUniform) {
  const GhrScheme s = GhrScheme::CreateUncheckedForTesting(10, 0.0);
  const auto q =
      InducedDistribution(s, *DiscreteDistribution::PointMass(10, 3));
  for (size_t y = 0; y < s.output_size(); ++y) {
    EXPECT_DOUBLE_EQ(q[y], 1.0 / static_cast<double>(s.output_size()));
  }
}

TEST(InducedDistributionTest, PointMassIsTransitionRow) {
  const GhrScheme s = *GhrParams(9, 2.0);
  for (size_t x = 0; x < 9; ++x) {
    const auto q =
        InducedDistribution(s, *DiscreteDistribution::PointMass(9, x));
    for (size_t y = 0; y < s.output_size(); ++y) {
      EXPECT_NEAR(q[y], s.TransitionProbability(x, y), 1e-15);
    }
  }
}

TEST(InducedDistributionTest, ReferenceNormBound) {
  for (size_t k = 2; k <= 32; ++k) {
    for (double eps : kEpsGrid) {
      const GhrScheme s = *GhrParams(k, eps);
      const auto q = InducedDistribution(s, DiscreteDistribution::Uniform(k));
      double norm = 0;
      for (double v : q.probs()) norm += v * v;
      EXPECT_LE(norm, 24.0 / static_cast<double>(s.output_size()));
    }
  }
}

DiscreteDistribution RandomDistribution(size_t k, RandomSource& rng) {
  std::vector<double> w(k);
  for (double& v : w) v = -std::log(1 - rng.Uniform());
  return *DiscreteDistribution::Normalized(std::move(w));
}

TEST(ParsevalTest, ExactDecompositionAndLowerBound) {
  RandomSource rng(63, 0);
  int violations = 0;
  for (size_t k : {2u, 4u, 8u, 16u}) {
    for (double eps : kEpsGrid) {
      const GhrScheme s = *GhrParams(k, eps);
      const double sd = static_cast<double>(s.s());
      const double ratio =
          std::expm1(eps) /
          (std::exp(eps) + static_cast<double>(s.output_size()) / sd - 1);
      const double c = ratio * ratio / (2 * sd);
      for (int t = 0; t < 1000; ++t) {
        const auto p = RandomDistribution(k, rng);
        const auto q = RandomDistribution(k, rng);
        const auto fp = InducedDistribution(s, p);
        const auto fq = InducedDistribution(s, q);
        const double lhs = *L2DistanceSq(fp, fq);
        const double pq = *L2DistanceSq(p, q);
        // Residual: sum over copies of (p(T_i) - q(T_i))^2.
        std::vector<double> block(s.a(), 0.0);
        for (size_t x = 0; x < k; ++x) block[s.RowOf(x).copy] += p[x] - q[x];
        double residual = 0;
        for (double d : block) residual += d * d;
        EXPECT_NEAR(lhs, c * (pq + residual), 1e-12 * lhs + 1e-18);
        if (lhs < c * pq * (1 - 1e-12)) ++violations;
      }
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(AnalyserParamsTest, GammaFormula) {
  const GhrScheme s = *GhrParams(10, 2.0);
  const auto params = *GhrAnalyserParams::Create(s, 0.4);
  const double e = std::exp(2.0);
  const double sd = static_cast<double>(s.s());
  const double big_k = static_cast<double>(s.output_size());
  const double expected = 2 * 0.16 / (sd * 10) *
                          std::pow((e - 1) / (e + big_k / sd - 1), 2);
  EXPECT_NEAR(params.gamma_l2_sq, expected, 1e-15 * expected);
  EXPECT_FALSE(GhrAnalyserParams::Create(s, 0).ok());
}

TEST(L2IdentityTest, HandComputed) {
  const auto counts = *Histogram::FromCounts({4, 0});
  const auto result =
      L2IdentityTest(counts, 4, DiscreteDistribution::Uniform(2), 1.0);
  EXPECT_DOUBLE_EQ(result.statistic, 4);
  EXPECT_DOUBLE_EQ(result.threshold, 8);
  EXPECT_EQ(result.verdict, L2Verdict::kMatch);
  // Strict: T equal to the threshold is a match.
  EXPECT_EQ(L2IdentityTest(counts, 4, DiscreteDistribution::Uniform(2), 0.5)
                .verdict,
            L2Verdict::kMatch);
  EXPECT_EQ(L2IdentityTest(counts, 4, DiscreteDistribution::Uniform(2), 0.49)
                .verdict,
            L2Verdict::kFar);
}

Histogram PoissonCounts(const DiscreteDistribution& q, double n,
                        RandomSource& rng) {
  Histogram h(q.k());
  for (size_t y = 0; y < q.k(); ++y) h.Add(y, *SamplePoisson(n * q[y], rng));
  return h;
}

TEST(L2IdentityTest, UnbiasedUnderNull) {
  const GhrScheme s = *GhrParams(10, 2.0);
  const auto params = *GhrAnalyserParams::Create(s, 0.4);
  const double n = static_cast<double>(*RequiredNLdp(10, 0.4, 2.0));
  RandomSource rng(64, 0);
  constexpr int kTrials = 10000;
  double sum = 0;
  double sum_sq = 0;
  for (int t = 0; t < kTrials; ++t) {
    const double v = L2IdentityTest(PoissonCounts(params.q_star, n, rng), n,
                                    params.q_star, params.gamma_l2_sq)
                         .statistic;
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / kTrials;
  const double se =
      std::sqrt((sum_sq / kTrials - mean * mean) / (kTrials - 1));
  EXPECT_NEAR(mean, 0, 3 * se);
}

TEST(L2IdentityTest, RejectsAtTwiceGammaSquared) {
  const GhrScheme s = *GhrParams(10, 2.0);
  const auto params = *GhrAnalyserParams::Create(s, 0.4);
  const double n = static_cast<double>(*RequiredNLdp(10, 0.4, 2.0));
  // q = q* + t v with v = (+1, -1, +1, ...), so ||q - q*||^2 = K t^2.
  const size_t big_k = s.output_size();
  const double t = std::sqrt(2 * params.gamma_l2_sq / big_k);
  std::vector<double> q(big_k);
  for (size_t y = 0; y < big_k; ++y) {
    q[y] = params.q_star[y] + (y % 2 == 0 ? t : -t);
  }
  const auto dist = *DiscreteDistribution::Normalized(q);
  EXPECT_NEAR(*L2DistanceSq(dist, params.q_star), 2 * params.gamma_l2_sq,
              1e-12);
  RandomSource rng(65, 0);
  int far = 0;
  for (int trial = 0; trial < 300; ++trial) {
    far += L2IdentityTest(PoissonCounts(dist, n, rng), n, params.q_star,
                          params.gamma_l2_sq)
               .verdict == L2Verdict::kFar;
  }
  EXPECT_GE(far, 200);
}

TEST(AnalyseGhrTest, MalformedTranscript) {
  const auto params = *GhrAnalyserParams::Create(*GhrParams(6, kLn2), 0.5);
  const std::vector<uint32_t> bad = {0, 8};
  auto a = AnalyseGhr(bad, params, 2);
  EXPECT_EQ(a.status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_THAT(a.status().message(), HasSubstr("malformed transcript"));
}

TEST(AnalyseGhrTest, EndToEndRatesAtPlannerN) {
  const size_t k = 10;
  const double alpha = 0.4;
  const double eps = 2.0;
  const auto params = *GhrAnalyserParams::Create(*GhrParams(k, eps), alpha);
  const double n = static_cast<double>(*RequiredNLdp(k, alpha, eps));
  const CategoricalSampler uniform(DiscreteDistribution::Uniform(k));
  const CategoricalSampler far(*MakeFarDistribution(k, 1.25 * alpha));
  RandomSource rng(66, 0);
  int accepted = 0;
  int rejected = 0;
  for (int t = 0; t < 300; ++t) {
    accepted += RunGhrRound(uniform, params, n, false, rng)->verdict ==
                Verdict::kUniform;
    rejected += RunGhrRound(far, params, n, false, rng)->verdict ==
                Verdict::kNotUniform;
  }
  EXPECT_GE(accepted, 200);
  EXPECT_GE(rejected, 200);
}

TEST(RequiredNLdpTest, FormulaAndMonotonicity) {
  const double e2 = std::exp(2.0);
  const double k15 = 10 * std::sqrt(10.0);
  const double direct = k15 / (0.16 * (e2 - 1) * (e2 - 1)) + k15 / (0.16 * e2) +
                        std::sqrt(10.0) / 0.16;
  EXPECT_EQ(*RequiredNLdp(10, 0.4, 2.0, 1.0),
            static_cast<int64_t>(std::ceil(direct)));
  for (double eps = 1; eps < 8; eps *= 2) {
    EXPECT_LE(*RequiredNLdp(20, 0.3, 2 * eps), *RequiredNLdp(20, 0.3, eps));
  }
  EXPECT_FALSE(RequiredNLdp(10, 0, 1).ok());
  EXPECT_FALSE(RequiredNLdp(10, 0.5, 0).ok());
  EXPECT_FALSE(RequiredNLdp(10, 0.5, 1, 0).ok());
}

}  // namespace
}  // namespace sut
