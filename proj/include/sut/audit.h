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

// Numeric privacy certificates: the Poisson mechanism sufficiency bound,
// hockey-stick divergences of truncated discrete pmfs, exact LDP ratios of
// finite randomisers, and the channel trace diagnostic
//
//   Tr[H(R)] = sum_y sum_i (P[R(2i) = y] - P[R(2i-1) = y])^2 / sum_x P[R(x) = y]
//
// which is at most 2 e^eps for any eps-LDP channel, and at most
// 2 (e^eps + delta 2^l) for (eps, delta)-LDP channels with 2^l outputs.

#ifndef SUT_AUDIT_H_
#define SUT_AUDIT_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "sut/ghr.h"
#include "sut/probcore.h"

namespace sut {

// True iff adding Poi(lambda) noise to a sensitivity-Delta integer query
// meets the (eps, delta)-DP sufficiency bound
//   lambda >= 16 log(2/delta) / (1 - e^{-eps/Delta})^2
//             + 2 Delta / (1 - e^{-eps/Delta}).
inline bool PoissonMechanismCheck(double lambda, double eps, double delta,
                                  int sensitivity) {
  const double gap = -std::expm1(-eps / sensitivity);
  const double threshold = 16 * std::log(2 / delta) / (gap * gap) +
                           2.0 * sensitivity / gap;
  return lambda >= threshold;
}

// Largest tail mass a truncated pmf may omit.
inline constexpr double kTailBudget = 1e-12;

// A pmf on {0, 1, ..., mass.size() - 1}; `omitted_tail` upper-bounds the
// mass beyond the stored support.
struct DiscretePmf {
  std::vector<double> mass;
  double omitted_tail = 0;
};

// Default truncation point lambda + 20 sqrt(lambda) + 50.
inline size_t DefaultPoissonSupport(double rate) {
  return static_cast<size_t>(std::ceil(rate + 20 * std::sqrt(rate) + 50));
}

// Poi(rate) shifted right by `shift`, truncated to [0, support_max]. The
// omitted tail is certified by the Chernoff bound
// P[X >= m] <= e^{-rate} (e rate / m)^m for m > rate.
inline DiscretePmf TruncatedPoissonPmf(double rate, size_t support_max,
                                       size_t shift = 0) {
  DiscretePmf pmf;
  pmf.mass.assign(support_max + 1, 0.0);
  const double log_rate = std::log(rate);
  for (size_t z = shift; z <= support_max; ++z) {
    const auto j = static_cast<int64_t>(z - shift);
    pmf.mass[z] = rate == 0 ? (j == 0 ? 1.0 : 0.0)
                            : std::exp(-rate + static_cast<double>(j) *
                                                   log_rate -
                                       internal::LogFactorial(j));
  }
  // First omitted value of the unshifted variable.
  const double m = static_cast<double>(support_max + 1) -
                   static_cast<double>(shift);
  if (rate == 0) {
    pmf.omitted_tail = m > 0 ? 0.0 : 1.0;
  } else if (m <= rate) {
    pmf.omitted_tail = 1.0;
  } else {
    pmf.omitted_tail =
        std::exp(-rate + m * (1 + log_rate - std::log(m)));
  }
  return pmf;
}

// sum_z max(a(z) - e^eps b(z), 0): the smallest delta for which the pair
// satisfies the (eps, delta)-DP inequality in the a-versus-b direction.
inline absl::StatusOr<double> HockeyStickDelta(const DiscretePmf& a,
                                               const DiscretePmf& b,
                                               double eps) {
  if (!(a.omitted_tail < kTailBudget) || !(b.omitted_tail < kTailBudget)) {
    return absl::DataLossError(absl::StrCat(
        "HockeyStickDelta: truncation omits tail mass ",
        std::max(a.omitted_tail, b.omitted_tail), " >= ", kTailBudget));
  }
  const double scale = std::exp(eps);
  const size_t n = std::max(a.mass.size(), b.mass.size());
  double delta = 0;
  for (size_t z = 0; z < n; ++z) {
    const double pa = z < a.mass.size() ? a.mass[z] : 0.0;
    const double pb = z < b.mass.size() ? b.mass[z] : 0.0;
    // Guards inf * 0 when e^eps overflows.
    const double excess = pb == 0 ? pa : pa - scale * pb;
    if (excess > 0) delta += excess;
  }
  return delta;
}

// Row-stochastic matrix: rows are inputs [k], columns are outputs [m].
class FiniteRandomiser {
 public:
  static absl::StatusOr<FiniteRandomiser> Create(
      std::vector<std::vector<double>> rows) {
    if (rows.empty() || rows.front().empty()) {
      return absl::InvalidArgumentError("FiniteRandomiser: empty matrix");
    }
    const size_t m = rows.front().size();
    FiniteRandomiser r;
    r.inputs_ = rows.size();
    r.outputs_ = m;
    r.entries_.reserve(r.inputs_ * m);
    for (size_t x = 0; x < rows.size(); ++x) {
      if (rows[x].size() != m) {
        return absl::InvalidArgumentError(
            absl::StrCat("FiniteRandomiser: row ", x + 1, " has ",
                         rows[x].size(), " entries, expected ", m));
      }
      double total = 0;
      for (double v : rows[x]) {
        if (!(v >= 0) || !std::isfinite(v)) {
          return absl::InvalidArgumentError(absl::StrCat(
              "FiniteRandomiser: row ", x + 1, " has an invalid entry"));
        }
        total += v;
      }
      if (std::abs(total - 1) > kNormalizationTolerance) {
        return absl::InvalidArgumentError(absl::StrCat(
            "FiniteRandomiser: row ", x + 1, " sums to ", total));
      }
      r.entries_.insert(r.entries_.end(), rows[x].begin(), rows[x].end());
    }
    return r;
  }

  size_t inputs() const { return inputs_; }
  size_t outputs() const { return outputs_; }
  double operator()(size_t x, size_t y) const {
    return entries_[x * outputs_ + y];
  }

 private:
  FiniteRandomiser() = default;

  size_t inputs_ = 0;
  size_t outputs_ = 0;
  std::vector<double> entries_;
};

inline FiniteRandomiser GhrTransitionMatrix(const GhrScheme& scheme) {
  std::vector<std::vector<double>> rows(
      scheme.k(), std::vector<double>(scheme.output_size()));
  for (size_t x = 0; x < scheme.k(); ++x) {
    for (size_t y = 0; y < scheme.output_size(); ++y) {
      rows[x][y] = scheme.TransitionProbability(x, y);
    }
  }
  return FiniteRandomiser::Create(std::move(rows)).value();
}

// max over y, x, x' of P[R(x) = y] / P[R(x') = y]; infinite when some column
// mixes zero and positive entries. All-zero columns are ignored.
inline double MaxPrivacyRatio(const FiniteRandomiser& r) {
  double worst = 1.0;
  for (size_t y = 0; y < r.outputs(); ++y) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0;
    for (size_t x = 0; x < r.inputs(); ++x) {
      lo = std::min(lo, r(x, y));
      hi = std::max(hi, r(x, y));
    }
    if (hi == 0) continue;
    if (lo == 0) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, hi / lo);
  }
  return worst;
}

// Pairs inputs (2i - 1, 2i), i.e. 0-based rows (0, 1), (2, 3), ...
inline absl::StatusOr<double> TraceH(const FiniteRandomiser& r) {
  if (r.inputs() % 2 != 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "TraceH: input alphabet size must be even, got ", r.inputs()));
  }
  double trace = 0;
  for (size_t y = 0; y < r.outputs(); ++y) {
    double column_mass = 0;
    for (size_t x = 0; x < r.inputs(); ++x) column_mass += r(x, y);
    if (column_mass == 0) continue;
    double numerator = 0;
    for (size_t x = 0; x + 1 < r.inputs(); x += 2) {
      const double d = r(x + 1, y) - r(x, y);
      numerator += d * d;
    }
    trace += numerator / column_mass;
  }
  return trace;
}

// trace_h(r) <= 2 (e^eps + delta 2^ell_bits).
inline absl::StatusOr<bool> TraceBoundCheck(const FiniteRandomiser& r,
                                            double eps, double delta,
                                            int ell_bits) {
  if (r.outputs() > (size_t{1} << ell_bits)) {
    return absl::InvalidArgumentError(
        absl::StrCat("TraceBoundCheck: ", r.outputs(),
                     " outputs do not fit in ", ell_bits, " bits"));
  }
  const auto trace = TraceH(r);
  if (!trace.ok()) return trace.status();
  return *trace <= 2 * (std::exp(eps) + delta * std::ldexp(1.0, ell_bits));
}

}  // namespace sut

#endif  // SUT_AUDIT_H_
