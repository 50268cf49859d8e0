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

// Experiment driver behind the `sut` command line tool: configuration,
// calibration, seeded Monte Carlo trials over a worker pool, sample-size
// sweeps, moment comparisons and privacy audits.
//
// Trial t always draws from RandomSource(seed, t) and results are aggregated
// in trial order, so reports depend only on (seed, config), never on the
// worker count.

#ifndef SUT_HARNESS_H_
#define SUT_HARNESS_H_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "sut/amplify.h"
#include "sut/audit.h"
#include "sut/common.h"
#include "sut/ghr.h"
#include "sut/privacy.h"
#include "sut/probcore.h"
#include "sut/shuffle_ut.h"
#include "sut/status_macros.h"

namespace sut {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kDefaultFarFactor = 1.25;
inline constexpr double kTargetRate = 2.0 / 3.0;

enum class ProtocolKind { kP1, kP2, kLdpOnly };

inline const char* ProtocolName(ProtocolKind p) {
  switch (p) {
    case ProtocolKind::kP1:
      return "p1";
    case ProtocolKind::kP2:
      return "p2";
    case ProtocolKind::kLdpOnly:
      return "ldp-only";
  }
  return "?";
}

inline absl::StatusOr<ProtocolKind> ParseProtocol(absl::string_view s) {
  if (s == "p1") return ProtocolKind::kP1;
  if (s == "p2") return ProtocolKind::kP2;
  if (s == "ldp-only") return ProtocolKind::kLdpOnly;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown protocol '", s, "' (want p1, p2 or ldp-only)"));
}

struct Alternative {
  enum class Kind { kUniform, kPaninski, kFile };
  Kind kind = Kind::kUniform;
  double factor = kDefaultFarFactor;
  std::string path;

  std::string ToString() const {
    switch (kind) {
      case Kind::kUniform:
        return "uniform";
      case Kind::kPaninski:
        return absl::StrCat("paninski:", factor);
      case Kind::kFile:
        return absl::StrCat("file:", path);
    }
    return "?";
  }
};

// Accepts "uniform", "paninski:FACTOR" and "file:PATH".
inline absl::StatusOr<Alternative> ParseAlternative(absl::string_view s) {
  Alternative alt;
  if (s == "uniform") return alt;
  if (absl::ConsumePrefix(&s, "paninski:")) {
    alt.kind = Alternative::Kind::kPaninski;
    if (!absl::SimpleAtod(s, &alt.factor)) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad paninski factor '", s, "'"));
    }
    return alt;
  }
  if (absl::ConsumePrefix(&s, "file:") && !s.empty()) {
    alt.kind = Alternative::Kind::kFile;
    alt.path = std::string(s);
    return alt;
  }
  return absl::InvalidArgumentError(absl::StrCat(
      "bad alternative '", s, "' (want uniform, paninski:F or file:PATH)"));
}

struct ExperimentConfig {
  ProtocolKind protocol = ProtocolKind::kP1;
  size_t k = 10;
  double alpha = 0.4;
  double eps = 1.0;
  double delta = 0.01;
  std::optional<int64_t> n;
  // Overrides calibration of the noise rate (p1).
  std::optional<double> lambda;
  // Overrides the amplification inversion (p2).
  std::optional<double> eps_l;
  int64_t trials = 300;
  uint64_t seed = 1;
  Alternative alternative;
  int workers = 1;
  int repeat = 1;
  double safety_const = kDefaultSafetyConst;
  // Custom channel for `audit`.
  std::string matrix_path;
};

inline absl::Status ValidateConfig(const ExperimentConfig& c) {
  const size_t min_k = c.protocol == ProtocolKind::kP1 ? 1 : 2;
  if (c.k < min_k) {
    return absl::InvalidArgumentError(
        absl::StrCat("--k must be >= ", min_k, " for ",
                     ProtocolName(c.protocol)));
  }
  if (!(c.alpha > 0 && c.alpha <= 1)) {
    return absl::InvalidArgumentError("--alpha must lie in (0, 1]");
  }
  if (!(c.eps > 0) || !std::isfinite(c.eps)) {
    return absl::InvalidArgumentError("--eps must be positive and finite");
  }
  if (!(c.delta > 0 && c.delta < 1)) {
    return absl::InvalidArgumentError("--delta must lie in (0, 1)");
  }
  if (c.n && *c.n < 1) {
    return absl::InvalidArgumentError("--n must be >= 1");
  }
  if (c.lambda && !(*c.lambda >= 0 && std::isfinite(*c.lambda))) {
    return absl::InvalidArgumentError("--lambda must be finite and >= 0");
  }
  if (c.eps_l && !(*c.eps_l > 0 && std::isfinite(*c.eps_l))) {
    return absl::InvalidArgumentError("--eps-l must be positive and finite");
  }
  if (c.trials < 1) return absl::InvalidArgumentError("--trials must be >= 1");
  if (c.workers < 1) {
    return absl::InvalidArgumentError("--workers must be >= 1");
  }
  if (c.repeat < 1) return absl::InvalidArgumentError("--repeat must be >= 1");
  if (!(c.safety_const > 0)) {
    return absl::InvalidArgumentError("--safety-const must be positive");
  }
  if (c.alternative.kind == Alternative::Kind::kPaninski) {
    if (!(c.alternative.factor > 1)) {
      return absl::InvalidArgumentError(
          "paninski factor must exceed 1 so the alternative is strictly far");
    }
    if (c.k % 2 != 0) {
      return absl::InvalidArgumentError("paninski alternative needs even k");
    }
    if (c.alternative.factor * c.alpha > 0.5) {
      return absl::InvalidArgumentError(
          "paninski factor * alpha must be <= 1/2");
    }
  }
  return absl::OkStatus();
}

// One probability per line; blank lines are skipped. The entries must sum to
// 1 within 1e-9 and are then renormalized.
inline absl::StatusOr<DiscreteDistribution> LoadPmfFile(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(absl::StrCat("cannot open pmf file ", path));
  }
  std::vector<double> probs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const absl::string_view v = absl::StripAsciiWhitespace(line);
    if (v.empty()) continue;
    double p = 0;
    if (!absl::SimpleAtod(v, &p)) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", line_no, ": not a number"));
    }
    probs.push_back(p);
  }
  double total = 0;
  for (double p : probs) total += p;
  if (probs.empty() || std::abs(total - 1) > 1e-9) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": probabilities sum to ", total, ", not 1"));
  }
  return DiscreteDistribution::Normalized(std::move(probs));
}

// Whitespace-separated rows, one input per line.
inline absl::StatusOr<FiniteRandomiser> LoadMatrixFile(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(absl::StrCat("cannot open matrix file ", path));
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    for (absl::string_view tok :
         absl::StrSplit(line, absl::ByAnyChar(" \t,"), absl::SkipEmpty())) {
      double v = 0;
      if (!absl::SimpleAtod(tok, &v)) {
        return absl::InvalidArgumentError(
            absl::StrCat(path, ": bad matrix entry '", tok, "'"));
      }
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return FiniteRandomiser::Create(std::move(rows));
}

inline absl::StatusOr<DiscreteDistribution> ResolveAlternative(
    const ExperimentConfig& c, const Alternative& alt) {
  switch (alt.kind) {
    case Alternative::Kind::kUniform:
      return DiscreteDistribution::Uniform(c.k);
    case Alternative::Kind::kPaninski:
      return MakeFarDistribution(c.k, alt.factor * c.alpha);
    case Alternative::Kind::kFile: {
      SUT_ASSIGN_OR_RETURN(DiscreteDistribution p, LoadPmfFile(alt.path));
      if (p.k() != c.k) {
        return absl::InvalidArgumentError(absl::StrCat(
            alt.path, " has ", p.k(), " entries but k = ", c.k));
      }
      return p;
    }
  }
  return absl::InternalError("unreachable");
}

struct RobustSample {
  double gamma = 0;
  double eps_bar = 0;
  double delta_bar = 0;
  // p2 only: amplified eps with gamma n honest users; empty if the validity
  // gate fails at gamma n.
  std::optional<double> amplified_eps;
};

struct Calibration {
  ProtocolKind protocol = ProtocolKind::kP1;
  size_t k = 0;
  double alpha = 0;
  double eps = 0;
  double delta = 0;
  int64_t planner_n = 0;
  // Poissonisation rate actually used: the override, else planner_n.
  int64_t n = 0;

  // p1.
  double lambda = 0;
  double mu = 0;
  double tau = 0;

  // p2 and ldp-only.
  double eps_l = 0;
  size_t a = 0;
  size_t b = 0;
  size_t output_size = 0;
  size_t s = 0;
  double gamma_l2_sq = 0;
  int message_bits = 0;
  std::optional<double> realized_eps_bound;

  std::vector<RobustSample> robust;
};

namespace internal {

inline void FillGhrFields(const GhrAnalyserParams& params, Calibration& cal) {
  const GhrScheme& s = params.scheme;
  cal.eps_l = s.eps_l();
  cal.a = s.a();
  cal.b = s.b();
  cal.output_size = s.output_size();
  cal.s = s.s();
  cal.gamma_l2_sq = params.gamma_l2_sq;
  cal.message_bits = s.message_bits();
}

}  // namespace internal

// Everything needed to run trials for a configuration.
struct Engine {
  Calibration calibration;
  std::variant<UtParams, Protocol2Setup, GhrAnalyserParams> protocol;

  // One protocol execution at the calibrated n.
  struct Outcome {
    Verdict verdict;
    double statistic;
    int64_t n_users;
  };

  absl::StatusOr<Outcome> RunOnce(const CategoricalSampler& p,
                                  RandomSource& rng) const {
    if (const auto* ut = std::get_if<UtParams>(&protocol)) {
      SUT_ASSIGN_OR_RETURN(const Protocol1Outcome o, RunProtocol1(p, *ut, rng));
      return Outcome{o.verdict, o.z, o.n_users};
    }
    if (const auto* p2 = std::get_if<Protocol2Setup>(&protocol)) {
      SUT_ASSIGN_OR_RETURN(const Protocol2Outcome o, RunProtocol2(p, *p2, rng));
      return Outcome{o.verdict, o.statistic, o.n_users};
    }
    const auto& ldp = std::get<GhrAnalyserParams>(protocol);
    SUT_ASSIGN_OR_RETURN(
        const GhrRoundOutcome o,
        RunGhrRound(p, ldp, static_cast<double>(calibration.n),
                    /*shuffle=*/false, rng));
    return Outcome{o.verdict, o.statistic, o.n_users};
  }
};

inline absl::StatusOr<Engine> BuildEngine(const ExperimentConfig& c) {
  SUT_RETURN_IF_ERROR(ValidateConfig(c));
  Calibration cal;
  cal.protocol = c.protocol;
  cal.k = c.k;
  cal.alpha = c.alpha;
  cal.eps = c.eps;
  cal.delta = c.delta;
  const double gammas[] = {0.25, 0.5, 1.0};

  switch (c.protocol) {
    case ProtocolKind::kP1: {
      double lambda = 0;
      if (c.lambda) {
        lambda = *c.lambda;
      } else {
        SUT_ASSIGN_OR_RETURN(lambda, CalibrateLambda(c.eps, c.delta));
      }
      SUT_ASSIGN_OR_RETURN(cal.planner_n,
                           RequiredNProtocol1WithLambda(c.k, c.alpha, lambda));
      cal.n = c.n.value_or(cal.planner_n);
      SUT_ASSIGN_OR_RETURN(
          UtParams params,
          UtParams::WithLambda(c.k, static_cast<double>(cal.n), c.alpha,
                               lambda));
      if (!c.lambda) {
        params.eps = c.eps;
        params.delta = c.delta;
      }
      cal.lambda = params.lambda;
      cal.mu = params.mu;
      cal.tau = params.tau;
      const RobustProfile curve = RobustProfileP1(c.eps, c.delta);
      for (double g : gammas) {
        SUT_ASSIGN_OR_RETURN(const PrivacyProfile pp, curve.At(g));
        cal.robust.push_back({g, pp.eps, pp.delta, std::nullopt});
      }
      return Engine{cal, params};
    }
    case ProtocolKind::kP2: {
      SUT_ASSIGN_OR_RETURN(cal.planner_n,
                           RequiredNProtocol2(c.k, c.alpha, c.eps, c.delta,
                                              c.safety_const));
      cal.n = c.n.value_or(cal.planner_n);
      const double n = static_cast<double>(cal.n);
      auto make_setup = [&]() -> absl::StatusOr<Protocol2Setup> {
        if (!c.eps_l) {
          SUT_ASSIGN_OR_RETURN(
              Protocol2Setup s,
              Protocol2Setup::Create(c.k, c.alpha, c.eps, c.delta, n));
          cal.realized_eps_bound = s.realized_eps_bound;
          return s;
        }
        SUT_ASSIGN_OR_RETURN(const GhrScheme scheme,
                             GhrScheme::Create(c.k, *c.eps_l));
        SUT_ASSIGN_OR_RETURN(GhrAnalyserParams analyser,
                             GhrAnalyserParams::Create(scheme, c.alpha));
        // The bound is reported when it applies; the override may fall
        // outside the validity gate.
        const auto bound = AmplifiedEpsilon(*c.eps_l, n, c.delta);
        if (bound.ok()) cal.realized_eps_bound = *bound;
        return Protocol2Setup{c.eps, c.delta, n, *c.eps_l,
                              bound.ok() ? *bound : 0.0, std::move(analyser)};
      };
      SUT_ASSIGN_OR_RETURN(Protocol2Setup setup, make_setup());
      internal::FillGhrFields(setup.analyser, cal);
      const RobustProfile curve = RobustProfileP2(c.eps, c.delta);
      for (double g : gammas) {
        SUT_ASSIGN_OR_RETURN(const PrivacyProfile pp, curve.At(g));
        const auto amp =
            AmplifiedEpsilonAtHonestFraction(setup.eps_l, n, c.delta, g);
        cal.robust.push_back(
            {g, pp.eps, pp.delta,
             amp.ok() ? std::optional<double>(*amp) : std::nullopt});
      }
      return Engine{cal, std::move(setup)};
    }
    case ProtocolKind::kLdpOnly: {
      const double eps_l = c.eps_l.value_or(c.eps);
      SUT_ASSIGN_OR_RETURN(cal.planner_n,
                           RequiredNLdp(c.k, c.alpha, eps_l, c.safety_const));
      cal.n = c.n.value_or(cal.planner_n);
      SUT_ASSIGN_OR_RETURN(const GhrScheme scheme,
                           GhrScheme::Create(c.k, eps_l));
      SUT_ASSIGN_OR_RETURN(GhrAnalyserParams analyser,
                           GhrAnalyserParams::Create(scheme, c.alpha));
      internal::FillGhrFields(analyser, cal);
      return Engine{cal, std::move(analyser)};
    }
  }
  return absl::InternalError("unreachable");
}

inline absl::StatusOr<Calibration> Calibrate(const ExperimentConfig& c) {
  SUT_ASSIGN_OR_RETURN(Engine engine, BuildEngine(c));
  return engine.calibration;
}

struct TrialRecord {
  int64_t trial = 0;
  uint64_t seed = 0;
  uint64_t stream = 0;
  int64_t n_users = 0;  // from the first repetition
  double statistic = 0;  // from the first repetition
  Verdict verdict = Verdict::kUniform;
  int votes_reject = 0;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct Aggregates {
  int64_t trials = 0;
  int64_t accepted = 0;
  double accept_rate = 0;
  double statistic_mean = 0;
  double statistic_variance = 0;

  friend bool operator==(const Aggregates&, const Aggregates&) = default;
};

inline Aggregates Aggregate(const std::vector<TrialRecord>& records) {
  Aggregates agg;
  double mean = 0;
  double m2 = 0;
  for (const TrialRecord& r : records) {
    ++agg.trials;
    if (r.verdict == Verdict::kUniform) ++agg.accepted;
    const double d = r.statistic - mean;
    mean += d / static_cast<double>(agg.trials);
    m2 += d * (r.statistic - mean);
  }
  agg.accept_rate = agg.trials == 0 ? 0.0
                                    : static_cast<double>(agg.accepted) /
                                          static_cast<double>(agg.trials);
  agg.statistic_mean = mean;
  agg.statistic_variance =
      agg.trials > 1 ? m2 / static_cast<double>(agg.trials - 1) : 0.0;
  return agg;
}

// Runs `count` independent jobs on `workers` threads; job i writes slot i.
// Returns the error of the lowest failing index, if any.
template <typename Result>
absl::StatusOr<std::vector<Result>> RunParallel(
    int64_t count, int workers,
    const std::function<absl::StatusOr<Result>(int64_t)>& job) {
  std::vector<Result> results(static_cast<size_t>(count));
  std::vector<absl::Status> errors(static_cast<size_t>(count));
  std::atomic<int64_t> next{0};
  auto work = [&] {
    for (int64_t i = next++; i < count; i = next++) {
      auto r = job(i);
      if (r.ok()) {
        results[static_cast<size_t>(i)] = std::move(*r);
      } else {
        errors[static_cast<size_t>(i)] = r.status();
      }
    }
  };
  const int threads =
      static_cast<int>(std::min<int64_t>(std::max(workers, 1), count));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  for (const absl::Status& s : errors) {
    if (!s.ok()) return s;
  }
  return results;
}

// `trials` executions on streams stream_offset + t. With repeat > 1 each
// trial takes the majority verdict of that many independent runs drawn
// sequentially from its stream; ties count as "uniform".
inline absl::StatusOr<std::vector<TrialRecord>> RunTrials(
    const Engine& engine, const DiscreteDistribution& p, int64_t trials,
    uint64_t seed, uint64_t stream_offset, int workers, int repeat) {
  const CategoricalSampler sampler(p);
  return RunParallel<TrialRecord>(
      trials, workers, [&](int64_t t) -> absl::StatusOr<TrialRecord> {
        TrialRecord rec;
        rec.trial = t;
        rec.seed = seed;
        rec.stream = stream_offset + static_cast<uint64_t>(t);
        RandomSource rng(seed, rec.stream);
        for (int r = 0; r < repeat; ++r) {
          SUT_ASSIGN_OR_RETURN(const Engine::Outcome o,
                               engine.RunOnce(sampler, rng));
          if (r == 0) {
            rec.n_users = o.n_users;
            rec.statistic = o.statistic;
          }
          if (o.verdict == Verdict::kNotUniform) ++rec.votes_reject;
        }
        rec.verdict = 2 * rec.votes_reject > repeat ? Verdict::kNotUniform
                                                    : Verdict::kUniform;
        return rec;
      });
}

struct TrialReport {
  int schema_version = kSchemaVersion;
  ExperimentConfig config;
  Calibration calibration;
  std::vector<TrialRecord> records;
  Aggregates aggregates;
  // Measured but kept out of serialized reports, which must be
  // byte-reproducible.
  double wall_time_seconds = 0;
};

inline absl::StatusOr<TrialReport> Simulate(const ExperimentConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  SUT_ASSIGN_OR_RETURN(const Engine engine, BuildEngine(c));
  SUT_ASSIGN_OR_RETURN(const DiscreteDistribution p,
                       ResolveAlternative(c, c.alternative));
  TrialReport report;
  report.config = c;
  report.calibration = engine.calibration;
  SUT_ASSIGN_OR_RETURN(report.records,
                       RunTrials(engine, p, c.trials, c.seed, 0, c.workers,
                                 c.repeat));
  report.aggregates = Aggregate(report.records);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

struct SweepRow {
  int64_t n = 0;
  double accept_rate_uniform = 0;
  double reject_rate_far = 0;

  bool Passes() const {
    return accept_rate_uniform >= kTargetRate &&
           reject_rate_far >= kTargetRate;
  }
};

struct SweepResult {
  int64_t planner_n = 0;
  std::vector<SweepRow> rows;  // ascending n
  // Smallest grid n whose raw rates both reach 2/3.
  std::optional<int64_t> n_star;
  // Same, on non-decreasing least-squares fits of the two rate curves.
  // Less sensitive to Monte Carlo noise where the curves are flat.
  std::optional<int64_t> n_star_isotonic;
};

// Pool-adjacent-violators: the non-decreasing sequence closest to `y` in
// least squares (equal weights).
inline std::vector<double> IsotonicFit(const std::vector<double>& y) {
  std::vector<double> level;
  std::vector<size_t> width;
  for (double v : y) {
    level.push_back(v);
    width.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const size_t w = width[width.size() - 2] + width.back();
      const double merged = (level[level.size() - 2] *
                                 static_cast<double>(width[width.size() - 2]) +
                             level.back() * static_cast<double>(width.back())) /
                            static_cast<double>(w);
      level.pop_back();
      width.pop_back();
      level.back() = merged;
      width.back() = w;
    }
  }
  std::vector<double> fit;
  fit.reserve(y.size());
  for (size_t i = 0; i < level.size(); ++i) {
    fit.insert(fit.end(), width[i], level[i]);
  }
  return fit;
}

// Rates at one sample size: p = U on streams [0, trials), the far
// alternative on streams [trials, 2 trials). Streams are shared across
// sample sizes (common random numbers).
inline absl::StatusOr<SweepRow> EvaluateSweepPoint(
    const ExperimentConfig& c, const DiscreteDistribution& far, int64_t n) {
  ExperimentConfig at = c;
  at.n = n;
  SUT_ASSIGN_OR_RETURN(const Engine engine, BuildEngine(at));
  SUT_ASSIGN_OR_RETURN(
      const std::vector<TrialRecord> uni,
      RunTrials(engine, DiscreteDistribution::Uniform(c.k), c.trials, c.seed,
                0, c.workers, c.repeat));
  SUT_ASSIGN_OR_RETURN(
      const std::vector<TrialRecord> alt,
      RunTrials(engine, far, c.trials, c.seed,
                static_cast<uint64_t>(c.trials), c.workers, c.repeat));
  const Aggregates a = Aggregate(uni);
  const Aggregates b = Aggregate(alt);
  return SweepRow{n, a.accept_rate, 1.0 - b.accept_rate};
}

inline absl::StatusOr<DiscreteDistribution> SweepAlternative(
    const ExperimentConfig& c) {
  Alternative alt = c.alternative;
  if (alt.kind == Alternative::Kind::kUniform) {
    alt.kind = Alternative::Kind::kPaninski;
    alt.factor = kDefaultFarFactor;
  }
  return ResolveAlternative(c, alt);
}

inline void FinishSweep(SweepResult& result) {
  std::sort(result.rows.begin(), result.rows.end(),
            [](const SweepRow& x, const SweepRow& y) { return x.n < y.n; });
  result.n_star.reset();
  result.n_star_isotonic.reset();
  for (const SweepRow& row : result.rows) {
    if (row.Passes()) {
      result.n_star = row.n;
      break;
    }
  }
  std::vector<double> acc;
  std::vector<double> rej;
  for (const SweepRow& row : result.rows) {
    acc.push_back(row.accept_rate_uniform);
    rej.push_back(row.reject_rate_far);
  }
  acc = IsotonicFit(acc);
  rej = IsotonicFit(rej);
  for (size_t i = 0; i < result.rows.size(); ++i) {
    if (acc[i] >= kTargetRate && rej[i] >= kTargetRate) {
      result.n_star_isotonic = result.rows[i].n;
      break;
    }
  }
}

// Rates on an explicit grid. The far alternative defaults to
// paninski:1.25 when the configured alternative is uniform.
inline absl::StatusOr<SweepResult> Sweep(const ExperimentConfig& c,
                                         std::vector<int64_t> grid) {
  SUT_RETURN_IF_ERROR(ValidateConfig(c));
  if (grid.empty()) {
    return absl::InvalidArgumentError("sweep: empty n grid");
  }
  for (int64_t n : grid) {
    if (n < 1) {
      return absl::InvalidArgumentError("sweep: grid values must be >= 1");
    }
  }
  SUT_ASSIGN_OR_RETURN(const DiscreteDistribution far, SweepAlternative(c));
  SUT_ASSIGN_OR_RETURN(const Calibration cal, Calibrate(c));
  SweepResult result;
  result.planner_n = cal.planner_n;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (int64_t n : grid) {
    SUT_ASSIGN_OR_RETURN(SweepRow row, EvaluateSweepPoint(c, far, n));
    result.rows.push_back(row);
  }
  FinishSweep(result);
  return result;
}

// Automatic grid: halve down from the planner n until a point fails (or
// n = 1), then refine the last failing octave geometrically with
// `refine_steps` points per octave.
inline absl::StatusOr<SweepResult> AutoSweep(const ExperimentConfig& c,
                                             int refine_steps = 16) {
  SUT_RETURN_IF_ERROR(ValidateConfig(c));
  if (refine_steps < 1) {
    return absl::InvalidArgumentError("sweep: refine_steps must be >= 1");
  }
  SUT_ASSIGN_OR_RETURN(const DiscreteDistribution far, SweepAlternative(c));
  SUT_ASSIGN_OR_RETURN(const Calibration cal, Calibrate(c));
  SweepResult result;
  result.planner_n = cal.planner_n;

  auto evaluate = [&](int64_t n) -> absl::StatusOr<SweepRow> {
    for (const SweepRow& row : result.rows) {
      if (row.n == n) return row;
    }
    SUT_ASSIGN_OR_RETURN(SweepRow row, EvaluateSweepPoint(c, far, n));
    result.rows.push_back(row);
    return row;
  };

  int64_t hi = cal.planner_n;
  SUT_ASSIGN_OR_RETURN(SweepRow top, evaluate(hi));
  // Grow until the top of the bracket passes.
  while (!top.Passes()) {
    if (hi > (int64_t{1} << 40)) {
      FinishSweep(result);
      return result;
    }
    hi *= 2;
    SUT_ASSIGN_OR_RETURN(top, evaluate(hi));
  }
  int64_t lo = hi;
  while (lo > 1) {
    lo = std::max<int64_t>(1, lo / 2);
    SUT_ASSIGN_OR_RETURN(const SweepRow row, evaluate(lo));
    if (!row.Passes()) break;
    hi = lo;
  }
  for (int i = 1; i < refine_steps; ++i) {
    const auto n = static_cast<int64_t>(std::llround(
        static_cast<double>(lo) *
        std::pow(static_cast<double>(hi) / static_cast<double>(lo),
                 static_cast<double>(i) / refine_steps)));
    if (n <= lo || n >= hi) continue;
    SUT_RETURN_IF_ERROR(evaluate(n).status());
  }
  FinishSweep(result);
  return result;
}

struct MomentsReport {
  int64_t trials = 0;
  double expected_mean = 0;
  double expected_variance = 0;
  double empirical_mean = 0;
  double empirical_variance = 0;
  double mean_standard_error = 0;
  double variance_standard_error = 0;

  // |mean - E[Z]| <= 3 SE.
  bool MeanAgrees() const {
    return std::abs(empirical_mean - expected_mean) <=
           3 * mean_standard_error;
  }
  // |var - Var[Z]| <= 5% Var[Z] + 3 SE.
  bool VarianceAgrees() const {
    return std::abs(empirical_variance - expected_variance) <=
           0.05 * expected_variance + 3 * variance_standard_error;
  }
};

// Protocol-1 statistic moments: analytic oracles against Monte Carlo over
// full message-level executions.
inline absl::StatusOr<MomentsReport> Moments(const ExperimentConfig& c) {
  if (c.protocol != ProtocolKind::kP1) {
    return absl::InvalidArgumentError("moments: only protocol p1 applies");
  }
  SUT_ASSIGN_OR_RETURN(const Engine engine, BuildEngine(c));
  SUT_ASSIGN_OR_RETURN(const DiscreteDistribution p,
                       ResolveAlternative(c, c.alternative));
  const auto& params = std::get<UtParams>(engine.protocol);
  SUT_ASSIGN_OR_RETURN(
      const std::vector<TrialRecord> records,
      RunTrials(engine, p, c.trials, c.seed, 0, c.workers, /*repeat=*/1));

  MomentsReport m;
  m.trials = c.trials;
  m.expected_mean = ExpectedZ(p, params.n, params.k);
  m.expected_variance = VarZExact(p, params);
  const double t = static_cast<double>(c.trials);
  double mean = 0;
  for (const TrialRecord& r : records) mean += r.statistic;
  mean /= t;
  double m2 = 0;
  double m4 = 0;
  for (const TrialRecord& r : records) {
    const double d = r.statistic - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m.empirical_mean = mean;
  m.empirical_variance = c.trials > 1 ? m2 / (t - 1) : 0.0;
  m.mean_standard_error = std::sqrt(m.empirical_variance / t);
  // Var of the sample variance: (mu4 - sigma^4 (t - 3)/(t - 1)) / t.
  const double mu4 = m4 / t;
  const double s2 = m.empirical_variance;
  m.variance_standard_error =
      c.trials > 3 ? std::sqrt(std::max(0.0, (mu4 - s2 * s2 * (t - 3) /
                                                        (t - 1)) /
                                                   t))
                   : 0.0;
  return m;
}

struct AuditCheck {
  std::string name;
  double value = 0;
  double bound = 0;
  bool pass = false;
};

struct AuditReport {
  std::vector<AuditCheck> checks;

  bool AllPass() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const AuditCheck& c) { return c.pass; });
  }
};

inline absl::StatusOr<AuditReport> Audit(const ExperimentConfig& c) {
  SUT_RETURN_IF_ERROR(ValidateConfig(c));
  AuditReport report;

  // Per-bin Poisson mechanism behind the p1 privacy guarantee.
  double lambda = 0;
  if (c.lambda) {
    lambda = *c.lambda;
  } else {
    SUT_ASSIGN_OR_RETURN(lambda, CalibrateLambda(c.eps, c.delta));
  }
  for (double g : {0.25, 0.5, 1.0}) {
    const double delta_g = std::pow(2.0, 1 - g) * std::pow(c.delta, g);
    const double gap = -std::expm1(-c.eps);
    const double threshold =
        16 * std::log(2 / delta_g) / (gap * gap) + 2 / gap;
    report.checks.push_back(
        {absl::StrCat("poisson_mechanism gamma=", g), g * lambda / 2,
         threshold, PoissonMechanismCheck(g * lambda / 2, c.eps, delta_g, 1)});
  }
  const double rate = lambda / 2;
  const size_t support = DefaultPoissonSupport(rate + 1);
  const DiscretePmf shifted = TruncatedPoissonPmf(rate, support, 1);
  const DiscretePmf base = TruncatedPoissonPmf(rate, support, 0);
  SUT_ASSIGN_OR_RETURN(const double fwd,
                       HockeyStickDelta(shifted, base, c.eps));
  SUT_ASSIGN_OR_RETURN(const double bwd,
                       HockeyStickDelta(base, shifted, c.eps));
  report.checks.push_back(
      {"hockey_stick shifted_vs_base", fwd, 2 * c.delta, fwd <= 2 * c.delta});
  report.checks.push_back(
      {"hockey_stick base_vs_shifted", bwd, 2 * c.delta, bwd <= 2 * c.delta});

  auto channel_checks = [&](const FiniteRandomiser& r, double eps,
                            int bits, absl::string_view label) {
    const double ratio = MaxPrivacyRatio(r);
    const double limit = std::exp(eps);
    report.checks.push_back({absl::StrCat(label, " max_ldp_ratio"), ratio,
                             limit, ratio <= limit * (1 + 1e-9)});
    const auto trace = TraceH(r);
    if (trace.ok()) {
      report.checks.push_back({absl::StrCat(label, " trace_h"), *trace,
                               2 * limit, *trace <= 2 * limit});
      const auto bound = TraceBoundCheck(r, eps, 0.0, bits);
      report.checks.push_back({absl::StrCat(label, " trace_bound_check"),
                               *trace, 2 * limit, bound.ok() && *bound});
    }
  };

  if (c.protocol != ProtocolKind::kP1) {
    SUT_ASSIGN_OR_RETURN(const Calibration cal, Calibrate(c));
    SUT_ASSIGN_OR_RETURN(const GhrScheme scheme,
                         GhrScheme::Create(c.k, cal.eps_l));
    channel_checks(GhrTransitionMatrix(scheme), cal.eps_l,
                   scheme.message_bits(), "ghr");
  }
  if (!c.matrix_path.empty()) {
    SUT_ASSIGN_OR_RETURN(const FiniteRandomiser r,
                         LoadMatrixFile(c.matrix_path));
    int bits = 0;
    while ((size_t{1} << bits) < r.outputs()) ++bits;
    channel_checks(r, c.eps, bits, "custom");
  }
  return report;
}

}  // namespace sut

#endif  // SUT_HARNESS_H_
