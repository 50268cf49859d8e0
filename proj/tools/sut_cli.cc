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

// sut: calibrate, simulate, sweep, moments and audit for the shuffle-model
// uniformity testers.
//
// Exit codes: 0 success, 1 runtime error, 2 validation error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_split.h"
#include "fmt/core.h"
#include "sut/harness.h"
#include "sut/report_io.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct RawOptions {
  std::string protocol = "p1";
  size_t k = 10;
  double alpha = 0.4;
  double eps = 1.0;
  double delta = 0.01;
  std::optional<int64_t> n;
  std::optional<double> lambda;
  std::optional<double> eps_l;
  int64_t trials = 300;
  uint64_t seed = 1;
  std::string alt = "uniform";
  int workers = 1;
  std::string out;
  std::string format = "text";
  int repeat = 1;
  double safety_const = sut::kDefaultSafetyConst;
  std::string grid = "auto";
  int refine_steps = 16;
  std::string matrix;
};

void AddCommonOptions(CLI::App* cmd, RawOptions& o) {
  cmd->add_option("--protocol", o.protocol, "p1, p2 or ldp-only")
      ->capture_default_str();
  cmd->add_option("--k", o.k, "domain size")->capture_default_str();
  cmd->add_option("--alpha", o.alpha, "TV distance parameter")
      ->capture_default_str();
  cmd->add_option("--eps", o.eps, "target privacy eps")->capture_default_str();
  cmd->add_option("--delta", o.delta, "target privacy delta")
      ->capture_default_str();
  cmd->add_option("--n", o.n, "override the planner sample size");
  cmd->add_option("--lambda", o.lambda, "override the p1 noise rate");
  cmd->add_option("--eps-l", o.eps_l, "override the local eps (p2, ldp-only)");
  cmd->add_option("--safety-const", o.safety_const,
                  "constant in the LDP sample-size formula")
      ->capture_default_str();
  cmd->add_option("--format", o.format, "text, json or csv")
      ->capture_default_str();
  cmd->add_option("--out", o.out, "write the report here instead of stdout");
}

void AddTrialOptions(CLI::App* cmd, RawOptions& o) {
  cmd->add_option("--trials", o.trials, "number of trials")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "64-bit master seed")
      ->capture_default_str();
  cmd->add_option("--alt", o.alt, "uniform, paninski:FACTOR or file:PATH")
      ->capture_default_str();
  cmd->add_option("--workers", o.workers, "worker threads")
      ->capture_default_str();
  cmd->add_option("--repeat", o.repeat, "majority vote over R runs per trial")
      ->capture_default_str();
}

struct Error {
  int code;
  std::string message;
};

std::optional<Error> BuildConfig(const RawOptions& o,
                                 sut::ExperimentConfig& c) {
  auto protocol = sut::ParseProtocol(o.protocol);
  if (!protocol.ok()) return Error{kExitValidation, protocol.status().ToString()};
  auto alt = sut::ParseAlternative(o.alt);
  if (!alt.ok()) return Error{kExitValidation, alt.status().ToString()};
  c.protocol = *protocol;
  c.k = o.k;
  c.alpha = o.alpha;
  c.eps = o.eps;
  c.delta = o.delta;
  c.n = o.n;
  c.lambda = o.lambda;
  c.eps_l = o.eps_l;
  c.trials = o.trials;
  c.seed = o.seed;
  c.alternative = *alt;
  c.workers = o.workers;
  c.repeat = o.repeat;
  c.safety_const = o.safety_const;
  c.matrix_path = o.matrix;
  if (absl::Status s = sut::ValidateConfig(c); !s.ok()) {
    return Error{kExitValidation, s.ToString()};
  }
  if (c.alternative.kind == sut::Alternative::Kind::kFile) {
    if (auto p = sut::ResolveAlternative(c, c.alternative); !p.ok()) {
      return Error{kExitValidation, p.status().ToString()};
    }
  }
  if (!c.matrix_path.empty()) {
    if (auto m = sut::LoadMatrixFile(c.matrix_path); !m.ok()) {
      return Error{kExitValidation, m.status().ToString()};
    }
  }
  return std::nullopt;
}

int Emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return 0;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    fmt::print(stderr, "error: cannot write {}\n", path);
    return kExitRuntime;
  }
  return 0;
}

int Fail(const Error& e) {
  fmt::print(stderr, "error: {}\n", e.message);
  return e.code;
}

int Fail(const absl::Status& s) {
  const int code = s.code() == absl::StatusCode::kInvalidArgument
                       ? kExitValidation
                       : kExitRuntime;
  fmt::print(stderr, "error: {}\n", s.ToString());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shuffle-model uniformity testing experiments"};
  app.require_subcommand(1);
  RawOptions o;

  CLI::App* calibrate =
      app.add_subcommand("calibrate", "print calibrated parameters");
  AddCommonOptions(calibrate, o);

  CLI::App* simulate =
      app.add_subcommand("simulate", "run seeded protocol executions");
  AddCommonOptions(simulate, o);
  AddTrialOptions(simulate, o);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "acceptance/rejection rates over a grid of sample sizes");
  AddCommonOptions(sweep, o);
  AddTrialOptions(sweep, o);
  sweep->add_option("--grid", o.grid, "comma-separated n values, or auto")
      ->capture_default_str();
  sweep->add_option("--refine-steps", o.refine_steps,
                    "auto grid points per octave")
      ->capture_default_str();

  CLI::App* moments = app.add_subcommand(
      "moments", "analytic vs Monte Carlo moments of the p1 statistic");
  AddCommonOptions(moments, o);
  AddTrialOptions(moments, o);

  CLI::App* audit = app.add_subcommand("audit", "numeric privacy audit");
  AddCommonOptions(audit, o);
  audit->add_option("--matrix", o.matrix,
                    "custom randomiser: one row of probabilities per input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  const auto format = sut::ParseOutputFormat(o.format);
  if (!format.ok()) return Fail(Error{kExitValidation, format.status().ToString()});
  sut::ExperimentConfig config;
  if (auto err = BuildConfig(o, config)) return Fail(*err);

  if (calibrate->parsed()) {
    const auto cal = sut::Calibrate(config);
    if (!cal.ok()) return Fail(cal.status());
    return Emit(sut::RenderCalibration(*cal, *format), o.out);
  }

  if (simulate->parsed()) {
    const auto report = sut::Simulate(config);
    if (!report.ok()) return Fail(report.status());
    fmt::print(stderr, "wall_time_s {:.3f}\n", report->wall_time_seconds);
    return Emit(sut::RenderTrialReport(*report, *format), o.out);
  }

  if (sweep->parsed()) {
    absl::StatusOr<sut::SweepResult> result;
    if (o.grid == "auto") {
      result = sut::AutoSweep(config, o.refine_steps);
    } else {
      std::vector<int64_t> grid;
      for (absl::string_view tok :
           absl::StrSplit(o.grid, ',', absl::SkipWhitespace())) {
        int64_t n = 0;
        if (!absl::SimpleAtoi(tok, &n) || n < 1) {
          return Fail(Error{kExitValidation,
                            fmt::format("bad grid value '{}'",
                                        std::string(tok))});
        }
        grid.push_back(n);
      }
      if (grid.empty()) {
        return Fail(Error{kExitValidation, "empty --grid"});
      }
      result = sut::Sweep(config, std::move(grid));
    }
    if (!result.ok()) return Fail(result.status());
    return Emit(sut::RenderSweep(*result, config, *format), o.out);
  }

  if (moments->parsed()) {
    const auto m = sut::Moments(config);
    if (!m.ok()) return Fail(m.status());
    return Emit(sut::RenderMoments(*m, config, *format), o.out);
  }

  const auto report = sut::Audit(config);
  if (!report.ok()) return Fail(report.status());
  return Emit(sut::RenderAudit(*report, config, *format), o.out);
}
