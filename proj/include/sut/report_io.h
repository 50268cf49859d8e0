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

// Text, JSON and CSV renderings of harness reports, plus the parsers used to
// round-trip trial reports.
//
// Doubles are written in shortest round-trip form, so parsing a report back
// reproduces every value bit for bit. The worker count and wall time are
// deliberately left out: serialized reports depend only on (seed, config).

#ifndef SUT_REPORT_IO_H_
#define SUT_REPORT_IO_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "fmt/core.h"
#include "nlohmann/json.hpp"
#include "sut/harness.h"

namespace sut {

enum class OutputFormat { kText, kJson, kCsv };

inline absl::StatusOr<OutputFormat> ParseOutputFormat(absl::string_view s) {
  if (s == "text") return OutputFormat::kText;
  if (s == "json") return OutputFormat::kJson;
  if (s == "csv") return OutputFormat::kCsv;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown format '", s, "' (want text, json or csv)"));
}

namespace internal {

using nlohmann::json;

template <typename T>
json OptionalToJson(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> OptionalFromJson(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

inline std::string Num(double v) { return fmt::format("{}", v); }

}  // namespace internal

inline nlohmann::json ConfigToJson(const ExperimentConfig& c) {
  using internal::OptionalToJson;
  return {{"protocol", std::string(ProtocolName(c.protocol))},
          {"k", c.k},
          {"alpha", c.alpha},
          {"eps", c.eps},
          {"delta", c.delta},
          {"n", OptionalToJson(c.n)},
          {"lambda", OptionalToJson(c.lambda)},
          {"eps_l", OptionalToJson(c.eps_l)},
          {"trials", c.trials},
          {"seed", c.seed},
          {"alternative", c.alternative.ToString()},
          {"repeat", c.repeat},
          {"safety_const", c.safety_const}};
}

inline absl::StatusOr<ExperimentConfig> ConfigFromJson(const nlohmann::json& j) {
  using internal::OptionalFromJson;
  ExperimentConfig c;
  SUT_ASSIGN_OR_RETURN(c.protocol,
                       ParseProtocol(j.at("protocol").get<std::string>()));
  c.k = j.at("k").get<size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.eps = j.at("eps").get<double>();
  c.delta = j.at("delta").get<double>();
  c.n = OptionalFromJson<int64_t>(j.at("n"));
  c.lambda = OptionalFromJson<double>(j.at("lambda"));
  c.eps_l = OptionalFromJson<double>(j.at("eps_l"));
  c.trials = j.at("trials").get<int64_t>();
  c.seed = j.at("seed").get<uint64_t>();
  SUT_ASSIGN_OR_RETURN(
      c.alternative,
      ParseAlternative(j.at("alternative").get<std::string>()));
  c.repeat = j.at("repeat").get<int>();
  c.safety_const = j.at("safety_const").get<double>();
  return c;
}

inline nlohmann::json CalibrationToJson(const Calibration& cal) {
  using internal::OptionalToJson;
  nlohmann::json j = {{"protocol", std::string(ProtocolName(cal.protocol))},
                      {"k", cal.k},
                      {"alpha", cal.alpha},
                      {"eps", cal.eps},
                      {"delta", cal.delta},
                      {"planner_n", cal.planner_n},
                      {"n", cal.n}};
  if (cal.protocol == ProtocolKind::kP1) {
    j["lambda"] = cal.lambda;
    j["mu"] = cal.mu;
    j["tau"] = cal.tau;
  } else {
    j["eps_l"] = cal.eps_l;
    j["a"] = cal.a;
    j["b"] = cal.b;
    j["output_size"] = cal.output_size;
    j["s"] = cal.s;
    j["gamma_l2_sq"] = cal.gamma_l2_sq;
    j["message_bits"] = cal.message_bits;
    j["realized_eps_bound"] = OptionalToJson(cal.realized_eps_bound);
  }
  nlohmann::json robust = nlohmann::json::array();
  for (const RobustSample& r : cal.robust) {
    nlohmann::json row = {{"gamma", r.gamma},
                          {"eps_bar", r.eps_bar},
                          {"delta_bar", r.delta_bar}};
    if (cal.protocol == ProtocolKind::kP2) {
      row["amplified_eps"] = OptionalToJson(r.amplified_eps);
    }
    robust.push_back(std::move(row));
  }
  j["robust"] = std::move(robust);
  return j;
}

inline absl::StatusOr<Calibration> CalibrationFromJson(
    const nlohmann::json& j) {
  using internal::OptionalFromJson;
  Calibration cal;
  SUT_ASSIGN_OR_RETURN(cal.protocol,
                       ParseProtocol(j.at("protocol").get<std::string>()));
  cal.k = j.at("k").get<size_t>();
  cal.alpha = j.at("alpha").get<double>();
  cal.eps = j.at("eps").get<double>();
  cal.delta = j.at("delta").get<double>();
  cal.planner_n = j.at("planner_n").get<int64_t>();
  cal.n = j.at("n").get<int64_t>();
  if (cal.protocol == ProtocolKind::kP1) {
    cal.lambda = j.at("lambda").get<double>();
    cal.mu = j.at("mu").get<double>();
    cal.tau = j.at("tau").get<double>();
  } else {
    cal.eps_l = j.at("eps_l").get<double>();
    cal.a = j.at("a").get<size_t>();
    cal.b = j.at("b").get<size_t>();
    cal.output_size = j.at("output_size").get<size_t>();
    cal.s = j.at("s").get<size_t>();
    cal.gamma_l2_sq = j.at("gamma_l2_sq").get<double>();
    cal.message_bits = j.at("message_bits").get<int>();
    cal.realized_eps_bound =
        OptionalFromJson<double>(j.at("realized_eps_bound"));
  }
  for (const auto& row : j.at("robust")) {
    RobustSample r;
    r.gamma = row.at("gamma").get<double>();
    r.eps_bar = row.at("eps_bar").get<double>();
    r.delta_bar = row.at("delta_bar").get<double>();
    if (row.contains("amplified_eps")) {
      r.amplified_eps = OptionalFromJson<double>(row.at("amplified_eps"));
    }
    cal.robust.push_back(r);
  }
  return cal;
}

inline nlohmann::json TrialRecordToJson(const TrialRecord& r) {
  return {{"trial", r.trial},
          {"seed", r.seed},
          {"stream", r.stream},
          {"n_users", r.n_users},
          {"statistic", r.statistic},
          {"verdict", std::string(VerdictName(r.verdict))},
          {"votes_reject", r.votes_reject}};
}

inline absl::StatusOr<Verdict> ParseVerdict(absl::string_view s) {
  for (Verdict v : {Verdict::kUniform, Verdict::kNotUniform}) {
    if (s == VerdictName(v)) return v;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown verdict '", s, "'"));
}

inline nlohmann::json AggregatesToJson(const Aggregates& a) {
  return {{"trials", a.trials},
          {"accepted", a.accepted},
          {"accept_rate", a.accept_rate},
          {"reject_rate", 1.0 - a.accept_rate},
          {"statistic_mean", a.statistic_mean},
          {"statistic_variance", a.statistic_variance}};
}

inline nlohmann::json TrialReportToJson(const TrialReport& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const TrialRecord& t : r.records) trials.push_back(TrialRecordToJson(t));
  return {{"schema_version", r.schema_version},
          {"command", "simulate"},
          {"config", ConfigToJson(r.config)},
          {"calibration", CalibrationToJson(r.calibration)},
          {"aggregates", AggregatesToJson(r.aggregates)},
          {"trials", std::move(trials)}};
}

inline absl::StatusOr<TrialReport> TrialReportFromJson(absl::string_view text) {
  try {
    const nlohmann::json j =
        nlohmann::json::parse(text.begin(), text.end());
    TrialReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kSchemaVersion) {
      return absl::InvalidArgumentError(
          absl::StrCat("unsupported schema_version ", r.schema_version));
    }
    SUT_ASSIGN_OR_RETURN(r.config, ConfigFromJson(j.at("config")));
    SUT_ASSIGN_OR_RETURN(r.calibration,
                         CalibrationFromJson(j.at("calibration")));
    for (const auto& t : j.at("trials")) {
      TrialRecord rec;
      rec.trial = t.at("trial").get<int64_t>();
      rec.seed = t.at("seed").get<uint64_t>();
      rec.stream = t.at("stream").get<uint64_t>();
      rec.n_users = t.at("n_users").get<int64_t>();
      rec.statistic = t.at("statistic").get<double>();
      SUT_ASSIGN_OR_RETURN(rec.verdict,
                           ParseVerdict(t.at("verdict").get<std::string>()));
      rec.votes_reject = t.at("votes_reject").get<int>();
      r.records.push_back(rec);
    }
    const auto& a = j.at("aggregates");
    r.aggregates.trials = a.at("trials").get<int64_t>();
    r.aggregates.accepted = a.at("accepted").get<int64_t>();
    r.aggregates.accept_rate = a.at("accept_rate").get<double>();
    r.aggregates.statistic_mean = a.at("statistic_mean").get<double>();
    r.aggregates.statistic_variance = a.at("statistic_variance").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed report JSON: ", e.what()));
  }
}

inline constexpr char kTrialCsvHeader[] =
    "trial,seed,stream,n_users,statistic,verdict,votes_reject";

inline std::string TrialRecordsToCsv(const std::vector<TrialRecord>& records) {
  std::string out = absl::StrCat(kTrialCsvHeader, "\n");
  for (const TrialRecord& r : records) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.trial, r.seed, r.stream,
                       r.n_users, internal::Num(r.statistic),
                       VerdictName(r.verdict), r.votes_reject);
  }
  return out;
}

inline absl::StatusOr<std::vector<TrialRecord>> TrialRecordsFromCsv(
    absl::string_view text) {
  std::vector<absl::string_view> lines =
      absl::StrSplit(text, '\n', absl::SkipEmpty());
  if (lines.empty() || lines.front() != kTrialCsvHeader) {
    return absl::InvalidArgumentError("trial CSV: missing header");
  }
  std::vector<TrialRecord> records;
  for (size_t i = 1; i < lines.size(); ++i) {
    const std::vector<absl::string_view> f = absl::StrSplit(lines[i], ',');
    TrialRecord r;
    if (f.size() != 7 || !absl::SimpleAtoi(f[0], &r.trial) ||
        !absl::SimpleAtoi(f[1], &r.seed) ||
        !absl::SimpleAtoi(f[2], &r.stream) ||
        !absl::SimpleAtoi(f[3], &r.n_users) ||
        !absl::SimpleAtod(f[4], &r.statistic) ||
        !absl::SimpleAtoi(f[6], &r.votes_reject)) {
      return absl::InvalidArgumentError(
          absl::StrCat("trial CSV: bad row ", i + 1));
    }
    SUT_ASSIGN_OR_RETURN(r.verdict, ParseVerdict(f[5]));
    records.push_back(r);
  }
  return records;
}

inline std::string RenderCalibration(const Calibration& cal,
                                     OutputFormat format) {
  if (format == OutputFormat::kJson) {
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"command", "calibrate"},
                          {"calibration", CalibrationToJson(cal)}}
               .dump(2) +
           "\n";
  }
  // Flattened key/value view shared by text and CSV.
  std::vector<std::pair<std::string, std::string>> kv;
  const nlohmann::json j = CalibrationToJson(cal);
  for (const auto& [key, value] : j.items()) {
    if (key == "robust") continue;
    kv.emplace_back(key, value.is_string() ? value.get<std::string>()
                                           : value.dump());
  }
  for (const RobustSample& r : cal.robust) {
    const std::string g = internal::Num(r.gamma);
    kv.emplace_back(absl::StrCat("robust[", g, "].eps_bar"),
                    internal::Num(r.eps_bar));
    kv.emplace_back(absl::StrCat("robust[", g, "].delta_bar"),
                    internal::Num(r.delta_bar));
    if (cal.protocol == ProtocolKind::kP2) {
      kv.emplace_back(absl::StrCat("robust[", g, "].amplified_eps"),
                      r.amplified_eps ? internal::Num(*r.amplified_eps)
                                      : "invalid");
    }
  }
  std::string out = format == OutputFormat::kCsv ? "key,value\n" : "";
  for (const auto& [k, v] : kv) {
    out += format == OutputFormat::kCsv ? fmt::format("{},{}\n", k, v)
                                        : fmt::format("{:<28} {}\n", k, v);
  }
  return out;
}

inline std::string RenderTrialReport(const TrialReport& r,
                                     OutputFormat format) {
  switch (format) {
    case OutputFormat::kJson:
      return TrialReportToJson(r).dump(2) + "\n";
    case OutputFormat::kCsv:
      return TrialRecordsToCsv(r.records);
    case OutputFormat::kText:
      break;
  }
  const Aggregates& a = r.aggregates;
  std::string out = fmt::format(
      "protocol {}  k={}  alpha={}  eps={}  delta={}  n={}  "
      "alternative={}\n",
      ProtocolName(r.config.protocol), r.config.k, r.config.alpha,
      r.config.eps, r.config.delta, r.calibration.n,
      r.config.alternative.ToString());
  out += fmt::format("trials            {}\n", a.trials);
  out += fmt::format("accepted          {}\n", a.accepted);
  out += fmt::format("accept_rate       {:.4f}\n", a.accept_rate);
  out += fmt::format("reject_rate       {:.4f}\n", 1 - a.accept_rate);
  out += fmt::format("statistic_mean    {:.6g}\n", a.statistic_mean);
  out += fmt::format("statistic_var     {:.6g}\n", a.statistic_variance);
  return out;
}

inline std::string RenderSweep(const SweepResult& s,
                               const ExperimentConfig& c,
                               OutputFormat format) {
  if (format == OutputFormat::kJson) {
    nlohmann::json rows = nlohmann::json::array();
    for (const SweepRow& r : s.rows) {
      rows.push_back({{"n", r.n},
                      {"accept_rate_uniform", r.accept_rate_uniform},
                      {"reject_rate_far", r.reject_rate_far},
                      {"passes", r.Passes()}});
    }
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"command", "sweep"},
                          {"config", ConfigToJson(c)},
                          {"planner_n", s.planner_n},
                          {"n_star", internal::OptionalToJson(s.n_star)},
                          {"n_star_isotonic",
                           internal::OptionalToJson(s.n_star_isotonic)},
                          {"rows", std::move(rows)}}
               .dump(2) +
           "\n";
  }
  std::string out;
  if (format == OutputFormat::kCsv) {
    out = "n,accept_rate_uniform,reject_rate_far,passes\n";
    for (const SweepRow& r : s.rows) {
      out += fmt::format("{},{},{},{}\n", r.n,
                         internal::Num(r.accept_rate_uniform),
                         internal::Num(r.reject_rate_far), r.Passes());
    }
    return out;
  }
  out = fmt::format("{:>12} {:>10} {:>10}\n", "n", "acc(U)", "rej(far)");
  for (const SweepRow& r : s.rows) {
    out += fmt::format("{:>12} {:>10.4f} {:>10.4f}{}\n", r.n,
                       r.accept_rate_uniform, r.reject_rate_far,
                       r.Passes() ? "  *" : "");
  }
  out += fmt::format("planner_n {}\n", s.planner_n);
  out += s.n_star ? fmt::format("n_star    {}\n", *s.n_star)
                  : std::string("n_star    none\n");
  out += s.n_star_isotonic
             ? fmt::format("n_star_isotonic {}\n", *s.n_star_isotonic)
             : std::string("n_star_isotonic none\n");
  return out;
}

inline std::string RenderMoments(const MomentsReport& m,
                                 const ExperimentConfig& c,
                                 OutputFormat format) {
  const std::vector<std::pair<std::string, double>> kv = {
      {"trials", static_cast<double>(m.trials)},
      {"expected_mean", m.expected_mean},
      {"empirical_mean", m.empirical_mean},
      {"mean_standard_error", m.mean_standard_error},
      {"expected_variance", m.expected_variance},
      {"empirical_variance", m.empirical_variance},
      {"variance_standard_error", m.variance_standard_error}};
  if (format == OutputFormat::kJson) {
    nlohmann::json j = {{"schema_version", kSchemaVersion},
                        {"command", "moments"},
                        {"config", ConfigToJson(c)}};
    for (const auto& [k, v] : kv) j[k] = v;
    j["trials"] = m.trials;
    j["mean_agrees"] = m.MeanAgrees();
    j["variance_agrees"] = m.VarianceAgrees();
    return j.dump(2) + "\n";
  }
  std::string out = format == OutputFormat::kCsv ? "key,value\n" : "";
  for (const auto& [k, v] : kv) {
    out += format == OutputFormat::kCsv
               ? fmt::format("{},{}\n", k, internal::Num(v))
               : fmt::format("{:<24} {:.8g}\n", k, v);
  }
  const char* sep = format == OutputFormat::kCsv ? "," : "          ";
  out += fmt::format("mean_agrees{}{}\n", sep, m.MeanAgrees());
  out += fmt::format("variance_agrees{}{}\n",
                     format == OutputFormat::kCsv ? "," : "      ",
                     m.VarianceAgrees());
  return out;
}

inline std::string RenderAudit(const AuditReport& a, const ExperimentConfig& c,
                               OutputFormat format) {
  if (format == OutputFormat::kJson) {
    nlohmann::json checks = nlohmann::json::array();
    for (const AuditCheck& ch : a.checks) {
      checks.push_back({{"name", ch.name},
                        {"value", ch.value},
                        {"bound", ch.bound},
                        {"pass", ch.pass}});
    }
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"command", "audit"},
                          {"config", ConfigToJson(c)},
                          {"all_pass", a.AllPass()},
                          {"checks", std::move(checks)}}
               .dump(2) +
           "\n";
  }
  std::string out;
  if (format == OutputFormat::kCsv) {
    out = "name,value,bound,pass\n";
    for (const AuditCheck& ch : a.checks) {
      out += fmt::format("{},{},{},{}\n", ch.name, internal::Num(ch.value),
                         internal::Num(ch.bound), ch.pass);
    }
    return out;
  }
  for (const AuditCheck& ch : a.checks) {
    out += fmt::format("{:<36} {:>14.6g} <= {:<14.6g} {}\n", ch.name, ch.value,
                       ch.bound, ch.pass ? "ok" : "FLAGGED");
  }
  return out;
}

}  // namespace sut

#endif  // SUT_REPORT_IO_H_
