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

// Runs the built `sut` binary end to end.

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "nlohmann/json.hpp"

namespace {

using ::testing::HasSubstr;
using ::testing::StartsWith;

struct CliRun {
  int code = -1;
  std::string out;
};

// stderr is discarded so only the report is captured.
CliRun Sut(const std::string& args) {
  const std::string cmd =
      std::string(SUT_CLI_PATH) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  size_t got = 0;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(CliTest, CalibrateText) {
  const CliRun r = Sut("calibrate");
  EXPECT_EQ(r.code, 0);
  EXPECT_THAT(r.out, HasSubstr("lambda"));
  EXPECT_THAT(r.out, HasSubstr("848.629475"));
  EXPECT_THAT(r.out, HasSubstr("35412"));
}

TEST(CliTest, CalibrateJson) {
  const CliRun r = Sut("calibrate --protocol p2 --delta 1e-4 --format json");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("command"), "calibrate");
  EXPECT_EQ(j.at("calibration").at("protocol"), "p2");
  EXPECT_GT(j.at("calibration").at("eps_l").get<double>(), 1);
}

TEST(CliTest, ValidationErrorsExitTwoWithoutOutput) {
  for (const char* args :
       {"calibrate --delta 1.5", "simulate --trials 0", "calibrate --k 0",
        "simulate --alt zipf", "calibrate --format xml",
        "sweep --grid 10,x", "calibrate --no-such-flag", "bogus",
        "simulate --alt file:/nonexistent/pmf.txt",
        "audit --matrix /nonexistent/m.txt"}) {
    const CliRun r = Sut(args);
    EXPECT_EQ(r.code, 2) << args;
    EXPECT_EQ(r.out, "") << args;
  }
}

TEST(CliTest, RuntimeErrorsExitOne) {
  // Amplification is invalid at every n for this target.
  const CliRun r = Sut("calibrate --protocol p2 --eps 3 --delta 1e-4");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(Sut("simulate --n 100 --trials 2 --out /nonexistent/dir/x.json")
                .code,
            1);
}

TEST(CliTest, SimulateJsonIsReproducible) {
  const std::string args =
      "simulate --n 2000 --trials 20 --seed 5 --alt paninski:1.25 "
      "--format json";
  const CliRun a = Sut(args + " --workers 1");
  const CliRun b = Sut(args + " --workers 3");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_EQ(j.at("trials").size(), 20u);
  EXPECT_EQ(j.at("command"), "simulate");
}

TEST(CliTest, SimulateCsvAndOutFile) {
  const std::string path = ::testing::TempDir() + "/trials.csv";
  const CliRun r =
      Sut("simulate --n 500 --trials 3 --format csv --out " + path);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "");
  const std::string csv = ReadFile(path);
  EXPECT_THAT(csv,
              StartsWith("trial,seed,stream,n_users,statistic,verdict,"
                         "votes_reject\n"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(CliTest, SweepGrid) {
  const CliRun r = Sut(
      "sweep --k 4 --lambda 20 --trials 30 --grid 50,100 --format csv");
  ASSERT_EQ(r.code, 0);
  EXPECT_THAT(r.out,
              StartsWith("n,accept_rate_uniform,reject_rate_far,passes\n50,"));
}

TEST(CliTest, MomentsJson) {
  const CliRun r = Sut(
      "moments --k 8 --n 500 --lambda 40 --trials 200 --format json");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("command"), "moments");
  EXPECT_TRUE(j.contains("variance_agrees"));
  EXPECT_EQ(Sut("moments --protocol p2 --delta 1e-4").code, 2);
}

TEST(CliTest, AuditFlagsCustomMatrix) {
  const std::string path = ::testing::TempDir() + "/identity.txt";
  std::ofstream(path) << "1 0\n0 1\n";
  const CliRun r = Sut("audit --matrix " + path);
  EXPECT_EQ(r.code, 0);
  EXPECT_THAT(r.out, HasSubstr("FLAGGED"));
  const CliRun clean = Sut("audit --protocol p2 --delta 1e-4 --format json");
  ASSERT_EQ(clean.code, 0);
  EXPECT_TRUE(nlohmann::json::parse(clean.out).at("all_pass").get<bool>());
}

TEST(CliTest, Help) {
  const CliRun r = Sut("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_THAT(r.out, HasSubstr("calibrate"));
}

}  // namespace
