/*
 * Copyright 2026 The Custody Audit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "custody/cli.hpp"
#include "custody/format.hpp"

namespace custody {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "custody-audit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("custody_cli_" + std::string(::testing::UnitTest::GetInstance()
                                             ->current_test_info()
                                             ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli({"perturb", "--seed", "1", "--experiment", "9"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"synth", "--n", "10"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, BadCohortExitsTwo) {
  std::ofstream(path("bad.csv")) << "age,gender_female\n30,2\n";
  const Outcome o = run_cli({"train", "--seed", "1", "--cohort", path("bad.csv"), "--out",
                             path("f.json")});
  EXPECT_EQ(o.code, cli::kExitData);
  EXPECT_NE(o.err.find("data error"), std::string::npos);
  EXPECT_EQ(run_cli({"evaluate", "--cohort", path("missing.csv"), "--forest", path("f.json")})
                .code,
            cli::kExitData);
}

TEST_F(CliTest, SynthIsReproducible) {
  ASSERT_EQ(run_cli({"synth", "--seed", "5", "--n", "200", "--out", path("a.csv")}).code, 0);
  ASSERT_EQ(run_cli({"synth", "--seed", "5", "--n", "200", "--out", path("b.csv")}).code, 0);
  ASSERT_EQ(run_cli({"synth", "--seed", "6", "--n", "200", "--out", path("c.csv")}).code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(CliTest, PerturbCountsSumToN) {
  const Outcome o = run_cli({"perturb", "--seed", "3", "--experiment", "1", "--cohort-n", "600",
                             "--trees", "5", "--n", "100", "--out", dir_.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  std::istringstream csv(slurp(dir_ / "e1_deltas.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "stratum,delta,count,n");
  std::map<std::string, long> sums;
  while (std::getline(csv, line)) {
    const auto cells = split(line, ',');
    ASSERT_EQ(cells.size(), 4u);
    sums[cells[0]] += std::stol(cells[2]);
    EXPECT_EQ(cells[3], "100");
  }
  ASSERT_FALSE(sums.empty());
  for (const auto& [stratum, total] : sums) EXPECT_EQ(total, 100) << stratum;
}

TEST_F(CliTest, ConfigFileAndFlagsMerge) {
  std::ofstream(path("run.cfg")) << "# synth settings\nseed = 9\nn = 50\nnoise = 0\n";
  ASSERT_EQ(run_cli({"synth", "--config", path("run.cfg"), "--out", path("cfg.csv")}).code, 0);
  ASSERT_EQ(run_cli({"synth", "--seed", "9", "--n", "50", "--noise", "0", "--out",
                     path("flags.csv")}).code,
            0);
  EXPECT_EQ(slurp(path("cfg.csv")), slurp(path("flags.csv")));
  // A flag on the command line wins over the file.
  ASSERT_EQ(run_cli({"synth", "--config", path("run.cfg"), "--n", "20", "--out",
                     path("short.csv")}).code,
            0);
  std::istringstream rows(slurp(path("short.csv")));
  std::string line;
  std::size_t n = 0;
  while (std::getline(rows, line)) ++n;
  EXPECT_EQ(n, 21u);
  std::ofstream(path("typo.cfg")) << "sede = 9\n";
  EXPECT_EQ(run_cli({"synth", "--config", path("typo.cfg")}).code, cli::kExitUsage);
}

TEST_F(CliTest, TrainEvaluateImportance) {
  ASSERT_EQ(run_cli({"synth", "--seed", "2", "--n", "400", "--out", path("c.csv")}).code, 0);
  ASSERT_EQ(run_cli({"train", "--seed", "2", "--cohort", path("c.csv"), "--trees", "5",
                     "--out", path("f.json")}).code,
            0);
  const Outcome ev = run_cli({"evaluate", "--cohort", path("c.csv"), "--forest", path("f.json")});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("accuracy"), std::string::npos);
  ASSERT_EQ(run_cli({"importance", "--forest", path("f.json"), "--out", path("imp.csv")}).code,
            0);
  EXPECT_EQ(slurp(path("imp.csv")).substr(0, 20), "rank,variable,weight");
}

TEST_F(CliTest, ReportRegeneratesFigures) {
  const Outcome a = run_cli({"audit", "--seed", "4", "--cohort-n", "800", "--trees", "4",
                             "--perturb-n", "10", "--per-group", "2", "--average-per-group",
                             "2", "--race-per-group", "2", "--sample", "20", "--out",
                             dir_.string()});
  ASSERT_EQ(a.code, 0) << a.err;
  const fs::path figs = dir_ / "figs";
  const Outcome r = run_cli({"report", "--report", (dir_ / "audit-report.json").string(),
                             "--out", figs.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(figs / "fig3_e1_delta_histogram.csv"),
            slurp(dir_ / "fig3_e1_delta_histogram.csv"));
  std::ofstream(path("junk.json")) << "{}";
  EXPECT_EQ(run_cli({"report", "--report", path("junk.json")}).code, cli::kExitData);
}

}  // namespace
}  // namespace custody
