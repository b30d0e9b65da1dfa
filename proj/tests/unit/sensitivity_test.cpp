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

#include <sstream>

#include <gtest/gtest.h>

#include "builders.hpp"
#include "custody/sensitivity.hpp"
#include "custody/synth.hpp"

namespace custody {
namespace {

using test::pact_cohort;
using test::pact_record;

SensitivityCell with_change(double pct) {
  SensitivityCell c;
  c.relative_change = pct;
  return c;
}

TEST(Sensitivity, NegligibleDisplay) {
  EXPECT_EQ(report_negligible(with_change(0.04)), "<0.1%");
  EXPECT_EQ(report_negligible(with_change(-0.099)), "<0.1%");
  EXPECT_EQ(report_negligible(with_change(0.1)), "0.1%");
  EXPECT_EQ(report_negligible(with_change(22.14)), "22.1%");
  EXPECT_EQ(report_negligible(with_change(-13.24)), "-13.2%");
  EXPECT_EQ(report_negligible(with_change(0.3), 0.5), "<0.5%");
}

TEST(Sensitivity, PlantedStepRuleDecrease) {
  // adj 7 at level 5; -10% gives 6.3, which the rule sends to 2.
  const Cohort c = initial_view(pact_cohort({pact_record({{"ic_institut_adj", 7}}, 5),
                                             pact_record({{"ic_institut_adj", 7}}, 5)}));
  const RandomForest f = test::adj_step_forest(c.schema());
  const auto cells = sensitivity_scan(f, c, {"ic_institut_adj"});
  ASSERT_EQ(cells.size(), 2u);
  const auto& dec = cells[0].direction == Direction::kDecrease ? cells[0] : cells[1];
  const auto& inc = cells[0].direction == Direction::kIncrease ? cells[0] : cells[1];
  EXPECT_EQ(dec.start_level, 5);
  EXPECT_EQ(dec.baseline_mean, 5.0);
  EXPECT_EQ(dec.perturbed_mean, 2.0);
  EXPECT_DOUBLE_EQ(dec.relative_change, 100.0 * (2.0 - 5.0) / 5.0);
  EXPECT_EQ(inc.perturbed_mean, 5.0);
  EXPECT_EQ(inc.relative_change, 0.0);
}

TEST(Sensitivity, ScalingClampsWithoutRounding) {
  // gs 15 * 1.1 clamps to 15; gs 4 * 1.1 = 4.4 stays fractional and crosses 4.2.
  const auto s = pact_schema().restrict_to(Model::kInitial);
  const int gs = static_cast<int>(s.index_of("off_1_gs_max"));
  const RandomForest f = test::single_tree_forest(
      s, {test::split_node(gs, 4.2, 1, 2), test::leaf_node(2),
          test::split_node(gs, 15.5, 3, 4), test::leaf_node(4), test::leaf_node(5)});
  const Cohort c = initial_view(pact_cohort({pact_record({{"off_1_gs_max", 15}}, 4),
                                             pact_record({{"off_1_gs_max", 4}}, 2)}));
  for (const auto& cell : sensitivity_scan(f, c, {"off_1_gs_max"})) {
    if (cell.start_level == 4) {
      EXPECT_EQ(cell.perturbed_mean, 4.0) << to_string(cell.direction);
    } else if (cell.direction == Direction::kIncrease) {
      EXPECT_EQ(cell.perturbed_mean, 4.0);
    } else {
      EXPECT_EQ(cell.perturbed_mean, 2.0);
    }
  }
}

TEST(Sensitivity, ZeroValuesStayZero) {
  const auto s = pact_schema().restrict_to(Model::kInitial);
  const int pc = static_cast<int>(s.index_of("prior_commits"));
  // Any positive value flips the prediction, so a scaled zero must not move.
  const RandomForest f = test::single_tree_forest(
      s, {test::split_node(pc, 0.0, 1, 2), test::leaf_node(3), test::leaf_node(5)});
  const Cohort c = initial_view(pact_cohort({pact_record({{"prior_commits", 0}}, 3)}));
  for (const auto& cell : sensitivity_scan(f, c, {"prior_commits"})) {
    EXPECT_EQ(cell.relative_change, 0.0);
  }
}

TEST(Sensitivity, ConstantForestHasNoEffect) {
  SynthConfig sc;
  sc.n = 1000;
  sc.seed = 3;
  const Cohort c = initial_view(generate_synthetic_cohort(sc));
  const auto cells =
      sensitivity_scan(test::constant_forest(c.schema(), 4), c, default_sensitivity_variables());
  EXPECT_FALSE(cells.empty());
  for (const auto& cell : cells) {
    EXPECT_EQ(cell.relative_change, 0.0);
    EXPECT_EQ(cell.baseline_mean, 4.0);
  }
}

TEST(Sensitivity, GridShapeAndJobs) {
  SynthConfig sc;
  sc.n = 1500;
  sc.seed = 4;
  const Cohort c = initial_view(generate_synthetic_cohort(sc));
  ForestParams p;
  p.n_trees = 8;
  p.seed = 2;
  const RandomForest f = train_forest(c, p);
  const auto vars = default_sensitivity_variables();
  ASSERT_EQ(vars.size(), 4u);
  const auto a = sensitivity_scan(f, c, vars, 0.1, 1);
  const auto b = sensitivity_scan(f, c, vars, 0.1, 5);
  std::set<int> levels;
  for (const auto& r : c.records()) levels.insert(r.custody_level);
  EXPECT_EQ(a.size(), levels.size() * vars.size() * 2);
  std::ostringstream sa, sb;
  write_sensitivity_csv(sa, a);
  write_sensitivity_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  const std::string table = sensitivity_table(a);
  EXPECT_NE(table.find("10% inc. off_1_gs_max"), std::string::npos) << table;
}

TEST(Sensitivity, RejectsCategoricalVariables) {
  const Cohort c = initial_view(pact_cohort({pact_record({}, 2)}));
  const RandomForest f = test::constant_forest(c.schema(), 2);
  EXPECT_THROW(sensitivity_scan(f, c, {"race_B"}), DataError);
  EXPECT_THROW(sensitivity_scan(f, c, {"ic_institut_adj"}, 1.5), std::invalid_argument);
}

}  // namespace
}  // namespace custody
