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

#include <gtest/gtest.h>

#include "custody/schema.hpp"

namespace custody {
namespace {

TEST(Schema, TableOneVariablesInOrder) {
  const auto s = pact_schema();
  const std::vector<std::string> expected = {
      "gender_female", "age_gt_45",     "age_lt_25",       "age",
      "race_B",        "race_A",        "race_H",          "race_I",
      "race_O",        "off_1_prs_max", "off_1_gs_max",    "ic_custdy_level",
      "prior_commits", "ic_institut_adj", "re_discip_reports", "escape_hist_1",
      "escape_hist_2", "escape_hist_3", "escape_hist_4",   "escape_hist_5",
      "mrt_stat_DIV",  "mrt_stat_SEP",  "mrt_stat_MAR",    "mrt_stat_WID",
      "employed"};
  ASSERT_EQ(s.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(s.variable(i).name, expected[i]);
}

TEST(Schema, DomainsFromVariableDefinitions) {
  const auto s = pact_schema();
  const auto& gs = s.variable(s.index_of("off_1_gs_max")).domain;
  EXPECT_TRUE(gs.contains(1));
  EXPECT_TRUE(gs.contains(15));
  EXPECT_FALSE(gs.contains(16));
  EXPECT_FALSE(gs.contains(2.5));
  const auto& prs = s.variable(s.index_of("off_1_prs_max")).domain;
  EXPECT_TRUE(prs.contains(4));
  EXPECT_FALSE(prs.contains(0));
  EXPECT_FALSE(prs.contains(5));
  const auto& commits = s.variable(s.index_of("prior_commits")).domain;
  EXPECT_TRUE(commits.contains(250));
  EXPECT_FALSE(commits.contains(-1));
  EXPECT_DOUBLE_EQ(gs.clamp(16.5), 15.0);
  EXPECT_DOUBLE_EQ(gs.clamp(0.2), 1.0);
}

TEST(Schema, ModelViewsFollowTableOneColumns) {
  const auto s = pact_schema();
  const auto ic = s.restrict_to(Model::kInitial);
  const auto re = s.restrict_to(Model::kReclassification);
  EXPECT_EQ(ic.size(), 22u);
  EXPECT_EQ(re.size(), 17u);
  EXPECT_TRUE(re.has("age"));
  EXPECT_TRUE(re.has("ic_custdy_level"));
  EXPECT_TRUE(re.has("re_discip_reports"));
  EXPECT_FALSE(re.has("age_lt_25"));
  EXPECT_FALSE(re.has("age_gt_45"));
  EXPECT_FALSE(re.has("mrt_stat_MAR"));
  EXPECT_FALSE(re.has("employed"));
  EXPECT_FALSE(ic.has("age"));
  EXPECT_FALSE(ic.has("re_discip_reports"));
  EXPECT_TRUE(ic.has("ic_institut_adj"));
}

TEST(Schema, SamplingUnitsTreatOneHotGroupsAtomically) {
  const auto s = pact_schema();
  const auto race = s.find_unit("race");
  ASSERT_TRUE(race);
  const auto& u = s.units()[*race];
  EXPECT_TRUE(u.is_group);
  EXPECT_EQ(u.columns.size(), 5u);
  EXPECT_EQ(u.label(0), "White");
  EXPECT_EQ(u.label(1), "Black");
  // gender, age band, age, race, prs, gs, ic level, commits, adj, discip,
  // escape, marital, employed
  EXPECT_EQ(s.units().size(), 13u);

  std::vector<double> values(s.size(), 0.0);
  u.write(3, values);  // Hispanic
  EXPECT_EQ(values[s.index_of("race_H")], 1.0);
  EXPECT_EQ(u.read(values), 3.0);
  u.write(0, values);
  EXPECT_EQ(values[s.index_of("race_H")], 0.0);
  EXPECT_EQ(u.read(values), 0.0);
}

TEST(Schema, FingerprintIsStableAndDiscriminating) {
  const auto a = pact_schema().fingerprint();
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a, pact_schema().fingerprint());
  EXPECT_NE(a, pact_schema().restrict_to(Model::kInitial).fingerprint());
  EXPECT_NE(pact_schema().restrict_to(Model::kInitial).fingerprint(),
            pact_schema().restrict_to(Model::kReclassification).fingerprint());
}

TEST(Schema, UnknownNameIsDataError) {
  EXPECT_THROW(pact_schema().index_of("shoe_size"), DataError);
}

}  // namespace
}  // namespace custody
