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

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "builders.hpp"
#include "custody/fairness.hpp"
#include "custody/synth.hpp"

namespace custody {
namespace {

using test::pact_cohort;
using test::pact_record;

TEST(Fairness, FourRecordCounting) {
  const Cohort c = pact_cohort({pact_record({{"race_B", 1}}, 5), pact_record({{"race_B", 1}}, 2),
                                pact_record({}, 4), pact_record({}, 2)});
  const RatePair r = conditional_rate(c, {Decision::kInitialLevelAbove3, ProtectedGroup::kBlack});
  EXPECT_EQ(*r.p_a, 0.5);
  EXPECT_EQ(*r.p_not_a, 0.5);
  EXPECT_EQ(r.n_a, 2u);
  EXPECT_EQ(r.hits_a, 1u);
  EXPECT_FALSE(r.undefined());
}

TEST(Fairness, EmptyGroupIsUndefined) {
  const Cohort c = pact_cohort({pact_record({}, 5), pact_record({}, 2)});
  const RatePair r =
      conditional_rate(c, {Decision::kInitialLevelAbove3, ProtectedGroup::kHispanic});
  EXPECT_FALSE(r.p_a);
  EXPECT_EQ(*r.p_not_a, 0.5);
  EXPECT_TRUE(r.undefined());
}

TEST(Fairness, OverrideExcludesMissingFlags) {
  Record a = pact_record({{"gender_female", 1}, {"ic_institut_adj", 5}}, 3);
  a.override_to_higher = true;
  Record b = pact_record({{"ic_institut_adj", 1}}, 3);
  b.override_to_higher = false;
  Record c = pact_record({{"ic_institut_adj", 4}}, 3);  // no recorded override
  Record d = pact_record({{"ic_institut_adj", 3}}, 3);
  d.override_to_higher = true;
  const Cohort cohort = pact_cohort({a, b, c, d});
  const RatePair r =
      conditional_rate(cohort, {Decision::kOverrideToHigher, ProtectedGroup::kFemale});
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(*r.p_a, 1.0);
  EXPECT_EQ(*r.p_not_a, 0.5);
  const RatePair given =
      conditional_rate(cohort, {Decision::kOverrideToHigher, ProtectedGroup::kFemale, true});
  // b fails the adj > 2 condition; c is excluded.
  EXPECT_EQ(given.n_a + given.n_not_a, 2u);
  EXPECT_EQ(given.excluded, 1u);
  EXPECT_EQ(*given.p_not_a, 1.0);
}

TEST(Fairness, AdjustmentAndAgeGroups) {
  const Cohort c = pact_cohort({pact_record({{"age_gt_45", 1}, {"age", 50}, {"ic_institut_adj", 3}}),
                                pact_record({{"ic_institut_adj", 2}}),
                                pact_record({{"ic_institut_adj", 9}})});
  const RatePair r =
      conditional_rate(c, {Decision::kInstitutionalAdjAbove2, ProtectedGroup::kAgeOver45});
  EXPECT_EQ(*r.p_a, 1.0);
  EXPECT_EQ(*r.p_not_a, 0.5);
  // Without the band indicator the numeric age decides.
  const Cohort re = reclass_view(c);
  EXPECT_TRUE(in_group(re.schema(), re[0], ProtectedGroup::kAgeOver45));
  EXPECT_FALSE(in_group(re.schema(), re[1], ProtectedGroup::kAgeOver45));
}

TEST(Fairness, DecisionTableShape) {
  SynthConfig sc;
  sc.n = 500;
  sc.seed = 3;
  const auto rows = decision_table(generate_synthetic_cohort(sc));
  ASSERT_EQ(rows.size(), 16u);
  std::size_t conditioned = 0;
  for (const auto& r : rows) conditioned += r.query.given_high_adjustment ? 1 : 0;
  EXPECT_EQ(conditioned, 4u);
  std::ostringstream out;
  write_fairness_csv(out, rows);
  EXPECT_NE(out.str().find("override_to_higher|institutional_adjustment>2,Black"),
            std::string::npos);
}

TEST(Fairness, RaceIndependentLevelsGiveEqualRates) {
  SynthConfig sc;
  sc.n = 50000;
  sc.seed = 17;
  const Cohort c = generate_synthetic_cohort(sc);
  const RatePair r = conditional_rate(c, {Decision::kInitialLevelAbove3, ProtectedGroup::kBlack});
  EXPECT_NEAR(*r.p_a, *r.p_not_a, 0.02);
}

TEST(Fairness, MemorizingForestHasPredictiveParity) {
  SynthConfig sc;
  sc.n = 800;
  sc.seed = 5;
  sc.noise = 0.0;
  const Cohort c = initial_view(generate_synthetic_cohort(sc));
  const RandomForest f = test::memorizing_forest(c);
  for (auto g : {ProtectedGroup::kBlack, ProtectedGroup::kHispanic, ProtectedGroup::kAgeOver45,
                 ProtectedGroup::kFemale}) {
    const RatePair model = predictive_parity(f, c, g);
    const RatePair data = conditional_rate(c, {Decision::kInitialLevelAbove3, g});
    EXPECT_EQ(*model.p_a, *data.p_a) << to_string(g);
    EXPECT_EQ(*model.p_not_a, *data.p_not_a) << to_string(g);
    const ParityGap gap = parity_gap(model, data);
    EXPECT_EQ(*gap.gap_a, 0.0);
  }
}

TEST(Fairness, ParityGapArithmetic) {
  RatePair model, data;
  model.p_a = 0.56;
  model.p_not_a = 0.28;
  data.p_a = 0.55;
  data.p_not_a = 0.29;
  const ParityGap g = parity_gap(model, data);
  EXPECT_NEAR(*g.gap_a, 0.01, 1e-12);
  EXPECT_NEAR(*g.gap_not_a, 0.01, 1e-12);
  data.p_a.reset();
  EXPECT_FALSE(parity_gap(model, data).gap_a);
}

TEST(Fairness, PredictiveParityNeedsBothGroups) {
  const Cohort c = initial_view(pact_cohort({pact_record({}, 5), pact_record({}, 2)}));
  EXPECT_THROW(predictive_parity(test::constant_forest(c.schema(), 4), c, ProtectedGroup::kBlack),
               DataError);
  EXPECT_THROW(conditional_rate(c, {Decision::kPredictedAbove3, ProtectedGroup::kBlack}),
               std::invalid_argument);
}

}  // namespace
}  // namespace custody
