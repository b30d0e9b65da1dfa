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
#include "custody/perturb.hpp"
#include "custody/synth.hpp"

namespace custody {
namespace {

using test::pact_cohort;
using test::pact_record;

Cohort synthetic_initial(std::size_t n, std::uint64_t seed) {
  SynthConfig c;
  c.n = n;
  c.seed = seed;
  return initial_view(generate_synthetic_cohort(c));
}

RandomForest small_forest(const Cohort& c) {
  ForestParams p;
  p.n_trees = 10;
  p.seed = 4;
  return train_forest(c, p);
}

TEST(Perturb, ExperimentNumbers) {
  EXPECT_EQ(experiment_from_int(3), Experiment::kE3);
  EXPECT_THROW(experiment_from_int(0), std::invalid_argument);
  EXPECT_THROW(experiment_from_int(9), std::invalid_argument);
}

TEST(Perturb, ZScore) {
  EXPECT_NEAR(z_score(0.95), 1.959964, 1e-6);
  EXPECT_NEAR(z_score(0.90), 1.644854, 1e-6);
  EXPECT_THROW(z_score(1.0), std::invalid_argument);
}

TEST(Perturb, MarginOfErrorHandComputed) {
  const Cohort s = pact_cohort({pact_record({{"off_1_gs_max", 10}}),
                                pact_record({{"off_1_gs_max", 12}}),
                                pact_record({{"off_1_gs_max", 14}})});
  const auto moe = margins_of_error(s, 0.95);
  const auto gs = s.schema().index_of("off_1_gs_max");
  // s = 2, n = 3
  EXPECT_NEAR(moe[gs], 1.959964 * 2.0 / std::sqrt(3.0), 1e-6);
  EXPECT_NEAR(moe[gs], 2.263, 1e-3);
  EXPECT_EQ(moe[s.schema().index_of("race_B")], 0.0);
  EXPECT_EQ(moe[s.schema().index_of("prior_commits")], 0.0);
  EXPECT_THROW(margins_of_error(pact_cohort({pact_record({})}), 0.95), DataError);
}

TEST(Perturb, E5StaysInsideClampedInterval) {
  const Cohort s = initial_view(pact_cohort({pact_record({{"off_1_gs_max", 10}}, 3),
                                             pact_record({{"off_1_gs_max", 12}}, 3),
                                             pact_record({{"off_1_gs_max", 14}, {"race_B", 1}}, 3),
                                             pact_record({{"off_1_gs_max", 15}}, 3)}));
  const auto& schema = s.schema();
  const auto moe = margins_of_error(s, 0.95);
  RngStream rng(3);
  for (int i = 0; i < 2000; ++i) {
    const Record& base = s[static_cast<std::size_t>(i) % s.size()];
    const Record out = sample_e5(base, schema, moe, rng);
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& spec = schema.variable(c);
      if (!spec.quantitative()) {
        ASSERT_EQ(out.values[c], base.values[c]) << spec.name;
        continue;
      }
      ASSERT_TRUE(spec.domain.contains(out.values[c])) << spec.name;
      ASSERT_GE(out.values[c], std::nearbyint(base.values[c] - moe[c]) - 1e-12) << spec.name;
      ASSERT_LE(out.values[c], std::nearbyint(base.values[c] + moe[c]) + 1e-12) << spec.name;
    }
  }
}

TEST(Perturb, E2RedrawChangesAtMostOneUnit) {
  const Cohort s = synthetic_initial(300, 5);
  const Cohort stratum = select(s, StratumKey{4, std::nullopt});
  const auto bags = multisets(stratum);
  RngStream rng(8);
  std::size_t coincident = 0;
  for (int i = 0; i < 500; ++i) {
    const Record& base = stratum[static_cast<std::size_t>(i) % stratum.size()];
    const auto change = sample_e2(base, bags, stratum.schema(), rng);
    std::size_t differing = 0;
    for (std::size_t u = 0; u < stratum.schema().units().size(); ++u) {
      const auto& unit = stratum.schema().units()[u];
      if (unit.read(change.record.values) != unit.read(base.values)) {
        ++differing;
        EXPECT_EQ(u, change.changed_unit);
      }
    }
    EXPECT_LE(differing, 1u);
    EXPECT_EQ(change.coincident, differing == 0);
    coincident += change.coincident ? 1 : 0;
  }
  EXPECT_GT(coincident, 0u);
}

TEST(Perturb, E2RaceRedrawToWhiteClearsIndicators) {
  const Cohort stratum = pact_cohort({pact_record({{"race_B", 1}}), pact_record({})});
  const auto bags = multisets(stratum);
  const auto race = *stratum.schema().find_unit("race");
  RngStream rng(1);
  bool saw = false;
  for (int i = 0; i < 400 && !saw; ++i) {
    const auto change = sample_e2(stratum[0], bags, stratum.schema(), rng);
    if (change.changed_unit != race || change.coincident) continue;
    saw = true;
    for (const char* v : {"race_B", "race_A", "race_H", "race_I", "race_O"}) {
      EXPECT_EQ(change.record.values[stratum.schema().index_of(v)], 0.0) << v;
    }
  }
  EXPECT_TRUE(saw);
}

TEST(Perturb, E1AndE3DrawOnlyObservedValues) {
  const Cohort c = synthetic_initial(1500, 9);
  for (auto e : {Experiment::kE1, Experiment::kE3}) {
    PerturbPlan plan;
    plan.experiment = e;
    plan.seed = 12;
    for (const auto& key : experiment_strata(plan)) {
      const Cohort stratum = select(c, key);
      if (stratum.empty()) continue;
      const auto bags = multisets(stratum);
      for (const auto& obs : synthesize(plan, stratum, key)) {
        for (const auto& bag : bags) {
          ASSERT_TRUE(bag.contains(bag.unit.read(obs.record.values)))
              << key.to_string() << " " << bag.unit.name;
        }
      }
    }
  }
}

TEST(Perturb, CountsSumToNPerStratum) {
  const Cohort c = synthetic_initial(2000, 10);
  const RandomForest f = small_forest(c);
  for (int e = 1; e <= 5; ++e) {
    PerturbPlan plan;
    plan.experiment = experiment_from_int(e);
    plan.n = 100;
    plan.seed = 77;
    const auto r = run_experiment(plan, f, c);
    EXPECT_FALSE(r.distributions.empty());
    for (const auto& d : r.distributions) {
      std::size_t sum = 0;
      for (auto x : d.counts) sum += x;
      EXPECT_EQ(sum, 100u) << "E" << e << " " << d.stratum.to_string();
      EXPECT_EQ(d.n, 100u);
    }
  }
}

TEST(Perturb, ConstantForestCollapsesHistograms) {
  const Cohort c = synthetic_initial(1500, 12);
  const RandomForest f = test::constant_forest(c.schema(), 3);
  for (int e = 1; e <= 5; ++e) {
    PerturbPlan plan;
    plan.experiment = experiment_from_int(e);
    plan.seed = 5;
    for (const auto& d : run_experiment(plan, f, c).distributions) {
      EXPECT_EQ(d.count(3 - *d.stratum.level), d.n) << "E" << e << " " << d.stratum.to_string();
    }
  }
}

TEST(Perturb, EmptyStrataAreSkippedAndReported) {
  Cohort c = initial_view(pact_cohort({pact_record({}, 2), pact_record({}, 2),
                                       pact_record({{"race_B", 1}}, 4)}));
  const RandomForest f = test::constant_forest(c.schema(), 2);
  PerturbPlan plan;
  plan.experiment = Experiment::kE3;
  plan.n = 10;
  const auto r = run_experiment(plan, f, c);
  EXPECT_EQ(r.distributions.size(), 2u);
  EXPECT_EQ(r.skipped.size(), 8u);
  plan.experiment = Experiment::kE5;
  const auto r5 = run_experiment(plan, f, c);
  ASSERT_EQ(r5.distributions.size(), 1u);  // level 4 has a single record
  EXPECT_EQ(r5.distributions[0].stratum.level, 2);
  EXPECT_EQ(r5.skipped.size(), 4u);
}

TEST(Perturb, MemorizingForestReplaysCoincidentRedraws) {
  const Cohort c = synthetic_initial(400, 14);
  const RandomForest f = test::memorizing_forest(c);
  PerturbPlan plan;
  plan.experiment = Experiment::kE2;
  plan.n = 200;
  plan.seed = 3;
  const StratumKey key{4, std::nullopt};
  const Cohort stratum = select(c, key);
  std::size_t checked = 0;
  for (const auto& obs : synthesize(plan, stratum, key)) {
    if (!obs.coincident) continue;
    EXPECT_EQ(predict(f, obs.record), predict(f, stratum[*obs.base_row]));
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

TEST(Perturb, ResultIndependentOfJobs) {
  const Cohort c = synthetic_initial(1500, 15);
  const RandomForest f = small_forest(c);
  for (int e = 1; e <= 5; ++e) {
    PerturbPlan plan;
    plan.experiment = experiment_from_int(e);
    plan.seed = 99;
    std::ostringstream a, b;
    write_deltas_csv(a, run_experiment(plan, f, c, 1));
    write_deltas_csv(b, run_experiment(plan, f, c, 6));
    EXPECT_EQ(a.str(), b.str()) << "E" << e;
  }
}

TEST(Perturb, SeedChangesDraws) {
  const Cohort c = synthetic_initial(800, 16);
  const StratumKey key{4, std::nullopt};
  const Cohort stratum = select(c, key);
  PerturbPlan a, b;
  a.seed = 1;
  b.seed = 2;
  const auto oa = synthesize(a, stratum, key);
  const auto ob = synthesize(b, stratum, key);
  std::size_t same = 0;
  for (std::size_t i = 0; i < oa.size(); ++i) same += oa[i].record == ob[i].record ? 1 : 0;
  EXPECT_LT(same, oa.size());
}

TEST(Perturb, StrataCrossLevelsWithRaces) {
  PerturbPlan plan;
  plan.experiment = Experiment::kE4;
  const auto keys = experiment_strata(plan);
  ASSERT_EQ(keys.size(), 10u);
  EXPECT_EQ(keys[0].to_string(), "level=1|race=Black");
  EXPECT_EQ(keys[1].to_string(), "level=1|race=White");
  plan.experiment = Experiment::kE1;
  EXPECT_EQ(experiment_strata(plan).size(), 5u);
}

}  // namespace
}  // namespace custody
