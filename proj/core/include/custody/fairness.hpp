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

#ifndef CUSTODY_FAIRNESS_HPP_
#define CUSTODY_FAIRNESS_HPP_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "custody/dataset.hpp"
#include "custody/forest.hpp"

namespace custody {

enum class Decision {
  kInitialLevelAbove3,     // recorded custody level > 3
  kInstitutionalAdjAbove2, // ic_institut_adj > 2
  kOverrideToHigher,       // recorded override; records without it are excluded
  kPredictedAbove3,        // model prediction > 3
};

enum class ProtectedGroup { kBlack, kHispanic, kAgeOver45, kFemale };

std::string_view to_string(Decision d);
std::string_view to_string(ProtectedGroup g);

struct FairnessQuery {
  Decision decision = Decision::kInitialLevelAbove3;
  ProtectedGroup group = ProtectedGroup::kBlack;
  bool given_high_adjustment = false;  // condition on ic_institut_adj > 2
};

// P(D=1 | A=a [, B=1]) and P(D=1 | A=a' [, B=1]) with their tallies. A
// probability is nullopt (undefined) when its denominator is zero.
struct RatePair {
  std::optional<double> p_a;
  std::optional<double> p_not_a;
  std::size_t hits_a = 0;
  std::size_t n_a = 0;
  std::size_t hits_not_a = 0;
  std::size_t n_not_a = 0;
  std::size_t excluded = 0;  // records lacking the decision (override data)

  bool undefined() const { return !p_a || !p_not_a; }
};

bool in_group(const CohortSchema& schema, const Record& record, ProtectedGroup group);

// Exact empirical conditional frequencies. kPredictedAbove3 requires a forest.
RatePair conditional_rate(const Cohort& cohort, const FairnessQuery& query,
                          const RandomForest* forest = nullptr);

struct FairnessRow {
  FairnessQuery query;
  RatePair rates;
};

// 3 decisions x 4 groups, then the override decision x 4 groups
// conditioned on high institutional adjustment: 16 rows.
std::vector<FairnessRow> decision_table(const Cohort& cohort);

// Rates of the model decision prediction > 3.
RatePair predictive_parity(const RandomForest& forest, const Cohort& cohort,
                           ProtectedGroup group);

struct ParityGap {
  std::optional<double> gap_a;
  std::optional<double> gap_not_a;
};

ParityGap parity_gap(const RatePair& model, const RatePair& data);

// decision,group,p_a,p_not_a,n_a,n_not_a,undefined
void write_fairness_csv(std::ostream& out, const std::vector<FairnessRow>& rows);

}  // namespace custody

#endif  // CUSTODY_FAIRNESS_HPP_
