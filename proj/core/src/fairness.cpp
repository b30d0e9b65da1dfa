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

#include "custody/fairness.hpp"

#include <cmath>
#include <ostream>

#include "custody/format.hpp"

namespace custody {

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::kInitialLevelAbove3: return "initial_custody_level>3";
    case Decision::kInstitutionalAdjAbove2: return "institutional_adjustment>2";
    case Decision::kOverrideToHigher: return "override_to_higher";
    case Decision::kPredictedAbove3: return "predicted_custody_level>3";
  }
  return "?";
}

std::string_view to_string(ProtectedGroup g) {
  switch (g) {
    case ProtectedGroup::kBlack: return "Black";
    case ProtectedGroup::kHispanic: return "Hispanic";
    case ProtectedGroup::kAgeOver45: return "age>45";
    case ProtectedGroup::kFemale: return "female";
  }
  return "?";
}

bool in_group(const CohortSchema& schema, const Record& record, ProtectedGroup group) {
  switch (group) {
    case ProtectedGroup::kBlack: return race_of(schema, record) == "Black";
    case ProtectedGroup::kHispanic: return race_of(schema, record) == "Hispanic";
    case ProtectedGroup::kAgeOver45:
      if (const auto i = schema.find("age_gt_45")) return record.values[*i] == 1.0;
      return record.values[schema.index_of("age")] > 45.0;
    case ProtectedGroup::kFemale:
      return record.values[schema.index_of("gender_female")] == 1.0;
  }
  return false;
}

namespace {

constexpr double kHighAdjustment = 2.0;
constexpr int kHighLevel = 3;

// nullopt when the record carries no value for the decision.
std::optional<bool> decide(const CohortSchema& schema, const Record& r, Decision d,
                           const RandomForest* forest) {
  switch (d) {
    case Decision::kInitialLevelAbove3: return r.custody_level > kHighLevel;
    case Decision::kInstitutionalAdjAbove2:
      return r.values[schema.index_of("ic_institut_adj")] > kHighAdjustment;
    case Decision::kOverrideToHigher: return r.override_to_higher;
    case Decision::kPredictedAbove3:
      if (forest == nullptr)
        throw std::invalid_argument("predicted decision requires a forest");
      return predict(*forest, r) > kHighLevel;
  }
  return std::nullopt;
}

std::optional<double> ratio(std::size_t hits, std::size_t n) {
  if (n == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

RatePair conditional_rate(const Cohort& cohort, const FairnessQuery& query,
                          const RandomForest* forest) {
  const auto& schema = cohort.schema();
  if (forest != nullptr) forest->check_schema(schema);
  std::optional<std::size_t> adj;
  if (query.given_high_adjustment) adj = schema.index_of("ic_institut_adj");

  RatePair out;
  for (const auto& r : cohort.records()) {
    if (adj && !(r.values[*adj] > kHighAdjustment)) continue;
    const auto d = decide(schema, r, query.decision, forest);
    if (!d) {
      ++out.excluded;
      continue;
    }
    if (in_group(schema, r, query.group)) {
      ++out.n_a;
      out.hits_a += *d ? 1 : 0;
    } else {
      ++out.n_not_a;
      out.hits_not_a += *d ? 1 : 0;
    }
  }
  out.p_a = ratio(out.hits_a, out.n_a);
  out.p_not_a = ratio(out.hits_not_a, out.n_not_a);
  return out;
}

std::vector<FairnessRow> decision_table(const Cohort& cohort) {
  if (cohort.empty()) throw DataError("decision_table: cohort is empty");
  constexpr ProtectedGroup kGroups[] = {ProtectedGroup::kBlack, ProtectedGroup::kHispanic,
                                        ProtectedGroup::kAgeOver45, ProtectedGroup::kFemale};
  std::vector<FairnessRow> rows;
  for (Decision d : {Decision::kInitialLevelAbove3, Decision::kInstitutionalAdjAbove2,
                     Decision::kOverrideToHigher}) {
    for (auto g : kGroups) {
      FairnessQuery q{d, g, false};
      rows.push_back({q, conditional_rate(cohort, q)});
    }
  }
  for (auto g : kGroups) {
    FairnessQuery q{Decision::kOverrideToHigher, g, true};
    rows.push_back({q, conditional_rate(cohort, q)});
  }
  return rows;
}

RatePair predictive_parity(const RandomForest& forest, const Cohort& cohort,
                           ProtectedGroup group) {
  RatePair out = conditional_rate(cohort, {Decision::kPredictedAbove3, group, false}, &forest);
  if (out.undefined())
    throw DataError(std::string("predictive parity: group '") + std::string(to_string(group)) +
                    "' or its complement is empty");
  return out;
}

ParityGap parity_gap(const RatePair& model, const RatePair& data) {
  ParityGap g;
  if (model.p_a && data.p_a) g.gap_a = std::fabs(*model.p_a - *data.p_a);
  if (model.p_not_a && data.p_not_a) g.gap_not_a = std::fabs(*model.p_not_a - *data.p_not_a);
  return g;
}

void write_fairness_csv(std::ostream& out, const std::vector<FairnessRow>& rows) {
  out << "decision,group,p_a,p_not_a,n_a,n_not_a,undefined\n";
  for (const auto& row : rows) {
    out << to_string(row.query.decision);
    if (row.query.given_high_adjustment) out << "|institutional_adjustment>2";
    out << ',' << to_string(row.query.group) << ',' << format_optional(row.rates.p_a) << ','
        << format_optional(row.rates.p_not_a) << ',' << row.rates.n_a << ','
        << row.rates.n_not_a << ',' << (row.rates.undefined() ? 1 : 0) << '\n';
  }
}

}  // namespace custody
