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

#ifndef CUSTODY_PERTURB_HPP_
#define CUSTODY_PERTURB_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "custody/dataset.hpp"
#include "custody/forest.hpp"

namespace custody {

// The five perturbation experiments.
//  E1: every sampling unit drawn independently from the level stratum.
//  E2: one randomly chosen unit of a real person redrawn from the stratum.
//  E3: E1 within level x race strata.
//  E4: E2 within level x race strata.
//  E5: categorical units fixed, quantitative variables drawn uniformly
//      within a margin of error around the person's values.
enum class Experiment { kE1 = 1, kE2 = 2, kE3 = 3, kE4 = 4, kE5 = 5 };

Experiment experiment_from_int(int k);  // throws std::invalid_argument

inline constexpr int kMaxDelta = kMaxLevel - kMinLevel;

struct DeltaDistribution {
  StratumKey stratum;
  std::array<std::size_t, 2 * kMaxDelta + 1> counts{};  // index = delta + 4
  std::size_t n = 0;

  void add(int delta);
  std::size_t count(int delta) const;
};

struct PerturbPlan {
  Experiment experiment = Experiment::kE1;
  std::size_t n = 100;  // synthetic observations per stratum
  std::vector<std::string> races{"Black", "White"};  // E3 and E4
  double confidence = 0.95;                           // E5
  std::uint64_t seed = 0;

  void validate() const;
};

// Two-sided normal quantile z with P(|Z| <= z) = confidence.
double z_score(double confidence);

// Per-variable margin of error z * s / sqrt(n) over a stratum, where s is
// the sample standard deviation. Zero for non-quantitative variables.
// Throws DataError when the stratum has fewer than 2 records.
std::vector<double> margins_of_error(const Cohort& stratum, double confidence);

Record sample_e1(const std::vector<Multiset>& stratum_multisets,
                 const CohortSchema& schema, RngStream& rng);

struct SingleChange {
  Record record;
  std::size_t changed_unit = 0;  // index into schema.units()
  bool coincident = false;       // redrawn value equals the original
};

SingleChange sample_e2(const Record& base, const std::vector<Multiset>& stratum_multisets,
                       const CohortSchema& schema, RngStream& rng);
SingleChange sample_e2(const Record& base, const Cohort& stratum, RngStream& rng);

Record sample_e5(const Record& base, const CohortSchema& schema,
                 const std::vector<double>& margins, RngStream& rng);
Record sample_e5(const Record& base, const Cohort& stratum, double confidence,
                 RngStream& rng);

struct SyntheticObservation {
  Record record;
  std::optional<std::size_t> base_row;      // E2, E4, E5: row within the stratum
  std::optional<std::size_t> changed_unit;  // E2, E4
  bool coincident = false;
};

// Strata of an experiment: custody levels 1..5, crossed with plan.races
// for E3/E4.
std::vector<StratumKey> experiment_strata(const PerturbPlan& plan);

// Generates plan.n observations for one stratum. Observation i uses its own
// stream derived from (seed, experiment, stratum, i).
std::vector<SyntheticObservation> synthesize(const PerturbPlan& plan, const Cohort& stratum,
                                             const StratumKey& key, unsigned jobs = 1);

struct SkippedStratum {
  StratumKey stratum;
  std::string reason;
};

// Deltas grouped by the unit a single-change experiment touched.
struct UnitDeltas {
  StratumKey stratum;
  std::string unit;
  std::vector<int> deltas;
};

struct ExperimentResult {
  PerturbPlan plan;
  std::vector<DeltaDistribution> distributions;
  std::vector<SkippedStratum> skipped;
  std::vector<std::pair<StratumKey, std::size_t>> coincidences;  // E2, E4
  std::vector<UnitDeltas> unit_deltas;                           // E2, E4
};

ExperimentResult run_experiment(const PerturbPlan& plan, const RandomForest& forest,
                                const Cohort& cohort, unsigned jobs = 1);

// CSV with columns stratum,delta,count,n.
void write_deltas_csv(std::ostream& out, const ExperimentResult& result);

}  // namespace custody

#endif  // CUSTODY_PERTURB_HPP_
