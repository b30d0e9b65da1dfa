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

#ifndef CUSTODY_TRAJECTORY_HPP_
#define CUSTODY_TRAJECTORY_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "custody/dataset.hpp"
#include "custody/forest.hpp"

namespace custody {

struct Trajectory {
  std::size_t person_id = 0;   // position within its ensemble
  std::size_t source_row = 0;  // row of the sampled person in the cohort
  int start_level = kMinLevel;
  std::vector<int> levels;     // levels[0] is the start level
  std::vector<double> ages;

  std::size_t horizon() const { return levels.empty() ? 0 : levels.size() - 1; }
};

struct GroupKey {
  int start_level = kMinLevel;
  std::optional<std::string> race;

  std::string to_string() const;
  auto operator<=>(const GroupKey&) const = default;
};

struct TrajectoryEnsemble {
  GroupKey group;
  std::size_t horizon = 0;
  std::vector<Trajectory> trajectories;
  bool with_replacement = false;  // group had fewer records than requested
};

struct VolatilityStat {
  GroupKey group;
  double mean_weighted_changes_per_person_year = 0.0;
  std::size_t n = 0;
};

// Repeated reclassification of one person: at step t the record carries
// ic_custdy_level = levels[t-1] and age = age_0 + t; everything else is
// held fixed. Deterministic.
Trajectory simulate_individual(const RandomForest& reclass_forest, const Record& base,
                               std::size_t years);

// Start levels x optional races, in that nesting order.
std::vector<GroupKey> make_groups(const std::vector<int>& levels,
                                  const std::vector<std::string>& races = {});

// Samples `per_group` people per group uniformly without replacement (with
// replacement, flagged, when the group is smaller) and simulates each.
std::vector<TrajectoryEnsemble> simulate_ensemble(const RandomForest& reclass_forest,
                                                  const Cohort& cohort,
                                                  std::size_t per_group,
                                                  const std::vector<GroupKey>& groups,
                                                  std::size_t years, std::uint64_t seed,
                                                  unsigned jobs = 1);

// Pointwise mean level at each step.
std::vector<double> average_trajectory(const TrajectoryEnsemble& ensemble);

// Sum of |level_t - level_{t-1}| over the horizon, divided by the horizon.
double volatility(std::span<const int> levels);
inline double volatility(const Trajectory& t) { return volatility(t.levels); }

std::vector<VolatilityStat> volatility_table(const std::vector<TrajectoryEnsemble>& ensembles);

// person_id,group,step,age,level
void write_trajectories_csv(std::ostream& out, const std::vector<TrajectoryEnsemble>& ensembles);
// group,step,mean_level
void write_averages_csv(std::ostream& out, const std::vector<TrajectoryEnsemble>& ensembles);
// start_level followed by one column per race (or "all").
void write_volatility_csv(std::ostream& out, const std::vector<VolatilityStat>& stats);

}  // namespace custody

#endif  // CUSTODY_TRAJECTORY_HPP_
